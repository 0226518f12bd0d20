#!/usr/bin/env python3
"""Scan the curvature floor of the effective potential over temperature for a
family of double-well confinement strengths and compare with (T - T_c)/T^2.

Writes a CSV with one row per (lambda, T) pair.
"""
import argparse
import csv

from mflangevin import renormalized as rn
from mflangevin.quad1d import PotentialSpec, build_measure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", default="0,0.5,1,2")
    ap.add_argument("--t-factors", default="1.05,1.1,1.2,1.5,2,3")
    ap.add_argument("--out", default="curvature_floor.csv")
    args = ap.parse_args()

    rows = []
    for lam in (float(v) for v in args.lambdas.split(",")):
        measure = build_measure(PotentialSpec.quartic(lam), 1e-10)
        t_c = rn.critical_temperature(measure)
        for factor in (float(v) for v in args.t_factors.split(",")):
            T = factor * t_c
            table = rn.renorm_potential(measure, T, rn.auto_phi_grid(measure, T, 401))
            predicted = (T - t_c) / T**2
            rows.append([lam, t_c, T, table.curvature_floor, predicted,
                         table.curvature_floor - predicted])
            print(f"lambda={lam:<4g} T={T:8.4f}  floor={table.curvature_floor:+.8f}  "
                  f"(T-T_c)/T^2={predicted:+.8f}")

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "t_critical", "T", "floor", "predicted", "difference"])
        writer.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

"""Effective potential of the auxiliary field for quadratic interactions.

For a single-particle measure alpha proportional to exp(-V) and temperature T,
the auxiliary-field potential is

    v(phi) = phi^2/(2T) - log integral exp(x*phi/T) alpha(dx),

stored up to a global additive constant.  Its derivatives follow from tilted
means and variances:

    v'(phi)  = phi/T - mean(phi/T)/T,
    v''(phi) = 1/T - var(phi/T)/T^2.

This module computes the tabulated potential, its minimisers, the curvature
floor, the critical temperature (tilted variance at zero field for the
even/convex-derivative class), the coarse-grained free energy obtained by
inverting the magnetisation map, gradient-dominance (PL) constants, and the
resulting quadratic log-Sobolev bound.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    GridFailure,
    GridTooNarrow,
    MultipleMinima,
    NonPositiveCurvature,
    NotGHS,
    OutOfRange,
)
from .quad1d import LineMeasure, check_ghs, tilt_moments, tilt_table

__all__ = [
    "RenormTable",
    "FreeEnergyTable",
    "renorm_potential",
    "auto_phi_grid",
    "critical_temperature",
    "magnetization_map",
    "coarse_free_energy",
    "pl_constant",
    "lsi_bound_quadratic",
    "write_renorm_table",
]

_ROOT_TOL = 1e-12  # two digits below the 1e-10 contract for downstream slack


@dataclass(frozen=True)
class RenormTable:
    """Tabulated auxiliary-field potential and its first two derivatives."""

    temperature: float
    phi_grid: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    ddv: np.ndarray
    t_critical: float | None
    curvature_floor: float
    minimizers: np.ndarray


@dataclass(frozen=True)
class FreeEnergyTable:
    """Coarse-grained free energy on a magnetisation grid (additive constant free)."""

    temperature: float
    m_grid: np.ndarray
    values: np.ndarray


def _dv_scalar(measure: LineMeasure, T: float, phi: float) -> float:
    return phi / T - tilt_moments(measure, phi / T, max_power=2).mean / T


def auto_phi_grid(measure: LineMeasure, T: float, points: int = 801,
                  start: float = 2.0) -> np.ndarray:
    """Symmetric grid [-W, W] widened until |v'| increases outward at both ends,
    which guarantees every stationary point is interior."""
    w = start
    for _ in range(40):
        probe = np.linspace(-w, w, 9)
        _, mean, _ = tilt_table(measure, probe / T)
        dv = probe / T - mean / T
        if dv[0] < 0.0 < dv[-1] and abs(dv[0]) > abs(dv[1]) and abs(dv[-1]) > abs(dv[-2]):
            return np.linspace(-w, w, points)
        w *= 1.5
    raise GridTooNarrow("could not find a grid with outward-increasing |v'|")


def renorm_potential(measure: LineMeasure, T: float, phi_grid: np.ndarray) -> RenormTable:
    """Tabulate the auxiliary-field potential on phi_grid.

    Minimisers are the ascending roots of v', refined by root bracketing to
    1e-10; the curvature floor is the grid minimum of v''.  Raises
    GridTooNarrow when v' shows no ascending sign change inside the grid.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    phi = np.asarray(phi_grid, dtype=float)
    if phi.ndim != 1 or len(phi) < 5 or not np.all(np.diff(phi) > 0):
        raise ValueError("phi_grid must be a strictly increasing 1-D grid")

    log_z, mean, var = tilt_table(measure, phi / T)
    v = phi**2 / (2.0 * T) - log_z
    dv = phi / T - mean / T
    ddv = 1.0 / T - var / T**2

    # grid values within rounding noise of zero are exact roots (symmetry
    # pins them to nodes); genuine crossings are refined by bracketing
    scale = float(np.max(np.abs(dv))) or 1.0
    tiny = 1e-13 * scale
    minimizers = [float(phi[i]) for i in np.flatnonzero(np.abs(dv) <= tiny)
                  if ddv[i] > 0.0]
    crossings = np.flatnonzero((dv[:-1] < -tiny) & (dv[1:] > tiny))
    for i in crossings:
        minimizers.append(float(brentq(lambda p: _dv_scalar(measure, T, p),
                                       phi[i], phi[i + 1], xtol=_ROOT_TOL,
                                       rtol=8.0 * np.finfo(float).eps)))
    if not minimizers:
        if dv[0] < -tiny and dv[-1] > tiny:
            # ends enclose roots but the wells are shallower than grid noise
            # (near-critical flat landscape): settle for the potential argmin
            minimizers = [float(phi[int(np.argmin(v))])]
        else:
            raise GridTooNarrow(
                "v' has no ascending zero inside the grid "
                f"(dv ends: {dv[0]:.3g}, {dv[-1]:.3g})")
    minimizers = np.array(sorted(set(np.round(minimizers, 12))))

    ghs = check_ghs(measure.potential)
    t_critical = float(tilt_moments(measure, 0.0).variance) if ghs.passed else None

    return RenormTable(
        temperature=float(T), phi_grid=phi, v=v, dv=dv, ddv=ddv,
        t_critical=t_critical, curvature_floor=float(np.min(ddv)),
        minimizers=minimizers)


def critical_temperature(measure: LineMeasure) -> float:
    """Tilted variance at zero field; valid for the even/convex-derivative class.

    Raises NotGHS when the potential is outside that class (the variance
    formula is proven only there).
    """
    report = check_ghs(measure.potential)
    if not report.passed:
        raise NotGHS(f"potential failed the class check: {report.detail}")
    return float(tilt_moments(measure, 0.0).variance)


def magnetization_map(measure: LineMeasure, T: float, phi: float) -> float:
    """Mean of the tilted measure exp(x*phi/T) d(alpha)."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return float(tilt_moments(measure, phi / T, max_power=2).mean)


_MAX_FIELD_BRACKET = 1e6


def _solve_field_for_mean(measure: LineMeasure, T: float, m: float) -> float:
    """Invert the (strictly increasing) magnetisation map by bracketing."""
    w = max(4.0 * T, 4.0)
    while w <= _MAX_FIELD_BRACKET:
        try:
            lo, hi = magnetization_map(measure, T, -w), magnetization_map(measure, T, w)
        except GridFailure:
            break  # the tilt needed is beyond what the representation resolves
        if lo < m < hi:
            return float(brentq(lambda p: magnetization_map(measure, T, p) - m,
                                -w, w, xtol=_ROOT_TOL, rtol=8.0 * np.finfo(float).eps))
        w *= 2.0
    raise OutOfRange(f"magnetisation {m} is outside the attainable range")


def coarse_free_energy(measure: LineMeasure, T: float, m_grid: np.ndarray) -> FreeEnergyTable:
    """Coarse-grained free energy on a magnetisation grid, up to a constant.

    For each requested m the conjugate field phi_m with tilted mean m is found
    by monotone root bracketing (the map is strictly increasing because its
    derivative is a tilted variance over T), and

        fhat(m) = v(phi_m) - (phi_m - m)^2 / (2T).
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    m_grid = np.asarray(m_grid, dtype=float)
    phis = np.array([_solve_field_for_mean(measure, T, m) for m in m_grid])
    log_z, _, _ = tilt_table(measure, phis / T)
    v = phis**2 / (2.0 * T) - log_z
    values = v - (phis - m_grid) ** 2 / (2.0 * T)
    return FreeEnergyTable(temperature=float(T), m_grid=m_grid, values=values)


def pl_constant(table: FreeEnergyTable) -> float:
    """Gradient-dominance constant of the tabulated free energy.

    Returns the grid infimum of |fhat'(m)|^2 / (2 (fhat(m) - fhat(m*)));
    at the minimiser the 0/0 ratio is replaced by the local second derivative
    from second differences (the exact limit for a smooth minimum).  Raises
    MultipleMinima when the global minimum is not unique on the grid.
    """
    m, f = table.m_grid, table.values
    if len(m) < 5:
        raise ValueError("free-energy table too short")
    i_star = int(np.argmin(f))
    step = float(np.max(np.diff(m)))
    near = np.flatnonzero(f - f[i_star] < 1e-8)
    if np.any(np.abs(m[near] - m[i_star]) > step * 1.5):
        raise MultipleMinima("free energy has two global grid minima")

    grad = np.gradient(f, m, edge_order=2)
    ratios = np.full_like(f, np.inf)
    mask = np.arange(len(m)) != i_star
    gap = f[mask] - f[i_star]
    ratios[mask] = np.where(gap > 0, grad[mask] ** 2 / (2.0 * gap), np.inf)
    if 0 < i_star < len(m) - 1:
        h1, h2 = m[i_star] - m[i_star - 1], m[i_star + 1] - m[i_star]
        curv = 2.0 * (h1 * f[i_star + 1] + h2 * f[i_star - 1] - (h1 + h2) * f[i_star]) \
            / (h1 * h2 * (h1 + h2))
        ratios[i_star] = curv
    return float(np.min(ratios))


def lsi_bound_quadratic(T: float, curvature_floor: float, gamma_v: float) -> float:
    """Upper bound on the inverse log-Sobolev constant:

        1/gamma <= 1/gamma_v + 1/(gamma_v^2 * T^2 * curvature_floor).

    Raises NonPositiveCurvature when the floor is not positive (the bound
    does not apply there).
    """
    if curvature_floor <= 0:
        raise NonPositiveCurvature("curvature floor must be positive for the quadratic bound")
    if gamma_v <= 0:
        raise ValueError("gamma_v must be positive")
    return 1.0 / gamma_v + 1.0 / (gamma_v**2 * T**2 * curvature_floor)


def write_renorm_table(table: RenormTable, csv_path, json_path) -> None:
    """Emit the table as CSV (phi,v,dv,ddv) with a JSON sidecar."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi", "v", "dv", "ddv"])
        for row in zip(table.phi_grid, table.v, table.dv, table.ddv):
            writer.writerow([f"{x:.17g}" for x in row])
    sidecar = {
        "T": table.temperature,
        "t_critical": table.t_critical,
        "curvature_floor": table.curvature_floor,
        "minimizers": [float(x) for x in table.minimizers],
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Batch command-line front-end.

Every library operation is exposed as a subcommand that reads a flat INI
config file (one section per subcommand, ``key = value``) overridden by
flags, writes machine output into ``--out``, and records a JSON sidecar
``{version, command, config, seed, outputs}`` alongside.  Re-running a
command from its sidecar (``--config sidecar.json``) reproduces the output
files byte for byte.

Exit codes: 0 success, 2 precondition violation, 3 numerical failure,
4 I/O error.  Human-readable summaries go to stdout; machine-readable data
only to files.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, graphs, modes, quad1d, renormalized
from .errors import MeanFieldError, NumericalError, PreconditionError

_FLOAT_FMT = "%.17g"


# -- config plumbing ---------------------------------------------------------------

def _parse_value(raw: str, kind):
    if kind is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if kind == "floats":
        raw = raw.strip()
        return [float(v) for v in raw.split(",")] if raw else []
    if kind == "ints":
        raw = raw.strip()
        return [int(v) for v in raw.split(",")] if raw else []
    return kind(raw)


def _resolve_config(command: str, schema: dict, args: argparse.Namespace) -> dict:
    """defaults < config file (INI section or sidecar JSON) < explicit flags."""
    config = {key: default for key, (_, default) in schema.items()}
    path = getattr(args, "config", None)
    if path:
        text = Path(path).read_text()
        if text.lstrip().startswith("{"):
            raw = json.loads(text)
            if "command" in raw:
                if raw["command"] != command:
                    raise PreconditionError(
                        f"sidecar is for {raw['command']!r}, not {command!r}")
                raw = raw["config"]
            for key, value in raw.items():
                if key not in schema:
                    raise PreconditionError(f"unknown config key {key!r} for {command}")
                config[key] = value
        else:
            parser = configparser.ConfigParser()
            parser.optionxform = str  # keys are case-sensitive (T vs t)
            parser.read_string(text)
            if parser.has_section(command):
                for key, raw_val in parser.items(command):
                    if key not in schema:
                        raise PreconditionError(f"unknown config key {key!r} for {command}")
                    config[key] = _parse_value(raw_val, schema[key][0])
    for key in schema:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            config[key] = flag
    return config


def _write_sidecar(out_dir: Path, command: str, config: dict, outputs: list[str]) -> None:
    sidecar = {
        "version": __version__,
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "outputs": outputs,
    }
    with open(out_dir / "sidecar.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_FLOAT_FMT % v for v in row])


def _potential_from_config(config: dict) -> quad1d.PotentialSpec:
    kind = config["potential"]
    if kind == "quartic":
        return quad1d.PotentialSpec.quartic(config["lam"])
    if kind == "gaussian":
        return quad1d.PotentialSpec.gaussian(config["curvature"])
    if kind == "periodic_fourier":
        return quad1d.PotentialSpec.periodic_fourier(config["coefficients"])
    if kind == "tabulated":
        if not config.get("file"):
            raise PreconditionError("tabulated potential needs file=<csv of x,V>")
        data = np.loadtxt(config["file"], delimiter=",")
        return quad1d.PotentialSpec.tabulated(data[:, 0], data[:, 1])
    raise PreconditionError(f"unknown potential kind {kind!r}")


_POTENTIAL_SCHEMA = {
    "potential": (str, "quartic"),
    "lam": (float, 0.0),
    "curvature": (float, 1.0),
    "coefficients": ("floats", []),
    "file": (str, ""),
    "tol": (float, 1e-10),
}


# -- subcommand handlers --------------------------------------------------------------

def _cmd_tc(config, out_dir):
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    t_c = renormalized.critical_temperature(measure)
    _write_json(out_dir / "tc.json", {"t_critical": t_c, "potential": config["potential"]})
    print(f"T_c = {t_c:.6g}")
    return ["tc.json"]


def _cmd_scan_vt(config, out_dir):
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    T = config["T"]
    if config["phi_max"] > 0:
        grid = np.linspace(-config["phi_max"], config["phi_max"], config["points"])
    else:
        grid = renormalized.auto_phi_grid(measure, T, config["points"])
    table = renormalized.renorm_potential(measure, T, grid)
    renormalized.write_renorm_table(table, out_dir / "renorm.csv", out_dir / "renorm.json")
    print(f"T = {T:.6g}: curvature floor {table.curvature_floor:.6g}, "
          f"{len(table.minimizers)} minimiser(s)")
    return ["renorm.csv", "renorm.json"]


def _cmd_free_energy(config, out_dir):
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    T = config["T"]
    m_grid = np.linspace(config["m_min"], config["m_max"], config["points"])
    table = renormalized.coarse_free_energy(measure, T, m_grid)
    _write_csv(out_dir / "free_energy.csv", ["m", "fhat"],
               zip(table.m_grid, table.values))
    _write_json(out_dir / "free_energy.json", {"T": T, "points": int(config["points"])})
    print(f"free energy tabulated on [{config['m_min']}, {config['m_max']}] at T = {T:.6g}")
    return ["free_energy.csv", "free_energy.json"]


def _cmd_pl(config, out_dir):
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    T = config["T"]
    m_grid = np.linspace(config["m_min"], config["m_max"], config["points"])
    table = renormalized.coarse_free_energy(measure, T, m_grid)
    gamma = renormalized.pl_constant(table)
    _write_json(out_dir / "pl.json", {"T": T, "pl_constant": gamma})
    print(f"PL constant at T = {T:.6g}: {gamma:.6g}")
    return ["pl.json"]


def _cmd_modes_decompose(config, out_dir):
    if config["kernel_file"]:
        data = np.loadtxt(config["kernel_file"], delimiter=",")
        decomp = modes.fourier_decompose(list(data.ravel()), config["max_frequency"],
                                         config["tol"])
    else:
        decomp = modes.fourier_decompose(config["kernel_coefficients"],
                                         config["max_frequency"], config["tol"])
    (out_dir / "decomposition.json").write_text(decomp.to_json() + "\n")
    print(f"{len(decomp.neg_modes)} mode(s) / {len(decomp.pos_modes)} flat-convex, "
          f"M = {decomp.m_bound:.6g}, L = {decomp.l_bound:.6g}")
    return ["decomposition.json"]


def _cmd_scan_convexity(config, out_dir):
    decomp = modes.ModeDecomposition.from_json(Path(config["decomposition"]).read_text())
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    region = [(-config["radius"], config["radius"])] * decomp.dim
    scan = modes.strong_convexity_scan(config["T"], decomp, measure, region, config["grid"])
    header = [f"zeta_{k + 1}" for k in range(decomp.dim)] + ["min_eig"]
    _write_csv(out_dir / "scan.csv", header,
               (list(p) + [e] for p, e in zip(scan.grid_points, scan.min_eigs)))
    _write_json(out_dir / "scan.json", {
        "T": config["T"], "lambda_hat": scan.lambda_hat,
        "argmin": [float(v) for v in scan.argmin]})
    print(f"lambda_hat = {scan.lambda_hat:.6g} at zeta = {list(map(float, scan.argmin))}")
    return ["scan.csv", "scan.json"]


def _cmd_xy_check(config, out_dir):
    report = modes.xy_check(config["T"], radius=config["radius"], grid=config["grid"])
    _write_json(out_dir / "xy_check.json", {
        "T": config["T"], "bound": report.bound,
        "measured_min_eig": report.measured_min_eig, "convex": report.convex})
    print(f"T = {config['T']:.6g}: bound {report.bound:.5f}, "
          f"measured {report.measured_min_eig:.5f}, convex = {report.convex}")
    return ["xy_check.json"]


def _cmd_un_gap(config, out_dir):
    if config["decomposition"]:
        decomp = modes.ModeDecomposition.from_json(Path(config["decomposition"]).read_text())
    else:
        decomp = modes.xy_decomposition()
    spec = _potential_from_config(config)
    measure = quad1d.build_measure(spec, config["tol"])
    psi = modes.ModeField.from_vector(config["psi"], decomp)
    rows = []
    for n in config["n_values"]:
        res = modes.un_small_n(psi, config["T"], decomp, measure, n)
        rows.append((n, res.u_n, res.u_limiting, res.gap))
        print(f"N = {n}: finite-N value {res.u_n:.8f}, gap {res.gap:.8f}")
    _write_csv(out_dir / "un_gap.csv", ["n", "u_n", "u_limit", "gap"], rows)
    _write_json(out_dir / "un_gap.json", {
        "T": config["T"], "psi": config["psi"],
        "gaps": {str(n): g for n, _, _, g in rows}})
    return ["un_gap.csv", "un_gap.json"]


def _cmd_graph_gen(config, out_dir):
    if config["kind"] == "regular":
        g = graphs.gen_rrg(config["n"], int(config["d"]), config["seed"])
    elif config["kind"] == "erdos_renyi":
        g = graphs.gen_er(config["n"], config["d"], config["seed"])
    else:
        raise PreconditionError(f"unknown graph kind {config['kind']!r}")
    graphs.write_edge_list(g, out_dir / "graph.edges")
    print(f"{config['kind']} graph: n = {g.n}, {len(g.edges)} edges")
    return ["graph.edges"]


def _cmd_graph_spectrum(config, out_dir):
    g = graphs.read_edge_list(config["graph"])
    report = graphs.spectral_report(g)
    _write_json(out_dir / "spectrum.json", {
        "epsilon": report.epsilon, "top_singular": report.top_singular,
        "iterations": report.iterations, "residual": report.residual})
    print(f"epsilon = {report.epsilon:.6g} (top singular {report.top_singular:.6g}, "
          f"{report.iterations} iterations)")
    return ["spectrum.json"]


def _sim_config(config) -> dynamics.SimConfig:
    topology = "complete"
    if config["graph"]:
        topology = graphs.read_edge_list(config["graph"])
    decomp = None
    if config["decomposition"]:
        decomp = modes.ModeDecomposition.from_json(Path(config["decomposition"]).read_text())
    return dynamics.SimConfig(
        n_particles=config["n"], temperature=config["T"], dt=config["dt"],
        n_steps=config["steps"], burn_in=config["burn_in"], seed=config["seed"],
        thinning=config["thinning"], replicas=config["replicas"],
        topology=topology, potential=_potential_from_config(config),
        modes=decomp, no_interaction=config["no_interaction"])


def _cmd_simulate(config, out_dir):
    sim = _sim_config(config)
    samples = dynamics.simulate(sim)
    if config["format"] == "csv":
        dynamics.write_samples_csv(samples, out_dir / "samples.csv")
        out = ["samples.csv"]
    else:
        dynamics.write_samples(samples, out_dir / "samples.bin",
                               temperature=sim.temperature, dt=sim.dt, seed=sim.seed)
        out = ["samples.bin"]
    print(f"simulated {sim.replicas} replica(s) x {sim.n_kept} kept states of n = {sim.n_particles}")
    return out


def _cmd_estimate(config, out_dir):
    samples, meta = dynamics.read_samples(config["samples"])
    report = dynamics.estimate(samples, subtract_mean=config["subtract_mean"])
    payload = {
        "chi": report.chi, "chi_stderr": report.chi_stderr,
        "mean_magnetisation": report.mean_magnetisation,
        "abs_magnetisation": report.abs_magnetisation,
        "gap_upper_chi": report.gap_upper_chi,
        "gap_upper_plateau": report.gap_upper_plateau,
        "samples_used": report.samples_used,
        "input_meta": meta,
    }
    _write_json(out_dir / "estimate.json", payload)
    print(f"chi = {report.chi:.6g} +- {report.chi_stderr:.2g}, "
          f"gap upper bound 1/chi = {report.gap_upper_chi:.6g}")
    return ["estimate.json"]


def _cmd_plateau_bound(config, out_dir):
    samples, _ = dynamics.read_samples(config["samples"])
    if config["symmetrize"]:
        samples = dynamics.symmetrize(samples)
    bound = dynamics.plateau_gap_bound(samples, config["m_plus"], config["delta"],
                                       config["r"])
    _write_json(out_dir / "plateau.json", {
        "bound": bound.bound, "stderr": bound.stderr, "n_window": bound.n_window,
        "n_plus": bound.n_plus, "n_minus": bound.n_minus, "flag": bound.flag})
    print(f"plateau gap bound = {bound.bound:.6g} "
          f"(window visits {bound.n_window}, flag {bound.flag})")
    return ["plateau.json"]


def _cmd_cov_check(config, out_dir):
    report = dynamics.covariance_bound_check(config["n"], config["seed"],
                                             n_samples=config["samples"],
                                             n_pairs=config["pairs"])
    _write_json(out_dir / "cov_check.json", {
        "n": report.n, "samples": report.samples,
        "worst_ratio": report.worst_ratio,
        "worst_ratio_stderr": report.worst_ratio_stderr,
        "ratios": list(report.ratios), "stderrs": list(report.stderrs)})
    print(f"worst covariance ratio = {report.worst_ratio:.4f} "
          f"+- {report.worst_ratio_stderr:.4f} (bound 1)")
    return ["cov_check.json"]


_COMMANDS = {
    "tc": (_cmd_tc, dict(_POTENTIAL_SCHEMA)),
    "scan-vt": (_cmd_scan_vt, {**_POTENTIAL_SCHEMA, "T": (float, 1.5),
                               "points": (int, 801), "phi_max": (float, 0.0)}),
    "free-energy": (_cmd_free_energy, {**_POTENTIAL_SCHEMA, "T": (float, 1.5),
                                       "m_min": (float, -1.0), "m_max": (float, 1.0),
                                       "points": (int, 201)}),
    "pl": (_cmd_pl, {**_POTENTIAL_SCHEMA, "T": (float, 1.5), "m_min": (float, -1.0),
                     "m_max": (float, 1.0), "points": (int, 201)}),
    "modes-decompose": (_cmd_modes_decompose, {
        "kernel_coefficients": ("floats", [1.0]), "kernel_file": (str, ""),
        "max_frequency": (int, 8), "tol": (float, 1e-8)}),
    "scan-convexity": (_cmd_scan_convexity, {
        **_POTENTIAL_SCHEMA, "potential": (str, "periodic_fourier"),
        "decomposition": (str, ""), "T": (float, 1.0), "radius": (float, 6.0),
        "grid": (int, 41)}),
    "xy-check": (_cmd_xy_check, {"T": (float, 1.0), "radius": (float, 6.0),
                                 "grid": (int, 41)}),
    "un-gap": (_cmd_un_gap, {
        **_POTENTIAL_SCHEMA, "potential": (str, "periodic_fourier"),
        "decomposition": (str, ""), "T": (float, 1.0), "psi": ("floats", [0.5, 0.0]),
        "n_values": ("ints", [1, 2, 4])}),
    "graph-gen": (_cmd_graph_gen, {"kind": (str, "regular"), "n": (int, 1000),
                                   "d": (float, 20), "seed": (int, 1)}),
    "graph-spectrum": (_cmd_graph_spectrum, {"graph": (str, "")}),
    "simulate": (_cmd_simulate, {
        **_POTENTIAL_SCHEMA, "n": (int, 100), "T": (float, 2.0), "dt": (float, 1e-3),
        "steps": (int, 200_000), "burn_in": (int, 20_000), "thinning": (int, 10),
        "replicas": (int, 1), "seed": (int, 1), "graph": (str, ""),
        "decomposition": (str, ""), "no_interaction": (bool, False),
        "format": (str, "binary")}),
    "estimate": (_cmd_estimate, {"samples": (str, ""), "subtract_mean": (bool, False)}),
    "plateau-bound": (_cmd_plateau_bound, {
        "samples": (str, ""), "m_plus": (float, 1.0), "delta": (float, 0.2),
        "r": (float, 0.0), "symmetrize": (bool, True)}),
    "cov-check": (_cmd_cov_check, {"n": (int, 5), "seed": (int, 1),
                                   "samples": (int, 1_000_000), "pairs": (int, 10)}),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfl", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, schema) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="INI config file or a previous run's sidecar.json")
        p.add_argument("--threads", type=int, default=0,
                       help="cap worker parallelism (modules here run sequentially)")
        for key, (kind, _) in schema.items():
            flag = "--" + key.replace("_", "-")
            if kind is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            elif kind == "floats":
                p.add_argument(flag, dest=key, default=None,
                               type=lambda s: [float(v) for v in s.split(",") if v.strip()])
            elif kind == "ints":
                p.add_argument(flag, dest=key, default=None,
                               type=lambda s: [int(v) for v in s.split(",") if v.strip()])
            else:
                p.add_argument(flag, dest=key, type=kind, default=None)
    return parser


def run(argv: list[str]) -> int:
    """Dispatch a command line; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler, schema = _COMMANDS[args.command]
    try:
        config = _resolve_config(args.command, schema, args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = handler(config, out_dir)
        _write_sidecar(out_dir, args.command, config, outputs)
        return 0
    except (PreconditionError, ValueError) as exc:
        print(f"precondition violation: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except MeanFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

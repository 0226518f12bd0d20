import json
import os
import warnings

import numpy as np
from mflangevin import cli


def run(*argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cli.run(list(argv))


def read_json(path):
    return json.loads(path.read_text())


def test_tc_quartic(tmp_path):
    out = tmp_path / "o"
    assert run("tc", "--potential", "quartic", "--lam", "0", "--out", str(out)) == 0
    payload = read_json(out / "tc.json")
    assert abs(payload["t_critical"] - 0.6759782400672846) < 1e-9
    side = read_json(out / "sidecar.json")
    assert side["command"] == "tc" and side["outputs"] == ["tc.json"]
    assert side["config"]["lam"] == 0.0


def test_tc_rejects_non_ghs(tmp_path):
    xs = np.linspace(-6.0, 6.0, 1201)
    table = tmp_path / "pot.csv"
    np.savetxt(table, np.column_stack([xs, xs**2 - np.cos(5 * xs)]), delimiter=",")
    code = run("tc", "--potential", "tabulated", "--file", str(table),
               "--out", str(tmp_path / "o"))
    assert code == 2


def test_xy_check_json(tmp_path):
    out = tmp_path / "xy"
    assert run("xy-check", "--T", "0.6", "--grid", "21", "--out", str(out)) == 0
    payload = read_json(out / "xy_check.json")
    assert abs(payload["bound"] - (1 / 0.6 - 1 / (2 * 0.36))) < 1e-9
    assert payload["convex"] is True


def test_scan_vt_and_sidecar_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("scan-vt", "--potential", "quartic", "--lam", "1", "--T", "1.5",
               "--points", "101", "--out", str(a)) == 0
    assert run("scan-vt", "--config", str(a / "sidecar.json"), "--out", str(b)) == 0
    for name in ("renorm.csv", "renorm.json", "sidecar.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sidecar_command_mismatch(tmp_path):
    out = tmp_path / "o"
    assert run("xy-check", "--T", "1.0", "--grid", "5", "--out", str(out)) == 0
    assert run("tc", "--config", str(out / "sidecar.json"),
               "--out", str(tmp_path / "p")) == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[free-energy]\npotential = gaussian\ncurvature = 1\n"
                   "T = 2.0\nm_min = -1\nm_max = 1\npoints = 11\n")
    out = tmp_path / "fe"
    assert run("free-energy", "--config", str(cfg), "--points", "21",
               "--out", str(out)) == 0
    lines = (out / "free_energy.csv").read_text().splitlines()
    assert len(lines) == 22  # flag wins over file
    assert read_json(out / "sidecar.json")["config"]["points"] == 21


def test_pl_gaussian(tmp_path):
    out = tmp_path / "pl"
    assert run("pl", "--potential", "gaussian", "--curvature", "1", "--T", "2",
               "--m-min", "-2", "--m-max", "2", "--points", "201",
               "--out", str(out)) == 0
    assert abs(read_json(out / "pl.json")["pl_constant"] - 0.5) < 1e-6


def test_modes_decompose_and_scan(tmp_path):
    out = tmp_path / "dec"
    assert run("modes-decompose", "--kernel-coefficients", "1.0",
               "--max-frequency", "1", "--out", str(out)) == 0
    dec_path = out / "decomposition.json"
    payload = read_json(dec_path)
    assert payload["alpha"] == 0.0 and len(payload["neg"]) == 2

    scan_out = tmp_path / "scan"
    assert run("scan-convexity", "--decomposition", str(dec_path), "--T", "0.75",
               "--grid", "11", "--radius", "4", "--out", str(scan_out)) == 0
    scan = read_json(scan_out / "scan.json")
    assert scan["lambda_hat"] >= 1 / 0.75 - 1 / (2 * 0.75**2) - 1e-9
    header = (scan_out / "scan.csv").read_text().splitlines()[0]
    assert header == "zeta_1,zeta_2,min_eig"


def test_un_gap(tmp_path):
    out = tmp_path / "un"
    assert run("un-gap", "--psi", "0.5,0", "--T", "1.0", "--n-values", "1,2",
               "--out", str(out)) == 0
    payload = read_json(out / "un_gap.json")
    assert abs(payload["gaps"]["1"] - 0.5) < 1e-6
    assert payload["gaps"]["2"] < payload["gaps"]["1"]


def test_graph_pipeline(tmp_path):
    gen_out = tmp_path / "g"
    assert run("graph-gen", "--kind", "regular", "--n", "100", "--d", "6",
               "--seed", "3", "--out", str(gen_out)) == 0
    spec_out = tmp_path / "s"
    assert run("graph-spectrum", "--graph", str(gen_out / "graph.edges"),
               "--out", str(spec_out)) == 0
    payload = read_json(spec_out / "spectrum.json")
    assert 0 < payload["epsilon"] < 1
    assert payload["residual"] < 1e-8 * payload["top_singular"]


def test_simulate_estimate_plateau(tmp_path):
    sim_out = tmp_path / "sim"
    assert run("simulate", "--potential", "gaussian", "--curvature", "1",
               "--n", "16", "--T", "2.0", "--steps", "4000", "--burn-in", "1000",
               "--thinning", "10", "--replicas", "2", "--seed", "5",
               "--out", str(sim_out)) == 0
    est_out = tmp_path / "est"
    assert run("estimate", "--samples", str(sim_out / "samples.bin"),
               "--out", str(est_out)) == 0
    rep = read_json(est_out / "estimate.json")
    assert rep["chi"] > 0 and rep["samples_used"] == 600

    pl_out = tmp_path / "plat"
    code = run("plateau-bound", "--samples", str(sim_out / "samples.bin"),
               "--m-plus", "1.0", "--delta", "0.6", "--out", str(pl_out))
    assert code == 0
    payload = read_json(pl_out / "plateau.json")
    assert payload["bound"] >= 0


def test_simulate_circle_with_decomposition(tmp_path):
    dec_out = tmp_path / "dec"
    assert run("modes-decompose", "--kernel-coefficients", "1.0",
               "--max-frequency", "1", "--out", str(dec_out)) == 0
    sim_out = tmp_path / "sim"
    assert run("simulate", "--potential", "periodic_fourier", "--coefficients", "",
               "--decomposition", str(dec_out / "decomposition.json"),
               "--n", "12", "--T", "1.0", "--steps", "2000", "--burn-in", "500",
               "--thinning", "10", "--seed", "9", "--out", str(sim_out)) == 0
    from mflangevin import dynamics
    samples, meta = dynamics.read_samples(sim_out / "samples.bin")
    assert meta["n"] == 12
    assert np.all(samples >= 0.0) and np.all(samples < 2.0 * np.pi)


def test_simulate_csv_format(tmp_path):
    out = tmp_path / "csv"
    assert run("simulate", "--potential", "gaussian", "--n", "4", "--steps", "300",
               "--burn-in", "100", "--thinning", "10", "--replicas", "1",
               "--seed", "2", "--format", "csv", "--out", str(out)) == 0
    assert (out / "samples.csv").read_text().startswith("step,x_0,x_1,x_2,x_3")


def test_cov_check(tmp_path):
    out = tmp_path / "cov"
    assert run("cov-check", "--n", "2", "--seed", "4", "--samples", "50000",
               "--pairs", "2", "--out", str(out)) == 0
    payload = read_json(out / "cov_check.json")
    assert payload["worst_ratio"] <= 1.0 + 5.0 * payload["worst_ratio_stderr"]


def test_exit_code_numerical_failure(tmp_path):
    code = run("simulate", "--potential", "quartic", "--lam", "0", "--n", "4",
               "--T", "1.0", "--dt", "2.0", "--steps", "5000", "--burn-in", "0",
               "--seed", "1", "--out", str(tmp_path / "o"))
    assert code == 3


def test_exit_code_io_error(tmp_path):
    code = run("estimate", "--samples", str(tmp_path / "missing.bin"),
               "--out", str(tmp_path / "o"))
    assert code == 4


def test_writes_stay_inside_out(tmp_path, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    out = tmp_path / "only_here"
    assert run("tc", "--potential", "gaussian", "--curvature", "2",
               "--out", str(out)) == 0
    assert os.listdir(work) == []
    assert sorted(os.listdir(out)) == ["sidecar.json", "tc.json"]

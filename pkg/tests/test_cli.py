import csv
import io
import json

import pytest
import yaml

from mdclt import cli

ONES = {"sigma_min": 1, "sigma_lower": 1, "sigma_upper": 1, "nu1": 1, "nu3": 1}


def write_cfg(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bound_example(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"bound": {"params": ONES, "n": 1, "p": 1, "m": 1}})
    code, out, _ = run(capsys, "bound", "--config", cfg)
    assert code == 0
    row = rows_of(out)[0]
    assert float(row["theorem_bound"]) == 2.0 and float(row["epsilon_star"]) == 2.0
    assert row["config_digest"] and row["seed"] == "0"


def test_bound_flags_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"bound": {"params": ONES, "n": 1, "p": 1}})
    code, out, _ = run(capsys, "bound", "--config", cfg, "--n", "10", "--p", "5",
                       "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert abs(doc["rows"][0]["theorem_bound"] - 17.5896421316) < 1e-9
    assert doc["config"]["bound"]["n"] == 10.0


def test_params_iid(tmp_path, capsys):
    proc = {"p": 3, "m": 0, "innovation": "gaussian",
            "coeffs": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]]}
    cfg = write_cfg(tmp_path, {"process": proc, "params": {"n": 10, "m": 1, "n_mc": 2000}})
    code, out, _ = run(capsys, "params", "--config", cfg)
    row = rows_of(out)[0]
    assert code == 0
    for k in ("sigma_min", "sigma_lower", "sigma_upper"):
        assert float(row[k]) == pytest.approx(1.0)


def test_audit_empty_grid(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"audit": {"n": 8, "replicates": 100, "grid": [], "n_mc": 1000}})
    code, _, err = run(capsys, "audit", "--config", cfg)
    assert code == 2 and "empty" in err


def test_degenerate_exit_3(tmp_path, capsys):
    proc = {"p": 2, "m": 0, "coeffs": [[[1, 1], [1, 1]]]}
    cfg = write_cfg(tmp_path, {"process": proc, "params": {"n": 4, "m": 1, "n_mc": 1000}})
    code, _, err = run(capsys, "params", "--config", cfg)
    assert code == 3 and "singular" in err


def test_config_errors(tmp_path, capsys):
    assert run(capsys, "bound", "--config", str(tmp_path / "missing.yaml"))[0] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    assert run(capsys, "bound", "--config", str(bad))[0] == 2
    assert run(capsys, "simulate", "--threads", "0")[0] == 2


def test_gaussian_rate_needs_force(tmp_path, capsys):
    data = {"process": {"p": 1, "m": 0, "coeffs": [1.0], "innovation": "gaussian"},
            "rate_experiment": {"n_grid": [8, 16, 32], "replicates": 100, "n_mc": 1000,
                                "fit": False}}
    cfg = write_cfg(tmp_path, data)
    code, _, err = run(capsys, "rate-experiment", "--config", cfg)
    assert code == 2 and "--force" in err
    assert run(capsys, "rate-experiment", "--config", cfg, "--force")[0] == 0


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


def test_env_threads(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "6")
    assert cli.resolve_threads(None, {}) == 6
    assert cli.resolve_threads(2, {}) == 2
    assert cli.resolve_threads(None, {"threads": 3}) == 3


def _rate_cfg(tmp_path):
    data = {"seed": 11, "rate_experiment": {
        "n_grid": [16, 32, 64], "replicates": 600, "n_mc": 2000,
        "experiments": [{"label": "a", "process": {"p": 2, "m": 1, "innovation": "rademacher",
                                                   "coeffs": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]]},
                         "family": {"grid_levels": 6}, "block": 2}]}}
    return write_cfg(tmp_path, data)


def test_rate_outputs_byte_identical_across_threads(tmp_path, capsys):
    cfg = _rate_cfg(tmp_path)
    blobs = []
    for t in (1, 4):
        out = tmp_path / f"out{t}"
        code, _, _ = run(capsys, "rate-experiment", "--config", cfg, "--threads", str(t),
                         "--out", str(out))
        assert code == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] == blobs[1]
    assert {"rate_experiment.csv", "rate_experiment.meta.json", "rate_fit.json",
            "rate_experiment.svg"} <= set(blobs[0])


def test_simulate_then_block(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run(capsys, "simulate", "--out", str(out), "--seed", "5")[0] == 0
    code, text, _ = run(capsys, "block", "--input", str(out / "batch.bin"), "--m", "3")
    row = rows_of(text)[0]
    assert code == 0 and row["n_blocks"] == str((64 - 1) // 3) and row["seed"] == "5"
    assert float(row["max_sum_identity_error"]) < 1e-10


def test_estimate_mu_json(capsys):
    code, out, _ = run(capsys, "estimate-mu", "--format", "json", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["rows"][0]["kind"] == "mu" and doc["config"]["seed"] == 3

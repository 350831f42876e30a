import json
import time

import numpy as np
import pytest

from qpinn import cli, qsp, verify
from qpinn.errors import ConfigError


def test_verify_suites_pass(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert cli.cmd_verify("hjb", seed=0, out=str(out)) == 0
    report = json.loads(out.read_text())
    assert report["passed"] and report["suite"] == "hjb"
    assert capsys.readouterr().out.count("[PASS]") == len(report["checks"])


def test_verify_fault_injection(monkeypatch, capsys):
    # a flipped sign in parity_split must fail the circuits suite
    def broken(p):
        odd, even = _orig(p)
        return qsp.UnivariatePoly(tuple(-c for c in odd.coeffs)), even

    _orig = qsp.parity_split
    monkeypatch.setattr(qsp, "parity_split", broken)
    assert cli.cmd_verify("circuits", seed=0) == 1
    out = capsys.readouterr().out
    assert "[FAIL]" in out and "parity-split-reconstruction" in out


def test_verify_unknown_suite():
    with pytest.raises(ValueError):
        verify.run_suite("nope")


def test_resources_examples():
    doc = cli.resource_report("prop1", 3, 2, 1, "double-controlled")
    depth = next(r for r in doc["checks"] if r["metric"] == "depth")
    assert depth["measured"] <= 14 and depth["formula"] == 14 and doc["passed"]

    doc = cli.resource_report("cor1", 1, 2, 1, "double-controlled")
    params = next(r for r in doc["checks"] if r["metric"] == "n_params")
    assert params["measured"] == params["formula"] == 6

    doc = cli.resource_report("thm2", 1, 2, 2, "double-controlled")
    width = next(r for r in doc["checks"] if r["metric"] == "width")
    assert width["measured"] == width["formula"] == 6


def test_resources_cli_exit(tmp_path):
    out = tmp_path / "res.json"
    rc = cli.main(["resources", "--construction", "prop1", "--L", "2",
                   "--native", "cnot-single-qubit", "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["passed"]


def test_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epoch": 10}))
    with pytest.raises(ConfigError):
        cli.load_config(str(bad), {})
    bad.write_text(json.dumps({"market": {"rho": 1.0}}))
    with pytest.raises(ConfigError):
        cli.load_config(str(bad), {})
    bad.write_text(json.dumps({"models": ["nope"]}))
    with pytest.raises(ConfigError):
        cli.load_config(str(bad), {})
    bad.write_text(json.dumps({"epochs": 2000}))
    with pytest.raises(ConfigError):
        cli.load_config(str(bad), {})


def test_config_defaults_and_overrides(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"market": {"mu": 0.03}, "epochs": 50}))
    cfg = cli.load_config(str(p), {"n_runs": 3})
    assert cfg["market"]["mu"] == 0.03
    assert cfg["market"]["r"] == 0.02
    assert cfg["epochs"] == 50 and cfg["n_runs"] == 3


def _strip_wall(csv_text: str) -> list[str]:
    return [",".join(line.split(",")[:-1]) for line in csv_text.splitlines()]


def test_train_worker_pool_matches_serial(tmp_path, monkeypatch):
    args = ["train", "--models", "counterpart", "--runs", "2", "--epochs", "5"]
    monkeypatch.setenv("QPINN_THREADS", "2")
    assert cli.main(args + ["--out", str(tmp_path / "pool")]) == 0
    monkeypatch.setenv("QPINN_THREADS", "1")
    assert cli.main(args + ["--out", str(tmp_path / "serial")]) == 0
    for seed in (0, 1):
        a = _strip_wall((tmp_path / "pool" / "runs" / f"counterpart_seed{seed}.csv").read_text())
        b = _strip_wall((tmp_path / "serial" / "runs" / f"counterpart_seed{seed}.csv").read_text())
        assert a == b


def test_train_smoke_artifacts_and_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("QPINN_THREADS", "1")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"checkpoint_every": 5}))
    args = ["train", "--config", str(cfg), "--models", "quantum_inspired",
            "--runs", "1", "--epochs", "10"]
    t0 = time.time()
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert time.time() - t0 < 10.0

    ckpt = json.loads((tmp_path / "a" / "runs" /
                       "quantum_inspired_seed0_ckpt5.json").read_text())
    assert ckpt["kind"] == "quantum_inspired" and len(ckpt["values"]) == 6
    assert (tmp_path / "a" / "runs" / "quantum_inspired_seed0_ckpt10.json").exists()

    run_csv = tmp_path / "a" / "runs" / "quantum_inspired_seed0.csv"
    assert len(run_csv.read_text().splitlines()) == 11  # header + one row per epoch
    assert (tmp_path / "a" / "quantum_inspired_aggregate.csv").exists()
    assert (tmp_path / "a" / "surface_quantum_inspired.csv").exists()
    assert (tmp_path / "a" / "surface_analytical.csv").exists()
    assert (tmp_path / "a" / "slice_t05.csv").exists()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    entry = summary["models"]["quantum_inspired"]
    assert len(entry["alpha_hat"]) == 5
    assert entry["final_losses"][0] > 0

    surface = (tmp_path / "a" / "surface_quantum_inspired.csv").read_text().splitlines()
    assert len(surface) == 1 + 50 * 50

    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ["quantum_inspired_aggregate.csv", "surface_quantum_inspired.csv",
                 "slice_t05.csv"]:
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()
    a_runs = _strip_wall((tmp_path / "a" / "runs" / "quantum_inspired_seed0.csv").read_text())
    b_runs = _strip_wall((tmp_path / "b" / "runs" / "quantum_inspired_seed0.csv").read_text())
    assert a_runs == b_runs
    sa = json.loads((tmp_path / "a" / "summary.json").read_text())
    sb = json.loads((tmp_path / "b" / "summary.json").read_text())
    sa["metadata"].pop("timestamp")
    sb["metadata"].pop("timestamp")
    sa["config"].pop("out_dir")
    sb["config"].pop("out_dir")
    assert sa == sb

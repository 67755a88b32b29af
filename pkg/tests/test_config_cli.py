import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from corraloha.cli import main
from corraloha.config import load_spec
from corraloha.errors import ConfigError
from corraloha.model import generate_correlation, save_matrix


def write(path, text):
    path.write_text(text)
    return path


def test_defaults():
    spec = load_spec(None)
    assert spec.model.n == 10 and spec.model.aoi_cap == 20
    assert spec.optimizer.seed == spec.seed == 0
    assert spec.policy_source == {"strategy": "homogeneous_pareto"}


def test_matrix_file_relative_to_config(tmp_path):
    sub = tmp_path / "exp"
    sub.mkdir()
    c = generate_correlation(4, 1.0, (0, 0.5), 1.0, 3)
    save_matrix(c, sub / "c.txt")
    cfg = write(sub / "e.yaml", "model: {n: 4}\ncorrelation: {file: c.txt}\npolicy: {q: 0.2}\n")
    spec = load_spec(cfg)
    assert spec.model.correlation == c
    assert spec.policy_source["q"] == [0.2] * 4


def test_overrides_and_optimizer_seed():
    spec = load_spec(None, ["seed=5", "model.n=3", "optimizer.starts=2", "policy.q=[0.1, 0.2, 0.3]"])
    assert spec.seed == 5 and spec.optimizer.seed == 5 and spec.optimizer.starts == 2
    assert spec.model.n == 3


@pytest.mark.parametrize(
    "text,needle",
    [
        ("model:\n  n: 4\nbogus: 1\n", "line 3"),
        ("model:\n  n: four\n", "model.n"),
        ("model: {n: 3}\ncorrelation: {file: a.txt, constant: 0.2}\n", "line 2"),
        ("model: {n: 3}\npolicy:\n  q: [0.1, 0.2]\n", "line 3"),
        ("model: {n: 3}\npolicy: {strategy: magic}\n", "unknown strategy"),
        ("model: {n: 3}\ncorrelation: {constant: 1.5}\n", "invalid model"),
        ("simulation: {horizon: 10, warmup: 20}\n", "line 1"),
        ("model: [\n", "line"),
        ("optimizer: {bogus: 1}\n", "unknown optimizer field"),
    ],
)
def test_config_errors(tmp_path, text, needle):
    cfg = write(tmp_path / "bad.yaml", text)
    with pytest.raises(ConfigError) as err:
        load_spec(cfg)
    assert needle in str(err.value)


def test_missing_matrix_file(tmp_path):
    cfg = write(tmp_path / "e.yaml", "model: {n: 3}\ncorrelation: {file: nope.txt}\n")
    with pytest.raises(ConfigError, match="cannot read matrix"):
        load_spec(cfg)


def test_cli_analytic_trivial_row(tmp_path):
    out = tmp_path / "a"
    code = main(["analytic", "--set", "model.n=1", "--set", "policy.q=1.0", "--set", "correlation={constant: 0}",
                 "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader((out / "metrics.csv").open()))
    assert float(rows[0]["aoi"]) == 1.0
    assert rows[-1]["sensor"] == "network" and float(rows[-1]["aoi"]) == 1.0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "analytic" and man["seeds"]["base"] == 0 and "metrics.csv" in man["files"]
    resolved = yaml.safe_load((out / "config.resolved.yaml").read_text())
    assert resolved["model"]["n"] == 1


def test_cli_manifest_reruns_identically(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--set", "model.n=4", "--set", "policy.q=0.1", "--set", "simulation.horizon=5000",
                 "--set", "simulation.replications=2", "--seed", "3", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "config.resolved.yaml"), "--out", str(b)]) == 0
    assert (a / "simulation.csv").read_bytes() == (b / "simulation.csv").read_bytes()
    assert (a / "aoi_histogram.csv").read_bytes() == (b / "aoi_histogram.csv").read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path / "bad.yaml", "model:\n  n: 0\n")
    assert main(["analytic", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["analytic", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["analytic", "--threads", "0", "--out", str(tmp_path / "y")]) == 2
    # gradient undefined at q = 1
    assert main(["analytic", "--set", "policy.q=1.0", "--dump-gradient", "--out", str(tmp_path / "z")]) == 2


def test_cli_runtime_failure(tmp_path, monkeypatch):
    from corraloha import experiments

    def explode(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(experiments, "run_sweep", explode)
    assert main(["sweep", "--out", str(tmp_path / "s")]) == 3


def test_cli_sweep_and_homogeneous(tmp_path):
    out = tmp_path / "w"
    assert main(["sweep", "--set", "sweep={start: 0.01, stop: 0.05, steps: 5}", "--out", str(out)]) == 0
    text = (out / "sweep.csv").read_text()
    assert "\r" not in text
    assert len(text.splitlines()) == 6
    out = tmp_path / "h"
    assert main(["opt-homogeneous", "--out", str(out)]) == 0
    kinds = [r["kind"] for r in csv.DictReader((out / "homogeneous.csv").open())]
    assert kinds == ["age_optimal", "energy_optimal", "pareto"]


def test_cli_mspadam(tmp_path):
    out = tmp_path / "m"
    assert main(["opt-mspadam", "--set", "model.n=4", "--set", "optimizer.starts=3", "--trajectory",
                 "--out", str(out), "--threads", "2"]) == 0
    for f in ("policy.csv", "starts.csv", "strategies.csv", "trajectory.csv", "manifest.json"):
        assert (out / f).exists()
    rows = list(csv.DictReader((out / "starts.csv").open()))
    assert len(rows) == 3


def test_reproduce_table3(tmp_path):
    out = tmp_path / "t3"
    assert main(["reproduce", "table3", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "table3.csv").open()))
    assert [float(r["offdiag"]) for r in rows] == [0.0, 0.2, 0.4, 0.6, 0.8]
    q0 = np.array([float(rows[0][f"q{i}"]) for i in range(1, 11)])
    assert np.all(np.abs(q0 - 0.099) <= 0.005)


def test_reproduce_fig5_small(tmp_path):
    out = tmp_path / "f5"
    assert main(["reproduce", "fig5", "--out", str(out), "--horizon", "3000", "--warmup", "100", "--points", "3"]) == 0
    for name in ("C1", "C2", "C3"):
        header = (out / f"fig5_{name}.csv").read_text().splitlines()[0]
        assert header == "q,aoi_analytic,aoi_sim,ee_analytic,ee_sim"


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "corraloha", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "corraloha" in res.stdout
    res = subprocess.run([sys.executable, "-m", "corraloha", "analytic", "--bogus"], capture_output=True, text=True)
    assert res.returncode == 2

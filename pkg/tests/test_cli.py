import json
import math
import subprocess
import sys

import pytest

from hyquls.cli import main
from hyquls.data import generate_blobs, save_csv
from hyquls.experiment import ConfigError, ExperimentConfig, derive_seed, filter_scan, format_scan_csv, run

TWO_POINT = {"dataset": {"inline": {"features": [[1.0], [-1.0]], "labels": [1, -1]}}, "gamma": 1.0, "probes": [[0.9]]}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def _strip_timing(text):
    obj = json.loads(text)
    obj.pop("timing", None)
    return json.dumps(obj, sort_keys=True)


def test_minimal_classical_report(tmp_path):
    cfg = _write(tmp_path, TWO_POINT)
    out = tmp_path / "r.json"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    res = report["results"]["classical"]
    assert res["alpha"] == pytest.approx([1 / 3, -1 / 3], abs=1e-15)
    assert res["b"] == pytest.approx(0.0, abs=1e-15)
    assert res["decision_values"] == pytest.approx([0.6]) and res["labels"] == [1]
    assert report["artifact"]["name"] == "hyquls"


def test_config_echo_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_json({**TWO_POINT, "kernel": {"kind": "rbf", "omega": 0.5}, "qsls": {"tau": 0.1}})
    again = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg


@pytest.mark.parametrize("algo", ["classical", "hvq", "qsls", "dual", "dual-rotated"])
def test_train_is_deterministic(tmp_path, algo):
    cfg = _write(tmp_path, {"dataset": {"blobs": {"m_per_class": 6, "n": 2, "separation": 4, "seed": 1}},
                            "kernel": {"kind": "rbf", "omega": 1.0}, "hvq": {"shots": 500}, "qsls": {"shots": 500}})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["train", "--config", str(cfg), "--algo", algo, "--seed", "9", "--out", str(a)]) == 0
    assert main(["train", "--config", str(cfg), "--algo", algo, "--seed", "9", "--out", str(b)]) == 0
    assert _strip_timing(a.read_text()) == _strip_timing(b.read_text())


def test_seed_changes_sampled_output(tmp_path):
    cfg = _write(tmp_path, {"dataset": {"blobs": {"m_per_class": 4, "n": 2, "seed": 1}}, "algorithm": "hvq", "hvq": {"shots": 100}})
    reports = []
    for seed in ("1", "2"):
        out = tmp_path / f"{seed}.json"
        main(["train", "--config", str(cfg), "--seed", seed, "--out", str(out)])
        reports.append(json.loads(out.read_text())["results"]["hvq"]["decision_values"])
    assert reports[0] != reports[1]
    assert derive_seed(1, "hvq") != derive_seed(1, "qsls") and derive_seed(1, "hvq") == derive_seed(1, "hvq")


def test_compare_on_blobs(tmp_path, monkeypatch):
    monkeypatch.setenv("HYQULS_THREADS", "2")
    cfg = _write(tmp_path, {"dataset": {"blobs": {"m_per_class": 10, "n": 2, "separation": 6, "seed": 0}},
                            "kernel": {"kind": "rbf", "omega": 1.0}, "hvq": {"L": 1e4}, "qsls": {"t_max": 12}})
    out = tmp_path / "c.json"
    assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["agreement"]["hvq"]["label_agreement"] == 1.0
    qsls = report["results"]["qsls"]
    assert qsls["T"] == 12 and qsls["R"] == 20
    assert all(e["measured"] <= e["bound"] for e in qsls["error_bounds"])
    assert {"lambda", "c", "F_hat", "kept"} <= set(report["results"]["hvq"]["eigen_table"][0])


def test_predict_with_saved_model(tmp_path, capsys):
    data = generate_blobs(5, 2, 6.0, 3)
    save_csv(data, tmp_path / "train.csv")
    cfg = _write(tmp_path, {"dataset": {"path": "train.csv"}, "kernel": {"kind": "poly", "d": 2}, "scale": True})
    model = tmp_path / "m.json"
    assert main(["train", "--config", str(cfg), "--model-out", str(model), "--out", str(tmp_path / "r.json")]) == 0
    train_values = json.loads((tmp_path / "r.json").read_text())["results"]["classical"]["decision_values"]
    (tmp_path / "probes.csv").write_text("\n".join(",".join(repr(v) for v in row) for row in data.features.tolist()))
    assert main(["predict", "--model", str(model), "--probes", str(tmp_path / "probes.csv")]) == 0
    pred = json.loads(capsys.readouterr().out)
    assert pred["decision_values"] == pytest.approx(train_values, rel=1e-12)
    save_csv(generate_blobs(5, 2, 6.0, 4), tmp_path / "train.csv")
    assert main(["predict", "--model", str(model), "--probes", str(tmp_path / "probes.csv")]) == 2


def test_spectrum_command(tmp_path, capsys):
    cfg = _write(tmp_path, {"dataset": {"blobs": {"m_per_class": 4, "n": 2, "seed": 0}}, "kernel": {"kind": "rbf", "omega": 1.0}})
    assert main(["spectrum", "--config", str(cfg), "--t-max", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["T"] == 3 and len(report["table"]) == 8
    assert [row["retained"] for row in report["table"]].count(True) == 3


def test_filter_scan_examples():
    rows = filter_scan([2.0], [0.0], [1.0])
    assert len(rows) == 1
    assert rows[0]["F_ideal"] == rows[0]["F_hat"] == pytest.approx(1 - math.exp(-2), rel=1e-15)
    rows = filter_scan([2.0, 1.0], [0.1, 0.0], [3.0, 0.0, 0.5, 1.0])
    keys = [(r["lambda"], r["L"], r["eps_q"]) for r in rows]
    assert keys == sorted(keys)
    assert all(r["F_hat"] is None for r in rows if r["lambda"] == 0)
    for L in (1.0, 2.0):
        for eps in (0.0, 0.1):
            chain = [r["F_hat"] for r in rows if r["L"] == L and r["eps_q"] == eps and r["lambda"] > 0]
            assert chain == sorted(chain)
    assert "NA" in format_scan_csv(rows)
    with pytest.raises(ValueError):
        filter_scan([], [0.0], [1.0])


def test_filter_scan_cli(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["filter-scan", "--L", "2", "--eps", "0", "--lambda", "1,0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,L,eps_q,F_ideal,F_hat"
    assert lines[1].endswith(",NA") and len(lines) == 3
    assert main(["filter-scan", "--L", "0", "--lambda", "1"]) == 2


def test_config_errors_have_paths(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    bad = _write(tmp_path, {**TWO_POINT, "hvq": {"L": -1}})
    assert main(["train", "--config", str(bad)]) == 2
    assert "$.hvq.L" in capsys.readouterr().err
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_json({"dataset": {"path": "x.csv"}, "algorithm": "svm"})
    assert info.value.path == "$.algorithm"
    assert main(["train", "--config", str(_write(tmp_path, {"dataset": {"path": "nope.csv"}}))]) == 2
    assert main(["bogus"]) == 2


def test_numerical_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, {**TWO_POINT, "algorithm": "plssvm"})  # K has rank one
    assert main(["train", "--config", str(cfg)]) == 3


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, TWO_POINT)
    proc = subprocess.run([sys.executable, "-m", "hyquls", "train", "--config", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["classical"]["labels"] == [1]


def test_run_report_is_json_clean():
    report = run(ExperimentConfig.from_json({**TWO_POINT, "algorithm": "dual-rotated"}))
    text = json.dumps(report, sort_keys=True, allow_nan=False)
    assert json.loads(text)["results"]["dual-rotated"]["rotated"]["feasible_set"] == "rotated-box"

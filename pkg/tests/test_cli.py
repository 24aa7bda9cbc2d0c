import csv
import json
import subprocess

import pytest

from latentgraph.cli import main, parse_vary, worker_count
from latentgraph.errors import SchemaError


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def pipeline(tmp_path):
    spec = write(tmp_path / "spec.json", {"graph": "G2", "p": 10, "r": 2, "r_m": [2, 2],
                                          "noise": {"model": "none"}, "N": 500, "seed": 0})
    cfg = write(tmp_path / "fit.json", {"s": 4, "alpha": 1.0})
    sim, est = tmp_path / "sim", tmp_path / "est"
    assert main(["simulate", "--spec", spec, "--out", str(sim)]) == 0
    assert main(["fit", "--data", str(sim), "--config", cfg, "--out", str(est),
                 "--truth", str(sim / "truth.json")]) == 0
    assert main(["evaluate", "--est", str(est), "--truth", str(sim / "truth.json"),
                 "--out", str(est / "metrics.json")]) == 0
    return sim, est


def test_pipeline_outputs(pipeline):
    sim, est = pipeline
    for name in ("scores_m1.csv", "scores_m2.csv", "truth.json", "spec.json", "run_meta.json"):
        assert (sim / name).exists()
    for name in ("params.json", "trace.csv", "edges.csv", "metrics.json", "run_meta.json"):
        assert (est / name).exists()
    metrics = json.loads((est / "metrics.json").read_text())
    assert 0 <= metrics["tpr"] <= 1 and 0 <= metrics["fpr"] <= 1
    header = (est / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,objective,max_change,dist_max,dist_sum"
    assert (est / "edges.csv").read_text().splitlines()[0] == "i,j,norm_ij,norm_ji,selected"
    truth = json.loads((sim / "truth.json").read_text())
    assert {"edges", "omega_support", "a_mats", "l_mats"} <= set(truth)


@pytest.mark.xfail(strict=True, reason="with s at the true maximum degree the fit stalls at a wrong support")
def test_pipeline_recovers_graph(pipeline):
    _, est = pipeline
    metrics = json.loads((est / "metrics.json").read_text())
    assert (metrics["tpr"], metrics["fpr"]) == (1.0, 0.0)


def test_simulate_is_byte_identical(tmp_path):
    spec = write(tmp_path / "spec.json", {"graph": "G1", "p": 4, "r": 2, "r_m": [3, 3], "N": 25, "seed": 9})
    for out in ("a", "b"):
        assert main(["simulate", "--spec", spec, "--out", str(tmp_path / out)]) == 0
    for name in ("scores_m1.csv", "scores_m2.csv", "truth.json", "run_meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_malformed_config_exit_code(tmp_path, capsys):
    sim = tmp_path / "sim"
    spec = write(tmp_path / "spec.json", {"graph": "G1", "p": 4, "r": 2, "r_m": [2, 2], "N": 20})
    main(["simulate", "--spec", spec, "--out", str(sim)])
    capsys.readouterr()
    bad = write(tmp_path / "bad.json", {"s": 2, "alpah": 0.5})
    assert main(["fit", "--data", str(sim), "--config", bad, "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "SchemaError" and err["field"] == "alpah"


def test_bad_spec_exit_code(tmp_path, capsys):
    spec = write(tmp_path / "spec.json", {"graph": "G2", "p": 12})
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path / "sim")]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "p"


def test_module_error_exit_code(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path), "--config", write(tmp_path / "c.json", {"s": 1}),
                 "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileError"


def test_parse_vary():
    assert parse_vary("s=1..4") == ("s", [1, 2, 3, 4])
    assert parse_vary("N=100,200") == ("N", [100, 200])
    for bad in ("q=1", "s=a..b", "N=", "k"):
        with pytest.raises(SchemaError):
            parse_vary(bad)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("LATENTGRAPH_THREADS", "2")
    assert worker_count(10) == 2 and worker_count(1) == 1
    monkeypatch.delenv("LATENTGRAPH_THREADS")
    assert worker_count(10) >= 1


@pytest.mark.parametrize("threads", ["1", "2"])
def test_sweep_rows(tmp_path, monkeypatch, threads):
    monkeypatch.setenv("LATENTGRAPH_THREADS", threads)
    spec = write(tmp_path / "spec.json", {"graph": "G1", "p": 5, "r": 2, "r_m": [3, 3], "N": 60, "seed": 4})
    cfg = write(tmp_path / "fit.json", {"s": 2, "max_iter_main": 20})
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--spec", spec, "--vary", "s=1..3", "--replicates", "2", "--config", cfg,
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["value"], r["replicate"], r["seed"]) for r in rows] == [
        (str(v), str(r), str(4 + r)) for v in (1, 2, 3) for r in (0, 1)]
    assert all(r["error"] == "" for r in rows)
    assert (tmp_path / "run_meta.json").exists()


def test_sweep_independent_of_threads(tmp_path, monkeypatch):
    texts = []
    for threads in ("1", "2"):
        monkeypatch.setenv("LATENTGRAPH_THREADS", threads)
        spec = write(tmp_path / "spec.json", {"graph": "G1", "p": 5, "r": 2, "r_m": [3, 3], "N": 60})
        out = tmp_path / f"sweep{threads}.csv"
        assert main(["sweep", "--spec", spec, "--vary", "N=40,80", "--config",
                     write(tmp_path / "fit.json", {"s": 2, "max_iter_main": 10}), "--out", str(out)]) == 0
        texts.append(out.read_text())
    assert texts[0] == texts[1]


def test_select_command(tmp_path):
    spec = write(tmp_path / "spec.json", {"graph": "G1", "p": 5, "r": 2, "r_m": [2, 2], "N": 60})
    main(["simulate", "--spec", spec, "--out", str(tmp_path / "sim")])
    grid = write(tmp_path / "grid.json", {"s": [1, 2]})
    base = write(tmp_path / "base.json", {"s": 1, "max_iter_main": 10})
    out = tmp_path / "chosen.json"
    assert main(["select", "--data", str(tmp_path / "sim"), "--grid", grid, "--folds", "3",
                 "--config", base, "--out", str(out)]) == 0
    assert json.loads(out.read_text())["s"] in (1, 2)
    bad = write(tmp_path / "badgrid.json", {"s": [1], "eta": [1]})
    assert main(["select", "--data", str(tmp_path / "sim"), "--grid", bad, "--out", str(out)]) == 2


def test_console_script(tmp_path):
    res = subprocess.run(["latentgraph", "simulate", "--spec", str(tmp_path / "none.json"), "--out",
                          str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 1
    assert json.loads(res.stderr)["error"] == "FileError"

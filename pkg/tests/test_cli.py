import csv
import json

import numpy as np
import pytest

import tpp
from tpp.cli import main
from tpp.datamodel import read_dataset, read_model
from tpp.simulator import KAPPA_DEMO

CONFIG = {
    "cavity": {"kappa": KAPPA_DEMO, "chi": {"e": -0.3e7, "g": 0.3e7, "f": -0.9e7}, "eta": KAPPA_DEMO,
               "t_on": 1e-7, "t_off": 4e-7, "t_meas": 5e-7, "dt": 1e-8},
    "noise": {"model": "white"},
    "classes": ["e", "g", "f"],
    "n_shots": 120,
    "seed": 4,
}


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workdir(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(CONFIG))
    data = tmp_path / "d.tppd"
    assert run(["simulate", "--config", cfg, "--out", data], capsys)[0] == 0
    return tmp_path


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and out.startswith(f"tpp {tpp.__version__} (kernels: {tpp.BACKEND}")


def test_usage_errors_are_json(capsys):
    code, _, err = run([], capsys)
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    code, _, err = run(["train", "--data"], capsys)
    assert code == 2 and json.loads(err)["error"] == "UsageError"
    code, _, err = run(["--threads", "0", "psd", "--data", "x", "--class", "e"], capsys)
    assert code == 2


def test_runtime_errors_are_json(workdir, capsys):
    code, _, err = run(["train", "--data", workdir / "missing.tppd", "--out", workdir / "m.json"], capsys)
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"
    code, _, err = run(["psd", "--data", workdir / "d.tppd", "--class", "h"], capsys)
    assert code == 1 and json.loads(err)["error"] == "UnknownClass"
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({**CONFIG, "extra": 1}))
    code, _, err = run(["simulate", "--config", bad, "--out", workdir / "x.tppd"], capsys)
    assert code == 1 and json.loads(err)["error"] == "ConfigError"
    code, _, err = run(["repro", "fig9"], capsys)
    assert code == 1 and json.loads(err)["error"] == "UnknownRecipe"


def test_simulate_overrides(workdir, capsys):
    ds = read_dataset(workdir / "d.tppd")
    assert ds.classes == ("e", "g", "f") and ds.shots_per_class == [120] * 3 and ds.n_time == 50
    out = workdir / "s.tppd"
    assert run(["simulate", "--config", workdir / "cfg.json", "--out", out, "--shots", 7, "--seed", 4], capsys)[0] == 0
    small = read_dataset(out)
    assert np.array_equal(small.shots[1], ds.shots[1][:7])


def test_train_eval_filters(workdir, capsys):
    d = workdir / "d.tppd"
    for method in ("lsq", "closed-form"):
        m = workdir / f"{method}.json"
        assert run(["train", "--data", d, "--method", method, "--out", m], capsys)[0] == 0
    a, b = read_model(workdir / "lsq.json"), read_model(workdir / "closed-form.json")
    assert np.allclose(a.W, b.W, rtol=1e-8, atol=1e-8 * np.abs(a.W).max())

    code, out, _ = run(["eval", "--data", d, "--model", workdir / "lsq.json"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["rule"] == "argmax" and np.array(rep["confusion"]).sum() == 360
    code, out, _ = run(["eval", "--data", d, "--model", workdir / "lsq.json", "--rule", "gaussian",
                        "--report", workdir / "r.json"], capsys)
    assert code == 0 and json.loads((workdir / "r.json").read_text())["rule"] == "gaussian"

    f = workdir / "f.csv"
    assert run(["filters", "--model", workdir / "lsq.json", "--out", f], capsys)[0] == 0
    rows = list(csv.reader(f.open()))
    assert rows[0][0] == "class" and rows[0][-1] == "bias" and len(rows) == 4 and len(rows[1]) == 1 + 100 + 1
    assert f.read_bytes().count(b"\r") == 0
    W = np.array([[float(x) for x in r[1:-1]] for r in rows[1:]])
    assert np.abs(W.sum(axis=0)).max() <= 1e-9 * np.abs(W).max()
    assert run(["filters", "--data", d, "--assume-white", "--out", workdir / "w.csv"], capsys)[0] == 0


def test_eval_class_mismatch(workdir, capsys):
    cfg = dict(CONFIG, classes=["g", "e"])
    p = workdir / "c2.json"
    p.write_text(json.dumps(cfg))
    run(["simulate", "--config", p, "--out", workdir / "ge.tppd"], capsys)
    run(["train", "--data", workdir / "d.tppd", "--out", workdir / "m.json"], capsys)
    code, _, err = run(["eval", "--data", workdir / "ge.tppd", "--model", workdir / "m.json"], capsys)
    assert code == 1 and json.loads(err)["error"] == "DimensionMismatch"


def test_baseline_psd_crossval(workdir, capsys):
    d = workdir / "d.tppd"
    code, out, _ = run(["baseline", "--data", d, "--filter", "matched:e,g"], capsys)
    assert code == 0 and json.loads(out)["in_sample"] is True
    code, out, _ = run(["baseline", "--data", d, "--eval", d, "--filter", "boxcar", "--config", workdir / "cfg.json"], capsys)
    assert code == 0 and json.loads(out)["filter"] == "boxcar"
    code, _, err = run(["baseline", "--data", d, "--filter", "boxcar"], capsys)
    assert code == 1 and json.loads(err)["error"] == "ValueError"

    code, out, _ = run(["psd", "--data", d, "--class", "e", "--method", "fft"], capsys)
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "frequency_hz,psd" and len(lines) == 1 + 26

    args = ["crossval", "--data", d, "--pipeline", "multi-fgda:g,e", "--iters", 2, "--seed", 7, "--flip", 0.1]
    code, out1, _ = run(args, capsys)
    _, out2, _ = run(args, capsys)
    rep = json.loads(out1)
    assert code == 0 and out1 == out2 and rep["n_iter"] == 2 and rep["pipeline"] == "multi-fgda:g,e"


def test_threads_flag(workdir, capsys):
    code, out, _ = run(["--threads", 1, "psd", "--data", workdir / "d.tppd", "--class", "g"], capsys)
    assert code == 0 and out.startswith("frequency_hz")

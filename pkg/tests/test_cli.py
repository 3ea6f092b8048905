import json

import numpy as np

from corr_rr.cli import main
from corr_rr.core import load_dataset


def test_synth(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["synth", "--n", "300", "--d", "3", "--k", "4", "--rho", "0.5", "--seed", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "attr_0,attr_1,attr_2" and len(lines) == 301
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["spec"]["n"] == 300 and np.array(meta["correlation"]).shape == (3, 3)
    ds, _ = load_dataset(out)
    assert ds.domains == (4, 4, 4)


def test_pyopt(capsys):
    assert main(["pyopt", "--fa", "0.9,0.1", "--fb", "0.9,0.1", "--epsilon", "1", "--n-prime", "9000"]) == 0
    text = capsys.readouterr().out
    assert "p_y* = 1.000000" in text and "avg_mse(p_y*)" in text


def test_check_ldp(capsys):
    assert main(["check-ldp", "--mechanism", "CORR_RR", "--epsilon", "1", "--d", "2", "--k", "2", "--py", "0.7"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["check-ldp", "--mechanism", "RSRFD", "--epsilon", "0.5", "--d", "2", "--k", "3",
                 "--prior", "0.2,0.3,0.5"]) == 0


def test_check_ldp_too_large(capsys):
    assert main(["check-ldp", "--mechanism", "SPL", "--epsilon", "1", "--d", "13", "--k", "2"]) == 2
    assert "error" in capsys.readouterr().err


def test_run(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "sources": [{"synth": {"n": 1000, "d": 2, "k": 2, "rho": 0.9, "seed": 0}}],
        "mechanisms": ["SPL", "CORR_RR"],
        "epsilons": [1, 2],
        "repetitions": 3,
    }))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "5", "--no-timing", "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "mechanism,epsilon,d,k,source,phase1_fraction,mse_mean,mse_std,runs,wall_ms"
    meta = json.loads(a.with_suffix(".json").read_text())
    assert meta["config"]["seed"] == 5

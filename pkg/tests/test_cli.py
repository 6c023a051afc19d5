import json

import pytest

from pseudospec.cli import main


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--model", "M1", "--side", "10", "--seed", "3", "--reps", "2",
                 "--out", str(out)]) == 0
    return out


def test_simulate_writes_patterns(simulated):
    assert (simulated / "rep0000.csv").exists() and (simulated / "rep0001.csv").exists()
    meta = json.loads((simulated / "rep0000_window.json").read_text())
    assert meta["side_lengths"] == [10.0, 10.0] and meta["model"]["name"] == "M1"


@pytest.mark.parametrize("bw", ["cv", "opt", "0.8", "raw"])
def test_estimate(simulated, tmp_path, bw):
    out = tmp_path / "spec.json"
    code = main(["estimate", "--input", str(simulated / "rep0000.csv"),
                 "--window", str(simulated / "rep0000_window.json"), "--bandwidth", bw, "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert "provenance" in doc and "grid" in doc
    if bw != "raw":
        report = json.loads((tmp_path / "bandwidth_report.json").read_text())
        assert report["rule"] in ("cv", "opt", "fixed")
        if bw == "cv":
            assert len(report["scan"]) == 20


def test_estimate_loglinear(simulated, tmp_path):
    out = tmp_path / "spec.json"
    assert main(["estimate", "--input", str(simulated / "rep0001.csv"),
                 "--window", str(simulated / "rep0001_window.json"), "--intensity", "const,x1sq,x2sq",
                 "--bandwidth", "opt", "--out", str(out)]) == 0


def test_theory(tmp_path):
    out = tmp_path / "theory.json"
    assert main(["theory", "--model", "M3", "--side", "10", "--u", "0.1", "0.2",
                 "--csv", str(tmp_path / "t.csv"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert {"pseudo_spectrum", "reweighted_spectrum", "R", "D", "local_spectrum"} <= set(doc)
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header.startswith("w1,w2,F11_re")


def test_bench(tmp_path):
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"model": "M1", "sides": [10], "reps": 2, "estimators": ["raw", "kernel_opt"],
                               "seed": 1}))
    out = tmp_path / "report.json"
    assert main(["bench", "--config", str(cfg), "--out", str(out), "--radial-dir", str(tmp_path / "rad")]) == 0
    assert json.loads(out.read_text())["cells"]
    assert (tmp_path / "report.csv").exists()
    assert list((tmp_path / "rad").glob("radial_M1_A10_correct_raw_11.csv"))


def test_errors_exit_with_code_2(tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "missing.csv"), "--window", str(tmp_path / "w.json"),
                 "--out", str(tmp_path / "o.json")]) == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"reps": 1}))
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "r.json")]) == 2
    assert "error:" in capsys.readouterr().err

import csv
import io
import json
import math

import numpy as np
import pytest

from depconc.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(fixtures_dir):
    return {k: fixtures_dir / f"{k}.json" for k in ("p1", "m1", "hamming", "bad_pmf")}


def test_analyze_p1_goldstein(capsys, files):
    code, out, _ = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"],
                       "--methods", "goldstein", "--t", "1.5")
    assert code == 0
    rep = json.loads(out)
    assert rep["results"]["goldstein"]["values"][0] == pytest.approx(2 * math.exp(-1.5), rel=1e-15)
    assert rep["delta"] == [1.0, 1.0, 1.0]
    for key in ("tool_version", "model_digest", "seed", "methods"):
        assert key in rep


def test_analyze_m1_goldstein_matches_markov_theta(capsys, files):
    code, out, _ = run(capsys, "analyze", "--model", files["m1"], "--function", files["hamming"],
                       "--methods", "goldstein,markov_theta")
    assert code == 0
    res = json.loads(out)["results"]
    assert np.allclose(res["goldstein"]["gamma"], res["markov_theta"]["gamma"], atol=1e-12)
    assert np.allclose(res["goldstein"]["values"], res["markov_theta"]["values"], atol=1e-12)
    assert res["goldstein"]["constants"]["gamma_delta_sq"] == pytest.approx(8.6861, abs=1e-10)


def test_auto_grid(capsys, files):
    _, out, _ = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"])
    t = json.loads(out)["t"]
    assert len(t) == 11 and t[0] == 0.0 and t[-1] == pytest.approx(1.5)


def test_parse_error_exit_2(capsys, files, tmp_path):
    code, _, err = run(capsys, "analyze", "--model", files["bad_pmf"], "--function", files["hamming"])
    assert code == 2 and "law.pmf" in err
    code, _, err = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"], "--methods", "bogus")
    assert code == 2
    code, _, err = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"], "--blocks", "0|2,1")
    assert code == 2
    code, _, err = run(capsys, "analyze", "--model", tmp_path / "missing.json", "--function", files["hamming"])
    assert code == 2


def test_single_inapplicable_method_exit_3(capsys, files):
    code, _, _ = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"], "--methods", "markov_theta")
    assert code == 3
    code, _, _ = run(capsys, "analyze", "--model", files["m1"], "--function", files["hamming"], "--methods", "mcdiarmid")
    assert code == 3
    code, _, _ = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"],
                     "--methods", "markov_theta,goldstein")
    assert code == 0


def test_validate_p1(capsys, files):
    code, out, _ = run(capsys, "validate", "--model", files["p1"], "--function", files["hamming"], "--t", "1.5,9")
    assert code == 0
    rep = json.loads(out)
    assert rep["exact"] == [0.25, 0.0]
    assert rep["results"]["goldstein"]["values"][0] == pytest.approx(0.446, abs=5e-4)
    assert rep["violations"] == []


def test_validate_fault_injection_exit_4(capsys, files):
    code, out, _ = run(capsys, "validate", "--model", files["m1"], "--function", files["hamming"],
                       "--inject-fault", "halve-gamma")
    assert code == 4
    assert "goldstein" in json.loads(out)["violations"]


def test_validate_mc_reproducible(capsys, files):
    args = ("validate", "--model", files["m1"], "--function", files["hamming"], "--mode", "mc",
            "--samples", "20000", "--seed", "5", "--t", "0.5,1.5")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b
    rep = json.loads(a)
    est, se = np.array(rep["mc_estimate"]), np.array(rep["mc_stderr"])
    assert np.all(np.abs(est - np.array(rep["exact"])) <= 5 * se + 1e-3)


def test_json_and_csv_carry_identical_numbers(capsys, files):
    base = ("validate", "--model", files["m1"], "--function", files["hamming"], "--t", "0.25,1,2.5")
    _, js, _ = run(capsys, *base)
    _, cs, _ = run(capsys, *base, "--format", "csv")
    rep = json.loads(js)
    rows = list(csv.DictReader(io.StringIO(cs)))
    for row in rows:
        entry = rep["results"][row["method"]]
        k = rep["t"].index(float(row["t"]))
        if row["bound"] == "n/a":
            assert entry["values"] is None
        else:
            assert float(row["bound"]) == entry["values"][k]
        assert float(row["exact"]) == rep["exact"][k]


def test_out_file_is_written(capsys, files, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "analyze", "--model", files["p1"], "--function", files["hamming"], "--out", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["model_digest"]
    assert [p.name for p in tmp_path.iterdir()] == ["report.json"]


def test_bit_consistent_runs(capsys, files):
    for model in ("p1", "m1"):
        args = ("analyze", "--model", files[model], "--function", files["hamming"], "--seed", "3")
        assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_blocks_option(capsys, files):
    code, out, _ = run(capsys, "analyze", "--model", files["m1"], "--function", files["hamming"],
                       "--methods", "blocks", "--blocks", "0|1,2")
    assert code == 0
    assert np.allclose(json.loads(out)["results"]["blocks"]["gamma"], [[1, 1.19], [0, 2]])


def test_selftest(capsys, tmp_path):
    code, out, _ = run(capsys, "selftest", "--seed", "42", "--instances", "0")
    assert code == 0 and "soundness_suite" in out and "FAIL" not in out
    witness = tmp_path / "w.json"
    code, out, _ = run(capsys, "selftest", "--seed", "42", "--instances", "10", "--inject-fault", "halve-gamma",
                       "--out", witness)
    assert code == 4 and "FAIL" in out
    assert json.loads(witness.read_text())["violations"]

import json

import pytest

from rmt_portfolio.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_theory_primal_min(capsys):
    code, out, _ = run(capsys, "theory", "--problem", "primal-min", "--alpha", "2", "--tau", "2")
    doc = json.loads(out)
    assert code == 0
    assert doc["objective"] == pytest.approx(0.5, abs=1e-12)
    assert doc["multiplier"] == pytest.approx(0.0, abs=1e-12)
    assert "regime" in doc


def test_theory_dual_max_kappa_one(capsys):
    code, out, _ = run(capsys, "theory", "--problem", "dual-max", "--alpha", "2", "--kappa", "1")
    doc = json.loads(out)
    assert code == 0 and doc["objective"] == pytest.approx(2.0) and doc["multiplier"] == 0.0


def test_theory_inequality_modes(capsys):
    base = ("theory", "--problem", "primal-ineq", "--alpha", "3", "--tau", "2", "--direction", "at-most")
    _, out, _ = run(capsys, *base)
    assert json.loads(out)["objective"] == pytest.approx(1.0)
    code, out, _ = run(capsys, *base, "--mode", "paper-literal")
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(1.0505102572168221, rel=1e-9)


def test_theory_roundtrip_flag(capsys):
    code, out, _ = run(capsys, "theory", "--problem", "primal-min", "--alpha", "2", "--tau", "3",
                       "--roundtrip")
    assert code == 0 and json.loads(out)["roundtrip"]["discrepancy"] <= 1e-12


@pytest.mark.parametrize("argv", [
    ("theory", "--problem", "primal-min", "--alpha", "2", "--tau", "0.5"),
    ("theory", "--problem", "primal-min", "--alpha", "2"),
    ("theory", "--problem", "dual-max", "--alpha", "2", "--kappa", "0.3"),
    ("simulate", "--problem", "primal-min", "--N", "2", "--alpha", "2", "--tau", "2"),
    ("spectrum", "--N", "5", "--alpha", "2"),
    ("sweep", "--problem", "primal-min", "--N", "50", "--alpha", "2", "--M", "1", "--sweep", "2"),
    ("bogus",),
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_theory_domain_error(capsys):
    code, _, err = run(capsys, "theory", "--problem", "dual-min", "--alpha", "0.8", "--kappa", "2")
    assert code == 3 and "alpha" in err


def test_simulate_primal_min(capsys):
    code, out, _ = run(capsys, "simulate", "--problem", "primal-min", "--N", "1000", "--alpha", "2",
                       "--tau", "2", "--seed", "7")
    doc = json.loads(out)
    assert code == 0
    assert 0.45 <= doc["risk_per_asset"] <= 0.55 and doc["theory"] == pytest.approx(0.5)
    assert "weights" not in doc


def test_simulate_budget_only(capsys):
    code, out, _ = run(capsys, "simulate", "--problem", "budget-only", "--N", "1000", "--alpha", "2",
                       "--seed", "7", "--weights")
    doc = json.loads(out)
    assert code == 0
    assert abs(doc["risk_per_asset"] - 0.5) <= 0.05 and abs(doc["concentration"] - 2.0) <= 0.15
    assert len(doc["weights"]) == 1000


def test_simulate_alpha_below_one(capsys):
    code, _, _ = run(capsys, "simulate", "--problem", "dual-min", "--N", "100", "--alpha", "0.8",
                     "--kappa", "2")
    assert code == 3


def test_simulate_deterministic(capsys):
    argv = ("simulate", "--problem", "dual-max", "--N", "60", "--alpha", "2", "--kappa", "1.5", "--seed", "3")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_spectrum(capsys, tmp_path):
    code, out, err = run(capsys, "spectrum", "--N", "1000", "--alpha", "2", "--bins", "50")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "bin_center,empirical_density,mp_density" and len(lines) == 51
    assert json.loads(err)["l1_distance"] <= 0.05
    code, out, _ = run(capsys, "spectrum", "--N", "1000", "--alpha", "0.5", "--out", str(tmp_path / "h.csv"))
    doc = json.loads(out)
    assert code == 0 and doc["zero_mass"] == pytest.approx(0.5) and (tmp_path / "h.csv").exists()


def test_sweep_flags_and_files(capsys, tmp_path):
    code, out, err = run(capsys, "sweep", "--problem", "primal-min", "--N", "100", "--alpha", "2",
                         "--M", "10", "--sweep", "1.5:2.5:0.5", "--out-dir", str(tmp_path),
                         "--format", "both", "--seed", "5")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["rows"] == 3
    assert len(doc["files"]) == 2
    csv_lines = (tmp_path / f"sweep_primal_min_{doc['digest'][:12]}.csv").read_text().splitlines()
    assert len(csv_lines) == 4
    assert "PASS" in err


def test_sweep_config_file(capsys, tmp_path):
    kv = tmp_path / "c.txt"
    kv.write_text("# small dual sweep\nproblem = dual-max\nN = 80\nalpha = 2\nM = 5\n"
                  "start = 1.5\nstop = 2.0\nstep = 0.5\nseed = 1\n")
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"problem": "dual_max", "N": 80, "alpha": 2.0, "samples_M": 5,
                              "sweep": {"start": 1.5, "stop": 2.0, "step": 0.5}, "master_seed": 1}))
    _, out_kv, _ = run(capsys, "sweep", "--config", str(kv), "--out-dir", str(tmp_path / "a"))
    _, out_js, _ = run(capsys, "sweep", "--config", str(js), "--out-dir", str(tmp_path / "b"))
    a, b = json.loads(out_kv), json.loads(out_js)
    assert a["digest"] == b["digest"]
    fa = (tmp_path / "a").glob("*.csv").__next__().read_bytes()
    fb = (tmp_path / "b").glob("*.csv").__next__().read_bytes()
    assert fa == fb


def test_sweep_missing_fields(capsys, tmp_path):
    assert run(capsys, "sweep", "--N", "50", "--out-dir", str(tmp_path))[0] == 2
    assert run(capsys, "sweep", "--config", str(tmp_path / "nope.json"))[0] == 2


def test_sweep_failing_comparison_exits_one(capsys, tmp_path):
    # z_max = 0 makes every nonzero deviation a failure
    code, out, _ = run(capsys, "sweep", "--problem", "primal-min", "--N", "50", "--alpha", "2", "--M", "4",
                       "--sweep", "2", "--z-max", "0", "--out-dir", str(tmp_path))
    assert code == 1 and not json.loads(out)["passed"]


def test_validate_only(capsys):
    code, out, err = run(capsys, "validate", "--quick", "--only", "quadratic identity")
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and [c["name"] for c in doc["checks"]] == ["quadratic identity"]
    assert run(capsys, "validate", "--only", "no such check")[0] == 2


def test_sweep_bad_problem_in_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "nope", "N": 50, "alpha": 2}))
    assert run(capsys, "sweep", "--config", str(cfg))[0] == 2

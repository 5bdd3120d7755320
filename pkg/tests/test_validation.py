import json
import time

import pytest

from rmt_portfolio import rmt_core, validation
from rmt_portfolio.cli import main


def test_quick_suite_passes_and_is_fast():
    t0 = time.perf_counter()
    results = validation.run_checks(quick=True)
    assert time.perf_counter() - t0 < 120
    names = [r.name for r in results]
    for required in ("quadratic identity", "branch monotonicity", "brute-force equivalence",
                     "primal-dual roundtrip", "inequality case assignment"):
        assert required in names
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_full_suite_includes_statistical_checks():
    names = [n for n, _ in validation.default_checks(quick=False)]
    assert "monte carlo agreement" in names and "spectrum" in names


def _other_root(original):
    # both roots of the quadratic share the product 1/theta; return the wrong one
    def wrong(theta, alpha):
        return 1.0 / (theta * original(theta, alpha))
    return wrong


def test_corrupted_branch_is_named(monkeypatch, capsys):
    monkeypatch.setattr(rmt_core, "stieltjes", _other_root(rmt_core.stieltjes))
    res = validation.check_quadratic_identity(probes=50)
    assert not res.passed
    code = main(["validate", "--quick", "--only", "quadratic identity"])
    out, err = capsys.readouterr()
    assert code == 1
    assert json.loads(out)["failing"] == ["quadratic identity"]
    assert "quadratic identity" in err


def test_crashing_check_reports_failure(monkeypatch):
    def boom():
        raise RuntimeError("broken")
    monkeypatch.setattr(validation, "default_checks", lambda quick, mode: [("boom", boom)])
    [res] = validation.run_checks()
    assert not res.passed and "RuntimeError" in res.detail


def test_paper_literal_mode_disagrees_with_samples():
    kkt = validation.check_inequality_cases(N=200, M=20, mode="kkt")
    literal = validation.check_inequality_cases(N=200, M=20, mode="paper-literal")
    assert kkt.passed and not literal.passed

import math

import numpy as np
import pytest

import tailport


def test_version():
    assert tailport.__version__


def test_bandwidth_rule():
    assert tailport.default_k(2000) == math.floor(0.11 * 2000**0.99)


def test_statistics_on_iid_noise():
    rng = np.random.default_rng(3)
    e = rng.standard_normal(2000)
    p = tailport.portmanteau_p(e)
    f = tailport.functional_f(e)
    assert p["kind"] == "pointwise_P" and f["kind"] == "functional_F"
    assert p["k"] == tailport.default_k(2000)
    assert p["statistic"] >= 0 and f["statistic"] >= 0
    assert sum(p["per_lag_contribution"]) == pytest.approx(p["statistic"])
    assert 0.0 <= p["p_value"] <= 1.0
    lam = tailport.tail_copula_lags(e, D=3)
    assert len(lam) == 3


def test_rank_invariance():
    rng = np.random.default_rng(4)
    e = np.abs(rng.standard_t(4, 800))
    a = tailport.portmanteau_p(e)["statistic"]
    b = tailport.portmanteau_p(np.exp(e))["statistic"]
    assert a == b


def test_chi2_and_critical_values():
    assert tailport.chi2_quantile(0.95, 1) == pytest.approx(3.8415, abs=1e-3)
    assert tailport.chi2_cdf(tailport.chi2_quantile(0.3, 4), 4) == pytest.approx(0.3)
    assert tailport.critical_value(5, 0.05) == 5.636


def test_limit_simulation_is_seeded():
    a = tailport.simulate_limit(1, reps=1000, grid_points=1000, seed=5)
    b = tailport.simulate_limit(1, reps=1000, grid_points=1000, seed=5)
    assert a == b and len(a) == 1000
    with pytest.raises(tailport.DomainError):
        tailport.simulate_limit(1, reps=10)


def test_fit_and_diagnostics():
    y = tailport.simulate_garch(3000, seed=2)
    fit = tailport.qml_fit(y)
    assert fit.converged
    assert fit.names == ["omega", "alpha", "beta"]
    assert abs(fit.params[2] - 0.85) < 0.1
    res = fit.residuals()
    assert len(res) == 3000 - fit.burn_in
    lb = tailport.ljung_box(res, 5)
    assert 0.0 <= lb["p_value"] <= 1.0


def test_backtest_report():
    y = tailport.simulate_garch(1500, seed=3)
    rep = tailport.backtest(y, theta=0.05)
    assert rep["var"]["out_of_sample"] == 300
    assert rep["dq"]["df"] == 6


def test_errors_are_typed():
    with pytest.raises(tailport.DataError):
        tailport.qml_fit([0.1] * 20)
    with pytest.raises(tailport.TailportError):
        tailport.portmanteau_p([1.0, 2.0, 3.0], D=5)


def test_small_experiment():
    table = tailport.run_experiment("design = iid_student_t\nn = 500\nreps = 20\nseed = 3\n")
    assert table["reps"] == 20
    assert any(c["test"] == "P" for c in table["cells"])

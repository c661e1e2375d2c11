"""Tail-copula portmanteau tests for standardized residuals of volatility models."""

import json as _json

from . import _core
from ._core import (
    CapacityError,
    DataError,
    DegenerateData,
    DomainError,
    FitFailed,
    FitResult,
    InvalidBandwidth,
    InvalidLag,
    ParseError,
    TailportError,
    chi2_cdf,
    chi2_quantile,
    critical_value,
    default_k,
    ljung_box,
    qml_fit,
    simulate_garch,
    simulate_limit,
    tail_copula_lags,
)

__version__ = _core.__version__


def _floats(values):
    return [float(v) for v in values]


def portmanteau_p(residuals, D=5, k=None, rho=0.11, x=1.0, y=1.0):
    """Pointwise statistic with chi-square reference; returns the report as a dict."""
    return _json.loads(_core.portmanteau_p(_floats(residuals), D, k, rho, x, y))


def functional_f(residuals, D=5, k=None, rho=0.11, iota=0.1):
    """Functional statistic with bridge-integral reference; returns the report as a dict."""
    return _json.loads(_core.functional_f(_floats(residuals), D, k, rho, iota))


def backtest(y, model="garch11", delta=1.0, split=0.8, theta=0.01, dq_lags=4):
    """Fit on the first `split` share, forecast VaR out of sample, run the DQ test."""
    return _json.loads(_core.backtest(_floats(y), model, delta, split, theta, dq_lags))


def run_experiment(config_text):
    """Run a Monte Carlo experiment from key = value text; returns the rejection table."""
    return _json.loads(_core.run_experiment(config_text))


__all__ = [name for name in dir() if not name.startswith("_")]

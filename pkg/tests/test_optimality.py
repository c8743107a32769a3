import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, stats

from scaledmt.core import DomainError
from scaledmt.optimality import (
    ModelCase,
    figure1_data,
    lambda_of_delta,
    model_gain,
    optimal_cv,
    peak_lambda,
)


def test_optimal_cv_examples():
    assert optimal_cv(3.0, 1.0) == 1.5
    assert optimal_cv(1.644854, 3.868132) == pytest.approx(1.644854, abs=1e-6)
    grid = np.arange(0.5, 4.0, 0.001)
    k = np.argmin([optimal_cv(d, math.e**2) for d in grid])
    assert grid[k] == pytest.approx(2.0, abs=1e-3)


@given(st.floats(0.1, 6), st.floats(1, 200))
def test_optimal_cv_minimizes_cost(delta, lam):
    res = optimize.minimize_scalar(
        lambda c: model_gain(delta, lam, c), bounds=(-10, 40), method="bounded",
        options={"xatol": 1e-10},
    )
    cv = optimal_cv(delta, lam)
    assert model_gain(delta, lam, cv) <= res.fun + 1e-12


def test_model_gain_examples():
    for cv in (-2.0, 0.0, 1.3, 5.0):
        assert model_gain(0.0, 1.0, cv) == 0.0
    assert abs(model_gain(2.0, 10.0, 60.0)) < 1e-300
    cv = optimal_cv(2.0, 5.0)
    h = 1e-5
    deriv = (model_gain(2.0, 5.0, cv + h) - model_gain(2.0, 5.0, cv - h)) / (2 * h)
    assert abs(deriv) < 1e-8


def test_lambda_peaks():
    grid = np.linspace(0.01, 6, 600_001)
    assert lambda_of_delta(grid, 0.05).max() == pytest.approx(3.868132, abs=1e-5)
    assert lambda_of_delta(grid, 0.01).max() == pytest.approx(14.96849, abs=1e-4)
    assert peak_lambda(0.05) == pytest.approx(3.868132, abs=1e-6)
    assert peak_lambda(0.01) == pytest.approx(14.96849, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
def test_lambda_is_one_at_twice_the_critical_value(alpha):
    assert lambda_of_delta(2 * stats.norm.isf(alpha), alpha) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.05, 6), st.floats(1e-4, 0.3))
def test_lambda_inverts_optimal_cv(delta, alpha):
    lam = lambda_of_delta(delta, alpha)
    if lam >= 1:
        assert optimal_cv(delta, lam) == pytest.approx(stats.norm.isf(alpha), rel=1e-9)


def test_figure1_table():
    deltas = np.round(np.arange(0.1, 5.0 + 1e-9, 0.01), 10)
    tab = figure1_data([0.01, 0.05], deltas)
    assert tab.shape == (2 * 491,)
    h = 0.01
    for a in (0.01, 0.05):
        curve = tab[tab["alpha"] == a]
        peak = math.exp(stats.norm.isf(a) ** 2 / 2)
        # log lambda has curvature -1, so a grid of step h misses the peak
        # by at most peak * (h/2)^2 / 2
        assert 0 <= peak - curve["lam"].max() <= peak * h * h / 8 + 1e-12
        assert peak_lambda(a) == pytest.approx(peak, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.01, 0.05])
def test_lambda_curve_log_symmetry(alpha):
    z = stats.norm.isf(alpha)
    f = lambda d: lambda_of_delta(d, alpha) - 2.0  # noqa: E731
    d1 = optimize.brentq(f, 1e-6, z, xtol=1e-14)
    d2 = optimize.brentq(f, z, 3 * z, xtol=1e-14)
    assert lambda_of_delta(d1, alpha) == pytest.approx(lambda_of_delta(d2, alpha), abs=1e-10)
    assert d1 + d2 == pytest.approx(2 * z, abs=1e-10)


def test_validation():
    with pytest.raises(DomainError):
        optimal_cv(0.0, 2.0)
    with pytest.raises(DomainError):
        optimal_cv(1.0, 0.5)
    with pytest.raises(DomainError):
        lambda_of_delta(1.0, 1.5)
    with pytest.raises(DomainError):
        figure1_data([0.05], [0.0, 1.0])
    assert ModelCase(3.0, 1.0).optimal_cv == 1.5
    with pytest.raises(DomainError):
        ModelCase(1.0, 2.0, alpha=2.0)

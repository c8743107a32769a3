"""Two-test model case: one null N(0, 1) statistic, one alternative N(delta, 1).

Both tests reject above a common critical value cv, so V and T are
independent Bernoulli variables with success probabilities Phi(-cv) and
Phi(delta - cv).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import DomainError


@dataclass(frozen=True)
class ModelCase:
    delta: float
    lam: float
    alpha: float | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be > 0, got {self.delta!r}")
        if not self.lam >= 1:
            raise DomainError(f"lambda must be >= 1, got {self.lam!r}")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def optimal_cv(self) -> float:
        return optimal_cv(self.delta, self.lam)


def optimal_cv(delta: float, lam: float) -> float:
    """Critical value minimizing lam * Phi(-cv) - Phi(delta - cv).

    Equals log(lam) / delta + delta / 2.
    """
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta!r}")
    if not lam >= 1:
        raise DomainError(f"lambda must be >= 1, got {lam!r}")
    return math.log(lam) / delta + delta / 2.0


def model_gain(delta, lam, cv):
    """The criterion lam * P(false rejection) - P(true rejection).

    Despite the name this is the cost; the gain is its negative.
    """
    return lam * stats.norm.cdf(-np.asarray(cv)) - stats.norm.cdf(
        np.asarray(delta) - np.asarray(cv)
    )


def lambda_of_delta(delta, alpha: float):
    """Price of a false positive implied by a level-alpha test at effect delta.

    exp(delta * (z_{1-alpha} - delta / 2)).
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    z = stats.norm.isf(alpha)
    d = np.asarray(delta, dtype=float)
    out = np.exp(d * (z - d / 2.0))
    return float(out) if out.ndim == 0 else out


def peak_lambda(alpha: float) -> float:
    """max over delta of lambda_of_delta, reached at delta = z_{1-alpha}."""
    z = stats.norm.isf(alpha)
    return math.exp(z * z / 2.0)


def figure1_data(alphas, deltas) -> np.ndarray:
    """Rows (alpha, delta, lambda) for every alpha and every delta on the grid.

    Returns a structured array with fields ``alpha``, ``delta``, ``lam``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if np.any(deltas <= 0):
        raise DomainError("delta grid must be positive")
    out = np.empty(alphas.size * deltas.size, dtype=[("alpha", float), ("delta", float), ("lam", float)])
    for k, a in enumerate(alphas):
        rows = slice(k * deltas.size, (k + 1) * deltas.size)
        out["alpha"][rows] = a
        out["delta"][rows] = deltas
        out["lam"][rows] = lambda_of_delta(deltas, a)
    return out

"""Two-component Gaussian mixture fit for z-scores.

The null component is pinned at N(0, 1) and the alternative is N(delta, 1)
with delta >= 0, so only the null proportion pi0 and the shift delta are
estimated.  The fitted values feed the asymptotic gamma solver.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .asymptotic import AsymptoticProblem, GammaSolution, optimal_gamma
from .core import DomainError, NoSolutionError, gaussian_shift_cdf

log = logging.getLogger(__name__)

DEFAULT_STARTS = tuple(itertools.product((0.5, 0.8, 0.95), (1.0, 2.0, 4.0)))
FALLBACK_GAMMA = 0.5
# likelihood-ratio statistic against pi0 = 1 below which the fit is called degenerate
DEGENERACY_LR = 13.8


@dataclass
class EmFit:
    pi0: float
    delta: float
    loglik: np.ndarray = field(repr=False)
    iterations: int = 0
    converged: bool = False
    degenerate: bool = False

    @property
    def final_loglik(self) -> float:
        return float(self.loglik[-1])

    def m0(self, m: int) -> int:
        return int(round(m * self.pi0))


def pvalues_to_z(p):
    """z = Phi^{-1}(1 - p), the one-sided test statistic behind each p-value."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise DomainError("p-values must lie in [0, 1]")
    return stats.norm.isf(np.clip(p, 1e-300, 1.0))


def _loglik_terms(z, pi0, delta):
    a = np.log(pi0) + stats.norm.logpdf(z) if pi0 > 0 else np.full_like(z, -np.inf)
    b = np.log1p(-pi0) + stats.norm.logpdf(z - delta) if pi0 < 1 else np.full_like(z, -np.inf)
    return a, b


def _em_single(z, pi0, delta, tol, max_iter):
    trace = []
    converged = False
    for it in range(1, max_iter + 1):
        a, b = _loglik_terms(z, pi0, delta)
        tot = np.logaddexp(a, b)
        trace.append(float(np.sum(tot)))
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        r = np.exp(a - tot)  # null responsibilities
        w = 1.0 - r
        pi0 = float(np.mean(r))
        sw = w.sum()
        delta = max(0.0, float(np.dot(w, z) / sw)) if sw > 0 else 0.0
    if not converged:
        # record the likelihood of the parameters actually returned
        trace.append(float(np.sum(np.logaddexp(*_loglik_terms(z, pi0, delta)))))
    return pi0, delta, np.asarray(trace), it, converged


def em_fit(
    zscores,
    init=None,
    tol: float = 1e-8,
    max_iter: int = 2000,
    starts=DEFAULT_STARTS,
) -> EmFit:
    """Fit pi0 and delta by EM.

    Parameters
    ----------
    zscores : array_like
        At least 10 test statistics.
    init : (pi0, delta), optional
        Single starting point.  When omitted, every pair in ``starts`` is
        tried and the fit with the highest log-likelihood is kept.
    tol : float
        Stop once the log-likelihood improves by less than ``tol``.

    Returns
    -------
    EmFit
        With ``degenerate=True`` (pi0 = 1, delta = nan) when the data show
        no evidence of an alternative component.
    """
    z = np.asarray(zscores, dtype=float)
    if z.ndim != 1 or z.size < 10:
        raise DomainError("need at least 10 z-scores")
    if not np.all(np.isfinite(z)):
        raise DomainError("z-scores must be finite")
    if init is not None:
        pi0, delta = init
        if not (0 < pi0 < 1 and delta > 0):
            raise DomainError("init needs pi0 in (0, 1) and delta > 0")
        starts = [tuple(init)]
    best = None
    for pi0, delta in starts:
        fit = _em_single(z, float(pi0), float(delta), tol, max_iter)
        if best is None or fit[2][-1] > best[2][-1]:
            best = fit
    pi0, delta, trace, iters, converged = best
    null_ll = float(np.sum(stats.norm.logpdf(z)))
    degenerate = 2.0 * (trace[-1] - null_ll) < DEGENERACY_LR or pi0 >= 1.0
    if degenerate:
        return EmFit(1.0, float("nan"), trace, iters, converged, True)
    return EmFit(pi0, delta, trace, iters, converged, False)


@dataclass
class EstimatedGamma:
    gamma: float
    fit: EmFit
    solution: GammaSolution | None
    fallback: bool


def estimated_optimal_gamma(
    alpha: float,
    lam: float,
    pvalues=None,
    zscores=None,
    **solver_kw,
) -> EstimatedGamma:
    """Plug-in optimal gamma with (m0, delta) estimated by :func:`em_fit`.

    Falls back to gamma = 0.5 (flagged) when the fit is degenerate or the
    solver finds no solution for the fitted parameters.
    """
    if (pvalues is None) == (zscores is None):
        raise DomainError("give exactly one of pvalues or zscores")
    z = pvalues_to_z(pvalues) if zscores is None else np.asarray(zscores, dtype=float)
    fit = em_fit(z)
    m = z.size
    m0 = fit.m0(m)
    if fit.degenerate or not 1 <= m0 <= m - 1 or not fit.delta > 0:
        log.warning("EM fit is degenerate; falling back to gamma=%.1f", FALLBACK_GAMMA)
        return EstimatedGamma(FALLBACK_GAMMA, fit, None, True)
    problem = AsymptoticProblem(m, m0, alpha, lam, gaussian_shift_cdf(fit.delta))
    try:
        sol = optimal_gamma(problem, **solver_kw)
    except NoSolutionError:
        log.warning("no solution for fitted parameters; falling back to gamma=%.1f", FALLBACK_GAMMA)
        return EstimatedGamma(FALLBACK_GAMMA, fit, None, True)
    return EstimatedGamma(sol.gamma, fit, sol, False)


def log_likelihood(z, pi0, delta) -> float:
    a, b = _loglik_terms(np.asarray(z, dtype=float), pi0, delta)
    return float(np.sum(special.logsumexp(np.vstack([a, b]), axis=0)))

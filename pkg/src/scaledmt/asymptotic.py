"""Large-m approximations for scaled step-up procedures.

For m tests with m0 true nulls and alternative p-value cdf F, the
procedure with scaling s behaves for large m like a single cut-off u*
solving

    s^{-1}(u m0 / alpha) = m0 u + (m - m0) F(u).

For the power family s(r) = r^gamma this module also provides the loss
approximation in terms of v = u* m0 / alpha, the delta-method expansion of
E[V / R^gamma], and the stationarity system used to pick gamma for a
given price lambda.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .core import DomainError, NoSolutionError, ScalingFunction, gaussian_shift_cdf

log = logging.getLogger(__name__)

GAMMA_MIN = 0.05


@dataclass(frozen=True)
class AsymptoticProblem:
    """m tests, m0 of them null, alternative p-value cdf ``F``."""

    m: int
    m0: int
    alpha: float
    lam: float
    F: Callable = field(repr=False)
    scaling: Optional[ScalingFunction] = None
    s_inverse: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if not 1 <= self.m0 <= self.m - 1:
            raise DomainError("need 1 <= m0 <= m - 1")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.lam >= 1:
            raise DomainError(f"lambda must be >= 1, got {self.lam!r}")

    @classmethod
    def gaussian(cls, m, m0, delta, alpha=0.05, lam=1.0, gamma=None):
        s = None if gamma is None else ScalingFunction.power(gamma)
        return cls(m, m0, alpha, lam, gaussian_shift_cdf(delta), s)

    @property
    def m1(self) -> int:
        return self.m - self.m0

    def with_gamma(self, gamma: float) -> "AsymptoticProblem":
        return replace(self, scaling=ScalingFunction.power(gamma), s_inverse=None)

    def inverse(self, v):
        if self.s_inverse is not None:
            return self.s_inverse(v)
        if self.scaling is None:
            raise DomainError("problem has no scaling function")
        return self.scaling.inverse(v)

    @property
    def upper(self) -> float:
        """alpha s(m) / m, the largest threshold of the procedure."""
        if self.scaling is None:
            raise DomainError("problem has no scaling function")
        return min(1.0, self.alpha * float(self.scaling(self.m)) / self.m)


def ustar_residual(problem: AsymptoticProblem, u):
    u = np.asarray(u, dtype=float)
    return (
        problem.inverse(u * problem.m0 / problem.alpha)
        - problem.m0 * u
        - problem.m1 * np.asarray(problem.F(u), dtype=float)
    )


def ustar_roots(problem: AsymptoticProblem, grid_size: int = 10_000) -> np.ndarray:
    """All roots of the cut-off equation found by a log-grid scan on (0, upper]."""
    hi = problem.upper
    grid = np.geomspace(hi * 1e-12, hi, grid_size)
    h = ustar_residual(problem, grid)
    sgn = np.sign(h)
    roots = []
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append(
            optimize.brentq(
                lambda u: float(ustar_residual(problem, u)),
                grid[i],
                grid[i + 1],
                xtol=1e-300,
                rtol=4 * np.finfo(float).eps,
                maxiter=500,
            )
        )
    roots.extend(grid[h == 0].tolist())
    return np.unique(roots)


def ustar(problem: AsymptoticProblem, grid_size: int = 10_000, quiet: bool = False) -> float:
    """Asymptotic rejection cut-off u*; the largest root of the cut-off equation.

    Returns 0.0, with a warning logged (a debug message when ``quiet``),
    when the residual never changes sign on the bracket.
    """
    roots = ustar_roots(problem, grid_size)
    if roots.size == 0:
        (log.debug if quiet else log.warning)("no sign change for u* on (0, %.3g]; returning 0", problem.upper)
        return 0.0
    if roots.size > 1:
        log.warning("cut-off equation has %d roots; using the largest", roots.size)
    return float(roots[-1])


def _v(problem, u):
    return u * problem.m0 / problem.alpha


def asymptotic_loss(problem: AsymptoticProblem, u: float) -> float:
    """(lam - 1) alpha v - s^{-1}(v) with v = u m0 / alpha.

    For the Bonferroni member (constant scaling or gamma = 0) s has no
    inverse and the exact expected loss of per-test thresholding at
    alpha / m is returned instead.
    """
    s = problem.scaling
    if s is not None and (s.kind == "constant" or (s.kind == "power" and s.gamma == 0)):
        return bonferroni_loss(problem)
    v = _v(problem, u)
    return float((problem.lam - 1.0) * problem.alpha * v - problem.inverse(v))


def expected_loss_at(problem: AsymptoticProblem, u: float) -> float:
    """lam E[V] - E[T] for per-test thresholding of all m p-values at u."""
    return float(problem.lam * problem.m0 * u - problem.m1 * problem.F(u))


def bonferroni_loss(problem: AsymptoticProblem) -> float:
    return expected_loss_at(problem, problem.alpha / problem.m)


def _check_p(p0, p1, m0, m1):
    if not (0 < p0 <= 1 and 0 < p1 <= 1):
        raise DomainError("p0 and p1 must lie in (0, 1]")
    if m0 * p0 + m1 * p1 <= 0:
        raise DomainError("m0 p0 + m1 p1 must be positive")


def sev_delta_approx(m0, m1, p0, p1, gamma) -> float:
    """First-order delta-method value of E[V / R^gamma]: m0 p0 / (m0 p0 + m1 p1)^gamma."""
    _check_p(p0, p1, m0, m1)
    mu_v, mu_t = m0 * p0, m1 * p1
    return mu_v / (mu_v + mu_t) ** gamma


def sev_delta_variance(m0, m1, p0, p1, gamma) -> float:
    """Delta-method variance of V / R^gamma with V, T independent binomials."""
    _check_p(p0, p1, m0, m1)
    mu_v, mu_t = m0 * p0, m1 * p1
    tot = mu_v + mu_t
    dv = ((1.0 - gamma) * mu_v + mu_t) / tot ** (gamma + 1.0)
    dt = -gamma * mu_v / tot ** (gamma + 1.0)
    return dv * dv * m0 * p0 * (1.0 - p0) + dt * dt * m1 * p1 * (1.0 - p1)


@dataclass
class GammaSolution:
    """Outcome of :func:`optimal_gamma`.

    ``mode`` is one of

    ``"loss-minimum"``
        gamma minimizes the asymptotic expected loss on [gamma_min, 1];
    ``"bonferroni"``
        the exact loss of Bonferroni (gamma = 0) beats every gamma >= gamma_min;
    ``"stationary"``
        both equations of the stationarity system hold;
    ``"boundary"``
        the stationarity system has no root and the better end point of
        [gamma_min, 1] was returned.
    """

    gamma: float
    u: float
    mode: str
    residual_cutoff: float
    residual_stationarity: float
    loss: float
    message: str = ""

    @property
    def flagged(self) -> bool:
        return self.mode in ("boundary", "bonferroni")


def stationarity_residual(problem: AsymptoticProblem, gamma: float, u: float) -> float:
    """-log(v) v^{1/gamma} / gamma^2 - (lam - 1) alpha at v = u m0 / alpha."""
    v = _v(problem, u)
    if v <= 0:
        return -(problem.lam - 1.0) * problem.alpha
    return -math.log(v) * v ** (1.0 / gamma) / gamma**2 - (problem.lam - 1.0) * problem.alpha


def effective_cutoff(problem: AsymptoticProblem) -> float:
    """u* floored at alpha / m0, the cut-off at which s(R v 1) = s(1) = 1.

    Below the floor the root of the cut-off equation has fewer than one
    expected rejection and s^{-1} is evaluated outside the range of s.
    """
    return max(ustar(problem, quiet=True), problem.alpha / problem.m0)


def _check_feasible(problem, us):
    if np.all(us <= 0):
        raise NoSolutionError("u* = 0 for every gamma: the problem is infeasible")
    # alternatives that are never more likely to fall below a threshold
    # than nulls carry no signal (e.g. delta = 0)
    u = np.geomspace(problem.alpha * 1e-12, problem.alpha, 2001)
    if np.all(np.asarray(problem.F(u), dtype=float) <= u * (1 + 1e-9)):
        raise NoSolutionError(
            "alternative cdf F(u) <= u on (0, alpha]: no detectable signal, "
            "the problem is infeasible"
        )


def _cutoff_residual(problem, u):
    if u <= problem.alpha / problem.m0 * (1 + 1e-12) and ustar_residual(problem, u) > 0:
        return 0.0  # floored: R <= 1, the equation holds with s(R v 1) = 1
    return float(ustar_residual(problem, u))


def _solution(problem, g, u, mode, loss, message=""):
    p = problem.with_gamma(g) if g > 0 else problem
    return GammaSolution(
        gamma=float(g),
        u=float(u),
        mode=mode,
        residual_cutoff=_cutoff_residual(p, u) if g > 0 else 0.0,
        residual_stationarity=float(stationarity_residual(problem, g, u)) if g > 0 else float("nan"),
        loss=float(loss),
        message=message,
    )


def optimal_gamma(
    problem: AsymptoticProblem,
    gamma_min: float = GAMMA_MIN,
    grid_size: int = 96,
    gamma_tol: float = 1e-6,
    method: str = "loss",
) -> GammaSolution:
    """Asymptotically optimal exponent gamma of the power scaling family.

    With ``method="loss"`` (default) gamma minimizes the asymptotic
    expected loss lam m0 u - (m - m0) F(u) along the curve u = u*(gamma)
    on [gamma_min, 1], refined by bounded scalar minimization; Bonferroni
    (gamma = 0) is then compared through its exact expected loss.  Ties go
    to the smaller gamma.

    With ``method="system"`` the stationarity system is solved directly,
    see :func:`solve_stationarity_system`.

    Raises
    ------
    NoSolutionError
        if u* = 0 for every gamma, or if F(u) <= u on (0, alpha] so the
        alternatives carry no signal (e.g. delta = 0).
    """
    if not 0 < gamma_min < 1:
        raise DomainError("gamma_min must lie in (0, 1)")
    if method == "system":
        return solve_stationarity_system(problem, gamma_min, grid_size, gamma_tol)
    if method != "loss":
        raise DomainError(f"unknown method {method!r}")

    gammas = np.linspace(gamma_min, 1.0, grid_size)
    raw = np.array([ustar(problem.with_gamma(g), quiet=True) for g in gammas])
    floor = problem.alpha / problem.m0
    _check_feasible(problem, raw)
    us = np.maximum(raw, floor)
    losses = np.array([expected_loss_at(problem, u) for u in us])
    k = int(np.argmin(losses))
    g_best, u_best, loss_best = gammas[k], us[k], losses[k]
    lo, hi = gammas[max(k - 1, 0)], gammas[min(k + 1, grid_size - 1)]
    if hi > lo:
        def f(g):
            return expected_loss_at(problem, effective_cutoff(problem.with_gamma(g)))

        opt = optimize.minimize_scalar(
            f, bounds=(lo, hi), method="bounded", options={"xatol": gamma_tol}
        )
        if opt.fun < loss_best - 1e-12 * max(1.0, abs(loss_best)):
            g_best, loss_best = float(opt.x), float(opt.fun)
            u_best = effective_cutoff(problem.with_gamma(g_best))

    bonf = bonferroni_loss(problem)
    if bonf < loss_best:
        return _solution(
            problem, 0.0, problem.alpha / problem.m, "bonferroni", bonf,
            "Bonferroni has a smaller expected loss than any gamma >= gamma_min",
        )
    return _solution(problem, g_best, u_best, "loss-minimum", loss_best)


def solve_stationarity_system(
    problem: AsymptoticProblem,
    gamma_min: float = GAMMA_MIN,
    grid_size: int = 96,
    gamma_tol: float = 1e-6,
) -> GammaSolution:
    """Solve the cut-off equation jointly with the stationarity equation

        -log(v) v^{1/gamma} / gamma^2 = (lam - 1) alpha,  v = u* m0 / alpha.

    Scans gamma on [gamma_min, 1] with an inner u* solve and refines sign
    changes of the stationarity residual by bisection.  Among several roots
    the one with the smallest :func:`asymptotic_loss` wins.  Without a root,
    the end point with the smaller :func:`asymptotic_loss` is returned with
    ``mode="boundary"``.  The left-hand side is negative whenever v > 1,
    so roots exist only when fewer than one rejection is expected.
    """
    gammas = np.linspace(gamma_min, 1.0, grid_size)
    us = np.array([ustar(problem.with_gamma(g), quiet=True) for g in gammas])
    _check_feasible(problem, us)
    res = np.array(
        [stationarity_residual(problem, g, u) if u > 0 else np.nan for g, u in zip(gammas, us)]
    )

    def resid(g):
        return stationarity_residual(problem, g, ustar(problem.with_gamma(g), quiet=True))

    roots = []
    ok = np.isfinite(res)
    for i in range(grid_size - 1):
        if ok[i] and ok[i + 1] and res[i] * res[i + 1] < 0:
            roots.append(optimize.brentq(resid, gammas[i], gammas[i + 1], xtol=gamma_tol * 1e-3))
        elif ok[i] and res[i] == 0:
            roots.append(gammas[i])

    if roots:
        best = None
        for g in roots:
            p = problem.with_gamma(g)
            u = ustar(p)
            cand = (asymptotic_loss(p, u), g, u)
            if best is None or cand[0] < best[0]:
                best = cand
        loss, g, u = best
        return _solution(problem, g, u, "stationary", loss)

    ends = []
    for g, u in ((gammas[0], us[0]), (gammas[-1], us[-1])):
        if u > 0:
            ends.append((asymptotic_loss(problem.with_gamma(g), u), g, u))
    loss, g, u = min(ends)
    return _solution(
        problem, g, u, "boundary", loss,
        "stationarity equation has no root on the gamma interval",
    )

"""Exact finite-m distribution theory of step-up procedures.

Everything is computed under the unconditional independent model: each of
the m p-values is drawn independently from G = pi0 F0 + (1 - pi0) F1.
The basic building block is the joint order-statistic probability

    psi(t_1..t_r) = P(U_(1) <= t_1, ..., U_(r) <= t_r)

for r i.i.d. uniforms, from which the law of the number of rejections R,
the distribution and moments of the scaled false discovery proportion
V / s(R v 1), its expectation and the power all follow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special, stats

from .core import (
    ContractError,
    DomainError,
    MixtureModel,
    ScalingFunction,
    UndefinedError,
    build_thresholds,
    eval_scaling,
    mixture_cdf,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactSettings:
    """Numerical controls for the combinatorial recursions.

    backend : {"float", "mpmath"}
        ``"mpmath"`` runs the order-statistic recursion in extended precision
        and serves as the referee for the float path.
    compensated_summation : bool
        Add up the final series with :func:`math.fsum` (exactly rounded)
        instead of plain pairwise summation.
    """

    backend: str = "float"
    max_m_standard: int = 500
    compensated_summation: bool = True
    mp_dps: int = 50
    mp_max_m: int = 64
    floor_nudge: float = 1e-12

    def __post_init__(self):
        if self.backend not in ("float", "mpmath"):
            raise DomainError(f"unknown backend {self.backend!r}")


DEFAULT_SETTINGS = ExactSettings()


def _total(values, settings: ExactSettings) -> float:
    values = np.asarray(values, dtype=float)
    return math.fsum(values.tolist()) if settings.compensated_summation else float(values.sum())


def _as_probability_vector(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1:
        raise ContractError("threshold vector must be 1-d")
    if t.size and (np.any(np.isnan(t)) or t[0] < 0 or t[-1] > 1):
        raise ContractError("thresholds must lie in [0, 1]")
    if np.any(np.diff(t) < 0):
        raise ContractError("thresholds must be nondecreasing")
    return t


@lru_cache(maxsize=8)
def _log_factorials(n: int) -> np.ndarray:
    return special.gammaln(np.arange(n + 2, dtype=float))


def _binomial_step(state: np.ndarray, n: int, p: float, lo: int = 0) -> np.ndarray:
    """One transition of a counting chain: s -> s + Binomial(n - s, p).

    ``state[s]`` is the probability of count s; entries below ``lo`` are
    known to be zero and are skipped.
    """
    src = np.arange(lo, n + 1)
    mass = state[lo:]
    keep = mass > 0
    src, mass = src[keep], mass[keep]
    out = np.zeros(n + 1)
    if src.size == 0:
        return out
    if p <= 0.0:
        out[src] = mass
        return out
    if p >= 1.0:
        out[n] = math.fsum(mass.tolist())
        return out
    # log pmf of a jump j from src, built from log factorials
    lf = _log_factorials(n)
    base = src[0]
    jumps = np.arange(base, n + 1)[None, :] - src[:, None]
    trials = (n - src)[:, None]
    valid = (jumps >= 0) & (jumps <= trials)
    j = np.where(valid, jumps, 0)
    logpmf = (
        lf[trials + 1] - lf[j + 1] - lf[trials - j + 1]
        + j * math.log(p) + (trials - j) * math.log1p(-p)
    )
    trans = np.where(valid, np.exp(logpmf), 0.0)
    out[base:] = mass @ trans
    return out


def _psi_dp(t: np.ndarray) -> float:
    # N(t_i) = number of uniforms <= t_i must reach i for every i
    n = t.size
    state = np.zeros(n + 1)
    state[0] = 1.0
    prev = 0.0
    for i, ti in enumerate(t, start=1):
        p = 0.0 if prev >= 1.0 else (ti - prev) / (1.0 - prev)
        state = _binomial_step(state, n, p, lo=i - 1)
        state[:i] = 0.0
        prev = ti
    return float(math.fsum(state.tolist()))


def _dsu_dp(t: np.ndarray) -> np.ndarray:
    # scan thresholds downwards; the state is the number of uniforms above t_i
    m = t.size
    out = np.zeros(m + 1)
    state = np.zeros(m + 1)
    state[0] = 1.0
    upper = 1.0
    for i in range(m, 0, -1):
        ti = t[i - 1]
        p = 0.0 if upper <= 0.0 else (upper - ti) / upper
        state = _binomial_step(state, m, p, lo=m - i)
        out[i] = state[m - i]  # exactly i values at or below t_i: R = i
        state[: m - i + 1] = 0.0
        upper = ti
    out[0] = state[m]
    return out


def _mp_digits(n: int, settings: ExactSettings) -> int:
    # the recursion loses up to log10(2) digits per order statistic
    return max(settings.mp_dps, 30 + math.ceil(0.31 * n))


def _psi_prefixes_mp(t: np.ndarray, dps: int) -> list:
    # psi_k = 1 - sum_{j<k} C(k, j) psi_j (1 - t_{j+1})^{k-j}
    with mpmath.workdps(dps):
        tm = [mpmath.mpf(float(x)) for x in t]
        out = [mpmath.mpf(1)]
        for k in range(1, len(tm) + 1):
            acc = mpmath.fsum(
                mpmath.binomial(k, j) * out[j] * (1 - tm[j]) ** (k - j)
                for j in range(k)
            )
            out.append(1 - acc)
        return out


def psi_prefixes(t, settings: ExactSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """psi of every prefix: entry k is psi(t_1..t_k), k = 0..len(t).

    Always evaluated with the first-crossing recursion in extended
    precision; cost is O(n^2) multiprecision operations.
    """
    t = _as_probability_vector(t)
    vals = _psi_prefixes_mp(t, _mp_digits(t.size, settings))
    return np.clip(np.array([float(x) for x in vals]), 0.0, 1.0)


def psi(t, settings: ExactSettings = DEFAULT_SETTINGS) -> float:
    """P(U_(1) <= t_1, ..., U_(r) <= t_r) for r i.i.d. uniforms; 1 when r = 0."""
    t = _as_probability_vector(t)
    if t.size == 0:
        return 1.0
    if settings.backend == "mpmath":
        _check_mp_size(t.size, settings)
        return float(_psi_prefixes_mp(t, _mp_digits(t.size, settings))[-1])
    return min(1.0, max(0.0, _psi_dp(t)))


def _check_mp_size(n, settings):
    if n > settings.mp_max_m:
        raise DomainError(f"mpmath backend is capped at {settings.mp_max_m} thresholds")


def _log_binom(n, k):
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


def dsu_pmf(t, settings: ExactSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """D^SU_m(t, r) for r = 0..m.

    D(r) = C(m, r) t_r^r psi(1 - t_m, ..., 1 - t_{r+1}), with t_0^0 = 1.
    It is the law of the number of step-up rejections when the p-values
    are i.i.d. uniform and the thresholds are ``t``.  The float backend
    evaluates that law with a binomial counting chain whose terms are all
    nonnegative; the mpmath backend evaluates the closed form literally.
    """
    t = _as_probability_vector(t)
    if t.size == 0:
        return np.ones(1)
    if settings.backend == "mpmath":
        return _dsu_mp(t, settings)
    if t.size > settings.max_m_standard:
        log.debug("dsu at m=%d: O(m^3) work", t.size)
    return np.clip(_dsu_dp(t), 0.0, 1.0)


def _dsu_mp(t: np.ndarray, settings: ExactSettings) -> np.ndarray:
    m = t.size
    _check_mp_size(m, settings)
    dps = _mp_digits(m, settings)
    with mpmath.workdps(dps):
        tail = _psi_prefixes_mp(1.0 - t[::-1], dps)
        out = []
        for r in range(m + 1):
            lead = mpmath.mpf(1) if r == 0 else mpmath.mpf(float(t[r - 1])) ** r
            out.append(float(mpmath.binomial(m, r) * lead * tail[m - r]))
    return np.array(out)


def dsu(t, r: int, settings: ExactSettings = DEFAULT_SETTINGS) -> float:
    """D^SU_m(t, r) for a single r in 0..m."""
    t = _as_probability_vector(t)
    if int(r) != r or not 0 <= r <= t.size:
        raise DomainError(f"r must be an integer in 0..{t.size}, got {r!r}")
    return float(dsu_pmf(t, settings)[int(r)])


def _threshold_array(model: MixtureModel, t) -> np.ndarray:
    t = _as_probability_vector(np.asarray(t, dtype=float))
    if t.size != model.m:
        raise ContractError(f"model has m={model.m} but {t.size} thresholds were given")
    return t


def rejection_count_pmf(model: MixtureModel, t, settings: ExactSettings = DEFAULT_SETTINGS):
    """P(R = r), r = 0..m, for the step-up procedure with thresholds ``t``."""
    t = _threshold_array(model, t)
    return dsu_pmf(mixture_cdf(model, t), settings)


def conditional_fp_parameter(model: MixtureModel, t_r: float) -> float:
    """pi0 F0(t_r) / G(t_r): the success probability of V given R = r."""
    g = mixture_cdf(model, t_r)
    if g <= 0:
        raise UndefinedError(f"G({t_r!r}) = 0, conditional law undefined")
    return float(model.pi0 * np.asarray(model.f0(t_r)) / g)


def _conditional_params(model, t):
    g = np.asarray(mixture_cdf(model, t), dtype=float)
    f0 = np.asarray(model.f0(t), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(g > 0, model.pi0 * f0 / g, 0.0)
    return np.clip(q, 0.0, 1.0)


def _scales(s: ScalingFunction, m: int) -> np.ndarray:
    return np.asarray(eval_scaling(s, np.arange(1, m + 1)), dtype=float)


def sfdp_cdf(
    model: MixtureModel,
    t,
    s: ScalingFunction,
    x: float,
    settings: ExactSettings = DEFAULT_SETTINGS,
) -> float:
    """P(V / s(R v 1) <= x) for x in (0, 1).

    Conditionally on R = r >= 1, V is Binomial(r, pi0 F0(t_r) / G(t_r));
    the event R = 0 contributes P(R = 0).
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0, 1), got {x!r}")
    t = _threshold_array(model, t)
    m = t.size
    pmf = rejection_count_pmf(model, t, settings)
    q = _conditional_params(model, t)
    r = np.arange(1, m + 1)
    kmax = np.floor(x * _scales(s, m) + settings.floor_nudge)
    cond = stats.binom.cdf(kmax, r, q)
    terms = np.concatenate(([pmf[0]], cond * pmf[1:]))
    return float(min(1.0, _total(terms, settings)))


@dataclass(frozen=True)
class StirlingTable:
    """Stirling numbers of the second kind S(k, l), 0 <= k <= kmax, 0 <= l <= lmax."""

    kmax: int
    lmax: int
    values: tuple

    def __getitem__(self, kl):
        k, l = kl
        if l > self.lmax or k > self.kmax:
            raise IndexError(kl)
        return self.values[k][l]


def stirling_table(kmax: int, lmax: int | None = None) -> StirlingTable:
    lmax = kmax if lmax is None else lmax
    rows = [[1] + [0] * lmax]  # S(0, 0) = 1
    for k in range(1, kmax + 1):
        prev = rows[-1]
        row = [0] * (lmax + 1)
        for l in range(1, lmax + 1):
            row[l] = l * prev[l] + prev[l - 1]
        rows.append(row)
    return StirlingTable(kmax, lmax, tuple(tuple(r) for r in rows))


@lru_cache(maxsize=None)
def stirling2(k: int, l: int) -> int:
    """S(k, l) from S(k+1, l) = l S(k, l) + S(k, l-1), S(1, 1) = 1."""
    if k < 0 or l < 0:
        raise DomainError("k and l must be nonnegative")
    if k == 0:
        return 1 if l == 0 else 0
    if l == 0 or l > k:
        return 0
    return l * stirling2(k - 1, l) + stirling2(k - 1, l - 1)


def _shifted_pmf(model, t, shift, settings):
    # D^SU_{m-l}([G(t_{j+l})]_{1<=j<=m-l}, .)
    return dsu_pmf(mixture_cdf(model, t[shift:]), settings)


def sfdp_moment(
    model: MixtureModel,
    t,
    s: ScalingFunction,
    kappa: int,
    settings: ExactSettings = DEFAULT_SETTINGS,
) -> float:
    """E[(V / s(R v 1))^kappa] for an integer kappa >= 1."""
    if int(kappa) != kappa or kappa < 1:
        raise DomainError(f"kappa must be an integer >= 1, got {kappa!r}")
    kappa = int(kappa)
    t = _threshold_array(model, t)
    m = t.size
    sc = _scales(s, m)
    f0 = np.asarray(model.f0(t), dtype=float)
    total = []
    for l in range(1, min(kappa, m) + 1):
        S = stirling2(kappa, l)
        if S == 0:
            continue
        shifted = _shifted_pmf(model, t, l, settings)
        r = np.arange(l, m + 1)
        # m!/(m-l)! pi0^l F0(t_r)^l, built factor by factor
        coef = np.ones(r.size)
        for i in range(l):
            coef *= (m - i) * model.pi0 * f0[r - 1]
        terms = S * coef / sc[r - 1] ** kappa * shifted[r - l]
        total.extend(terms.tolist())
    return _total(total, settings)


def sev_exact(
    model: MixtureModel,
    t,
    s: ScalingFunction,
    settings: ExactSettings = DEFAULT_SETTINGS,
) -> float:
    """E[V / s(R v 1)], the scaled expected value of the step-up procedure."""
    t = _threshold_array(model, t)
    m = t.size
    f0 = np.asarray(model.f0(t), dtype=float)
    shifted = _shifted_pmf(model, t, 1, settings)
    terms = model.pi0 * m * f0 / _scales(s, m) * shifted
    return _total(terms, settings)


def power_exact(model: MixtureModel, t, settings: ExactSettings = DEFAULT_SETTINGS) -> float:
    """Probability that a given false null is rejected."""
    if model.pi0 >= 1.0:
        raise UndefinedError("power is undefined when every hypothesis is null")
    t = _threshold_array(model, t)
    f1 = np.asarray(model.f1(t), dtype=float)
    shifted = _shifted_pmf(model, t, 1, settings)
    return _total(f1 * shifted, settings)


def power_exact_scaled(
    model: MixtureModel,
    s: ScalingFunction,
    alpha: float,
    settings: ExactSettings = DEFAULT_SETTINGS,
) -> float:
    """Power for thresholds alpha s(r) / m, written out term by term.

    Sum over r of F1(t_r) C(m-1, r-1) G(t_r)^(r-1) psi(1-G(t_m), ..., 1-G(t_{r+1})).
    Agrees with :func:`power_exact` on the same thresholds.
    """
    if model.pi0 >= 1.0:
        raise UndefinedError("power is undefined when every hypothesis is null")
    t = build_thresholds(s, model.m, alpha).thresholds
    m = t.size
    g = np.asarray(mixture_cdf(model, t), dtype=float)
    tail = psi_prefixes(1.0 - g[::-1], settings)
    r = np.arange(1, m + 1)
    with np.errstate(divide="ignore"):
        lead = np.exp(_log_binom(m - 1.0, r - 1.0) + np.where(r > 1, (r - 1) * np.log(g), 0.0))
    terms = np.asarray(model.f1(t), dtype=float) * lead * tail[m - r]
    return _total(np.nan_to_num(terms), settings)

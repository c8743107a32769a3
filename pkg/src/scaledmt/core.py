"""Domain types shared by the rest of the package.

Scaling functions, threshold sequences, the two-groups p-value model and
the outcome of a rejection procedure all live here, together with the
exception hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats


class ScaledMTError(Exception):
    """Base class for errors raised by this package."""


class DomainError(ScaledMTError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidThresholdError(ScaledMTError, ValueError):
    """A threshold is not a probability."""


class ContractError(ScaledMTError, ValueError):
    """Inputs are inconsistent with each other (lengths, ordering)."""


class DataError(ScaledMTError, ValueError):
    """Malformed data, e.g. NaN p-values."""


class UndefinedError(ScaledMTError, ArithmeticError):
    """The requested quantity is undefined for these parameters."""


class NoSolutionError(ScaledMTError, RuntimeError):
    """A root finder could not bracket a solution."""


_KINDS = ("constant", "identity", "power", "table")


@dataclass(frozen=True)
class ScalingFunction:
    """Nondecreasing positive function s(r) on the ranks 1..m.

    Use the constructors :meth:`constant`, :meth:`identity`,
    :meth:`power` and :meth:`table` rather than the raw initializer.
    """

    kind: str
    gamma: Optional[float] = None
    values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown scaling kind {self.kind!r}")
        if self.kind == "power":
            g = self.gamma
            if g is None or not np.isfinite(g) or not 0.0 <= g <= 1.0:
                raise DomainError(f"gamma must lie in [0, 1], got {g!r}")
        if self.kind == "table":
            v = np.asarray(self.values, dtype=float)
            if v.ndim != 1 or v.size == 0:
                raise DomainError("table scaling needs a non-empty 1-d vector")
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise DomainError("table scaling values must be positive and finite")
            if np.any(np.diff(v) < 0):
                raise DomainError("table scaling values must be nondecreasing")

    @classmethod
    def constant(cls) -> "ScalingFunction":
        return cls("constant")

    @classmethod
    def identity(cls) -> "ScalingFunction":
        return cls("identity")

    @classmethod
    def power(cls, gamma: float) -> "ScalingFunction":
        return cls("power", gamma=float(gamma))

    @classmethod
    def table(cls, values) -> "ScalingFunction":
        return cls("table", values=tuple(float(x) for x in np.ravel(values)))

    @property
    def domain_max(self) -> Optional[int]:
        """Largest admissible rank, or None when unbounded."""
        return len(self.values) if self.kind == "table" else None

    def __call__(self, r):
        return eval_scaling(self, r)

    def inverse(self, v):
        """s^{-1}(v) for the power family (gamma > 0) and the identity."""
        v = np.asarray(v, dtype=float)
        if self.kind == "identity" or (self.kind == "power" and self.gamma == 1.0):
            return v
        if self.kind == "power" and self.gamma > 0:
            return v ** (1.0 / self.gamma)
        raise DomainError(f"{self.describe()} has no usable inverse")

    def describe(self) -> str:
        if self.kind == "power":
            return f"power({self.gamma:g})"
        if self.kind == "table":
            return f"table(m={len(self.values)})"
        return self.kind


def eval_scaling(s: ScalingFunction, r):
    """Evaluate ``s`` at rank(s) ``r``.

    ``r`` may be a scalar or an integer array; every entry must be >= 1
    (and <= m for table scalings).
    """
    ra = np.asarray(r)
    if ra.size and (np.any(ra < 1) or np.any(ra != np.floor(ra))):
        raise DomainError(f"ranks must be integers >= 1, got {r!r}")
    if s.kind == "table" and ra.size and np.any(ra > len(s.values)):
        raise DomainError(f"rank exceeds table length {len(s.values)}")
    rf = ra.astype(float)
    if s.kind == "constant" or (s.kind == "power" and s.gamma == 0.0):
        out = np.ones_like(rf)
    elif s.kind == "identity" or (s.kind == "power" and s.gamma == 1.0):
        out = rf
    elif s.kind == "power":
        out = rf ** s.gamma
    else:
        out = np.asarray(s.values, dtype=float)[ra.astype(int) - 1]
    if np.ndim(r) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ThresholdSequence:
    """Nondecreasing thresholds t_1 <= ... <= t_m in (0, 1].

    ``alpha`` is set when the sequence was built from a scaling function and
    stays None for arbitrary user thresholds.
    """

    thresholds: np.ndarray
    alpha: Optional[float] = None
    scaling: Optional[ScalingFunction] = None

    def __post_init__(self):
        t = np.array(self.thresholds, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ContractError("thresholds must be a non-empty 1-d vector")
        if not np.all(np.isfinite(t)) or t[0] <= 0 or t[-1] > 1:
            raise InvalidThresholdError("thresholds must lie in (0, 1]")
        if np.any(np.diff(t) < 0):
            raise ContractError("thresholds must be nondecreasing")
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)

    @property
    def m(self) -> int:
        return self.thresholds.size

    def __len__(self):
        return self.m

    def __getitem__(self, i):
        return self.thresholds[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.thresholds, dtype=dtype)


def build_thresholds(s: ScalingFunction, m: int, alpha: float) -> ThresholdSequence:
    """Thresholds t_i = alpha * s(i) / m for i = 1..m.

    Raises
    ------
    InvalidThresholdError
        if t_m exceeds 1.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    m = int(m)
    if s.kind == "table" and len(s.values) < m:
        raise DomainError(f"table scaling has {len(s.values)} values, need {m}")
    t = alpha * np.asarray(eval_scaling(s, np.arange(1, m + 1)), dtype=float) / m
    if t[-1] > 1.0:
        raise InvalidThresholdError(
            f"alpha*s(m)/m = {t[-1]:.6g} > 1; thresholds must be probabilities"
        )
    return ThresholdSequence(t, alpha=float(alpha), scaling=s)


def uniform_cdf(u):
    return np.clip(np.asarray(u, dtype=float), 0.0, 1.0)


def gaussian_shift_cdf(delta: float) -> Callable:
    """p-value cdf of a one-sided z-test whose statistic is N(delta, 1).

    F(u) = 1 - Phi(z_{1-u} - delta).
    """

    def cdf(u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return stats.norm.sf(stats.norm.isf(u) - delta)

    return cdf


def _check_cdf(f: Callable, name: str, grid_size: int = 1001):
    grid = np.linspace(0.0, 1.0, grid_size)
    vals = np.asarray(f(grid), dtype=float)
    if vals.shape != grid.shape or not np.all(np.isfinite(vals)):
        raise DomainError(f"{name} must be a vectorized function on [0, 1]")
    if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
        raise DomainError(f"{name} must map [0, 1] into [0, 1]")
    if np.any(np.diff(vals) < -1e-12):
        raise DomainError(f"{name} must be nondecreasing")
    if abs(vals[0]) > 1e-9 or abs(vals[-1] - 1) > 1e-9:
        raise DomainError(f"{name} must satisfy F(0)=0 and F(1)=1")


@dataclass(frozen=True)
class MixtureModel:
    """Two-groups model for m independent p-values.

    Each hypothesis is null with probability ``pi0``; null p-values have cdf
    ``f0`` (uniform by default) and alternative p-values have cdf ``f1``.
    Give either ``delta`` (one-sided Gaussian shift) or ``f1``.
    """

    m: int
    pi0: float
    delta: Optional[float] = None
    f1: Optional[Callable] = field(default=None, repr=False)
    f0: Callable = field(default=uniform_cdf, repr=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        if not 0.0 <= self.pi0 <= 1.0:
            raise DomainError(f"pi0 must lie in [0, 1], got {self.pi0!r}")
        if (self.delta is None) == (self.f1 is None):
            raise DomainError("give exactly one of delta or f1")
        if self.delta is not None:
            if not np.isfinite(self.delta) or self.delta < 0:
                raise DomainError(f"delta must be >= 0, got {self.delta!r}")
            object.__setattr__(self, "f1", gaussian_shift_cdf(float(self.delta)))
        else:
            _check_cdf(self.f1, "f1")
        if self.f0 is not uniform_cdf:
            _check_cdf(self.f0, "f0")

    @classmethod
    def from_counts(cls, m: int, m0: int, **kw) -> "MixtureModel":
        if not 0 <= m0 <= m:
            raise DomainError(f"m0 must lie in [0, m], got {m0!r}")
        return cls(m=m, pi0=m0 / m, **kw)

    @classmethod
    def from_table(cls, m: int, pi0: float, u, f1_values) -> "MixtureModel":
        """Alternative cdf given on a grid, linearly interpolated."""
        u = np.asarray(u, dtype=float)
        fv = np.asarray(f1_values, dtype=float)
        if u.shape != fv.shape or u.ndim != 1 or u.size < 2:
            raise ContractError("u and f1_values must be 1-d of equal length >= 2")
        order = np.argsort(u)
        u, fv = u[order], fv[order]

        def f1(x):
            return np.interp(np.asarray(x, dtype=float), u, fv)

        return cls(m=m, pi0=pi0, f1=f1)

    @property
    def m0(self) -> float:
        return self.pi0 * self.m

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0

    def cdf(self, u):
        return mixture_cdf(self, u)


def mixture_cdf(model: MixtureModel, u):
    """G(u) = pi0 F0(u) + (1 - pi0) F1(u)."""
    ua = np.asarray(u, dtype=float)
    if np.any((ua < 0) | (ua > 1)) or np.any(np.isnan(ua)):
        raise DomainError("u must lie in [0, 1]")
    g = model.pi0 * np.asarray(model.f0(ua)) + model.pi1 * np.asarray(model.f1(ua))
    g = np.clip(g, 0.0, 1.0)
    return float(g) if np.ndim(u) == 0 else g


@dataclass(frozen=True)
class RejectionOutcome:
    """Result of a rejection procedure on m hypotheses.

    ``rejected`` holds 0-based indices into the input p-value vector, in
    increasing order.  ``V`` and ``T`` are filled in by
    :func:`scaledmt.procedures.classify_outcome`.
    """

    m: int
    rejected: np.ndarray
    V: Optional[int] = None
    T: Optional[int] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        idx = np.asarray(self.rejected, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= self.m):
            raise ContractError("rejected indices out of range")
        idx.setflags(write=False)
        object.__setattr__(self, "rejected", idx)
        if (self.V is None) != (self.T is None):
            raise ContractError("V and T must be given together")
        if self.V is not None and self.V + self.T != idx.size:
            raise ContractError("V + T must equal R")

    @property
    def R(self) -> int:
        return int(self.rejected.size)

    @property
    def classified(self) -> bool:
        return self.V is not None

"""Step-up rejection engine and the cost criterion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ContractError,
    DataError,
    DomainError,
    RejectionOutcome,
    ScalingFunction,
    ThresholdSequence,
    eval_scaling,
)


@dataclass(frozen=True)
class LossSpec:
    """Unit price ``lam`` of a false rejection, a true one being worth 1.

    Prices below 1 are refused unless ``permissive`` is set, in which case
    any positive price is accepted.
    """

    lam: float
    permissive: bool = False

    def __post_init__(self):
        lo_ok = self.lam > 0 if self.permissive else self.lam >= 1
        if not np.isfinite(self.lam) or not lo_ok:
            bound = "> 0" if self.permissive else ">= 1"
            raise DomainError(f"lambda must be {bound}, got {self.lam!r}")


def step_up(pvalues, thresholds) -> RejectionOutcome:
    """Run the step-up procedure.

    With p_(1) <= ... <= p_(m) the sorted p-values, R is the largest i with
    p_(i) <= t_i (0 if there is none) and every hypothesis whose p-value is
    at most p_(R) is rejected.

    Parameters
    ----------
    pvalues : array_like
        m p-values in [0, 1].
    thresholds : ThresholdSequence or array_like
        m nondecreasing thresholds.

    Returns
    -------
    RejectionOutcome
    """
    p = np.asarray(pvalues, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    if p.ndim != 1 or t.ndim != 1 or p.size != t.size:
        raise ContractError(
            f"need {t.size} p-values to match the thresholds, got shape {p.shape}"
        )
    if np.any(np.isnan(p)):
        raise DataError("NaN p-value")
    if np.any((p < 0) | (p > 1)):
        raise DataError("p-values must lie in [0, 1]")
    m = p.size
    # stable sort on (p, index)
    order = np.argsort(p, kind="stable")
    below = np.nonzero(p[order] <= t)[0]
    if below.size == 0:
        return RejectionOutcome(m=m, rejected=np.empty(0, dtype=np.intp))
    R = int(below[-1]) + 1
    cut = p[order[R - 1]]
    # all ties with p_(R) sit at sorted positions <= R, so this has size R
    rejected = np.nonzero(p <= cut)[0]
    return RejectionOutcome(m=m, rejected=rejected, threshold=float(t[R - 1]))


def bonferroni(pvalues, alpha: float) -> RejectionOutcome:
    p = np.asarray(pvalues, dtype=float)
    return step_up(p, np.full(p.size, alpha / p.size))


def classify_outcome(outcome: RejectionOutcome, truth) -> RejectionOutcome:
    """Attach V and T given ``truth``, a boolean mask of the true nulls."""
    nulls = np.asarray(truth, dtype=bool)
    if nulls.ndim != 1 or nulls.size != outcome.m:
        raise ContractError(f"truth must have length {outcome.m}")
    V = int(np.count_nonzero(nulls[outcome.rejected]))
    return RejectionOutcome(
        m=outcome.m,
        rejected=outcome.rejected,
        V=V,
        T=outcome.R - V,
        threshold=outcome.threshold,
    )


def loss(V, T, spec: LossSpec):
    """lambda * V - T, the realized cost of an outcome (vectorized)."""
    V = np.asarray(V, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(V < 0) or np.any(T < 0):
        raise DomainError("V and T must be nonnegative")
    out = spec.lam * V - T
    return float(out) if out.ndim == 0 else out


def empirical_sfdp(outcome: RejectionOutcome, s: ScalingFunction) -> float:
    """V / s(max(R, 1)) for a classified outcome."""
    if not outcome.classified:
        raise ContractError("outcome has no V; call classify_outcome first")
    return outcome.V / eval_scaling(s, max(outcome.R, 1))


def sfdp_values(V, R, s: ScalingFunction):
    """Vectorized V / s(R v 1) for arrays of counts."""
    V = np.asarray(V, dtype=float)
    Rc = np.maximum(np.asarray(R), 1)
    return V / np.asarray(eval_scaling(s, Rc), dtype=float)


def batch_step_up_counts(sorted_p, thresholds):
    """Rejection counts for many sorted p-value rows and threshold rows.

    Parameters
    ----------
    sorted_p : ndarray, shape (n, m)
        Each row sorted ascending.
    thresholds : ndarray, shape (k, m)

    Returns
    -------
    ndarray of int, shape (n, k)
        R for each row/threshold pair.
    """
    sp = np.asarray(sorted_p, dtype=float)
    th = np.atleast_2d(np.asarray(thresholds, dtype=float))
    m = sp.shape[1]
    if th.shape[1] != m:
        raise ContractError("threshold rows must have length m")
    hit = sp[:, None, :] <= th[None, :, :]
    # position of the last True along the rank axis, 0 when none
    last = m - np.argmax(hit[:, :, ::-1], axis=2)
    return np.where(hit.any(axis=2), last, 0)

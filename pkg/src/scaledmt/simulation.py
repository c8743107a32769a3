"""Monte Carlo engine for the one-sided Gaussian multiple testing problem.

Every replication draws from its own counter-based Philox stream keyed by
``(seed, replication index)``, so results do not depend on how the work
is split across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from .core import DomainError, MixtureModel, ScalingFunction, build_thresholds
from .procedures import batch_step_up_counts, sfdp_values

_MASK64 = (1 << 64) - 1
DEFAULT_GAMMAS = tuple(np.round(np.linspace(0.0, 1.0, 51), 10))
DEFAULT_LAMBDAS = tuple(np.geomspace(1.0, 100.0, 20))


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Philox generator for one replication (or one chunk) of a run."""
    if seed < 0 or stream < 0:
        raise DomainError("seed and stream index must be nonnegative")
    bitgen = np.random.Philox(key=seed & _MASK64, counter=[0, stream & _MASK64, 0, 0])
    return np.random.Generator(bitgen)


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("SCALEDMT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class Scenario:
    m: int
    m1: int
    delta: float
    alpha: float = 0.05
    lambdas: tuple = DEFAULT_LAMBDAS
    gammas: tuple = DEFAULT_GAMMAS
    replications: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or not 0 <= self.m1 < self.m:
            raise DomainError("need m >= 1 and 0 <= m1 < m")
        if self.delta < 0:
            raise DomainError("delta must be nonnegative")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        g = np.asarray(self.gammas, dtype=float)
        if g.size == 0 or np.any((g < 0) | (g > 1)):
            raise DomainError("gamma grid must lie in [0, 1]")
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.size == 0 or np.any(lam < 1):
            raise DomainError("lambda grid must be >= 1")
        object.__setattr__(self, "gammas", tuple(float(x) for x in g))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in lam))

    @property
    def m0(self) -> int:
        return self.m - self.m1

    @property
    def pi0(self) -> float:
        return self.m0 / self.m


def generate_pvalues(scenario: Scenario, rep: int):
    """p-values and null mask for one replication.

    The first m0 hypotheses are null (uniform p-values); the rest have
    p = 1 - Phi(Z + delta), Z standard normal.
    """
    rng = rng_for(scenario.seed, rep)
    p = np.empty(scenario.m)
    p[: scenario.m0] = rng.random(scenario.m0)
    p[scenario.m0 :] = stats.norm.sf(rng.standard_normal(scenario.m1) + scenario.delta)
    truth = np.zeros(scenario.m, dtype=bool)
    truth[: scenario.m0] = True
    return p, truth


class EmpiricalRates(NamedTuple):
    sev: float
    fdr: float
    sev_se: float
    fdr_se: float


def empirical_sev_fdr(V, R, s: ScalingFunction) -> EmpiricalRates:
    """Sample means and standard errors of V/s(R v 1) and V/(R v 1)."""
    V = np.asarray(V)
    R = np.asarray(R)
    if V.size < 2:
        raise DomainError("need at least two replications")
    sfdp = sfdp_values(V, R, s)
    fdp = V / np.maximum(R, 1)
    n = V.size
    return EmpiricalRates(
        float(sfdp.mean()),
        float(fdp.mean()),
        float(sfdp.std(ddof=1) / np.sqrt(n)),
        float(fdp.std(ddof=1) / np.sqrt(n)),
    )


@dataclass
class SimulationResult:
    """Per-replication counts for every gamma of a scenario, plus summaries.

    ``V``, ``T`` and ``R`` have shape (replications, len(gammas)).
    """

    scenario: Scenario
    V: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)

    @property
    def R(self) -> np.ndarray:
        return self.V + self.T

    @property
    def gammas(self) -> np.ndarray:
        return np.asarray(self.scenario.gammas)

    @property
    def lambdas(self) -> np.ndarray:
        return np.asarray(self.scenario.lambdas)

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def mean_V(self):
        return self.V.mean(axis=0)

    @property
    def mean_T(self):
        return self.T.mean(axis=0)

    @property
    def mean_R(self):
        return self.R.mean(axis=0)

    @property
    def mean_loss(self) -> np.ndarray:
        """Shape (len(gammas), len(lambdas))."""
        return self.lambdas[None, :] * self.mean_V[:, None] - self.mean_T[:, None]

    @property
    def se_loss(self) -> np.ndarray:
        if self.n < 2:
            return np.full((self.gammas.size, self.lambdas.size), np.nan)
        out = np.empty((self.gammas.size, self.lambdas.size))
        for j, lam in enumerate(self.lambdas):
            out[:, j] = (lam * self.V - self.T).std(axis=0, ddof=1)
        return out / np.sqrt(self.n)

    def rates(self, k: int) -> EmpiricalRates:
        return empirical_sev_fdr(
            self.V[:, k], self.R[:, k], ScalingFunction.power(self.gammas[k])
        )

    @property
    def power(self) -> np.ndarray:
        if self.scenario.m1 == 0:
            return np.full(self.gammas.size, np.nan)
        return self.mean_T / self.scenario.m1

    @property
    def fwer(self) -> np.ndarray:
        return (self.V >= 1).mean(axis=0)

    @property
    def argmin_gamma(self) -> np.ndarray:
        """Loss-minimizing gamma for each lambda; ties go to the smaller gamma."""
        # np.argmin returns the first minimum and gammas are ascending
        order = np.argsort(self.gammas, kind="stable")
        idx = np.argmin(self.mean_loss[order], axis=0)
        return self.gammas[order][idx]


def _gamma_thresholds(scenario: Scenario) -> np.ndarray:
    return np.vstack(
        [
            build_thresholds(ScalingFunction.power(g), scenario.m, scenario.alpha).thresholds
            for g in scenario.gammas
        ]
    )


def _run_block(scenario, thresholds, reps):
    V = np.empty((len(reps), thresholds.shape[0]), dtype=np.int64)
    T = np.empty_like(V)
    sp = np.empty((len(reps), scenario.m))
    cnull = np.empty((len(reps), scenario.m + 1), dtype=np.int64)
    for i, rep in enumerate(reps):
        p, truth = generate_pvalues(scenario, rep)
        order = np.argsort(p, kind="stable")
        sp[i] = p[order]
        cnull[i, 0] = 0
        np.cumsum(truth[order], out=cnull[i, 1:])
    R = batch_step_up_counts(sp, thresholds)
    V[:] = np.take_along_axis(cnull, R, axis=1)
    T[:] = R - V
    return V, T


def run_grid(scenario: Scenario, threads: int | None = None, block: int = 200) -> SimulationResult:
    """Simulate every replication of ``scenario`` for every gamma on its grid."""
    thresholds = _gamma_thresholds(scenario)
    n = scenario.replications
    V = np.empty((n, thresholds.shape[0]), dtype=np.int64)
    T = np.empty_like(V)
    blocks = [range(a, min(a + block, n)) for a in range(0, n, block)]

    def work(reps):
        v, t = _run_block(scenario, thresholds, reps)
        V[reps.start : reps.stop] = v
        T[reps.start : reps.stop] = t

    nworkers = min(worker_count(threads), len(blocks))
    if nworkers == 1:
        for b in blocks:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            list(pool.map(work, blocks))
    return SimulationResult(scenario, V, T)


def simulate_unconditional(
    model: MixtureModel,
    thresholds,
    replications: int,
    seed: int = 0,
    chunk: int = 100_000,
):
    """Step-up runs under the unconditional model (random null labels).

    Each hypothesis is null with probability pi0.  Only Gaussian-shift
    alternatives are supported.

    Returns
    -------
    V, T, n_alt : ndarray of int
        False and true rejections and number of alternatives per replication.
    """
    if model.delta is None:
        raise DomainError("simulation needs a Gaussian-shift model")
    t = np.asarray(thresholds, dtype=float)
    m = model.m
    Vs, Ts, As = [], [], []
    for c, start in enumerate(range(0, replications, chunk)):
        n = min(chunk, replications - start)
        rng = rng_for(seed, c)
        null = rng.random((n, m)) < model.pi0
        u = rng.random((n, m))
        z = rng.standard_normal((n, m))
        p = np.where(null, u, stats.norm.sf(z + model.delta))
        order = np.argsort(p, axis=1, kind="stable")
        sp = np.take_along_axis(p, order, axis=1)
        snull = np.take_along_axis(null, order, axis=1)
        cnull = np.concatenate([np.zeros((n, 1), dtype=np.int64), np.cumsum(snull, axis=1)], axis=1)
        R = batch_step_up_counts(sp, t)[:, 0]
        V = cnull[np.arange(n), R]
        Vs.append(V)
        Ts.append(R - V)
        As.append(m - null.sum(axis=1))
    return np.concatenate(Vs), np.concatenate(Ts), np.concatenate(As)

"""Independent reference implementations used as test oracles.

Nothing here calls into the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import stats


def _det(rows):
    """Determinant of a square matrix of Fractions by Gaussian elimination."""
    a = [list(r) for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def steck_lower(t) -> float:
    """P(U_(i) <= t_i, i = 1..r) for r iid uniforms, by Steck's determinant.

    Evaluated in exact rational arithmetic from the decimal values of t.
    """
    b = [Fraction(x) for x in t]
    r = len(b)
    if r == 0:
        return 1.0
    rows = []
    for i in range(r):
        row = []
        for j in range(r):
            k = j - i + 1
            row.append(b[i] ** k / math.factorial(k) if k >= 0 else Fraction(0))
        rows.append(row)
    return float(math.factorial(r) * _det(rows))


def psi_monte_carlo(t, n: int, seed: int, chunk: int = 1_000_000):
    """Fraction of samples with sorted uniforms below t, and its standard error."""
    t = np.asarray(t, dtype=float)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        u = np.sort(rng.random((k, t.size)), axis=1)
        hits += int(np.count_nonzero(np.all(u <= t, axis=1)))
        done += k
    p = hits / n
    return p, math.sqrt(max(p * (1 - p), 1.0 / n) / n)


def set_partitions_count(k: int, l: int) -> int:
    """Number of partitions of {0..k-1} into exactly l nonempty blocks."""
    count = 0
    for labels in itertools.product(range(l), repeat=k):
        # canonical labelling: first appearances in order 0, 1, 2, ...
        seen = []
        for x in labels:
            if x not in seen:
                seen.append(x)
        if len(seen) == l and seen == list(range(l)):
            count += 1
    return count


def reference_bh(p, alpha):
    """Benjamini-Hochberg via the adjusted p-value formulation."""
    p = np.asarray(p, dtype=float)
    m = p.size
    order = np.argsort(p)
    adj = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(adj[::-1])[::-1]
    out = np.zeros(m, dtype=bool)
    out[order] = adj <= alpha
    return np.nonzero(out)[0]


def reference_bonferroni(p, alpha):
    p = np.asarray(p, dtype=float)
    return np.nonzero(p * p.size <= alpha)[0]


def simulate_step_up(m, pi0, delta, t, n, seed, fixed_m0=None):
    """Plain simulation of the step-up rule.

    Labels are Bernoulli(pi0) per test unless ``fixed_m0`` is given.
    Returns V, R and a boolean matrix of rejected alternatives (n, m)
    together with the alternative mask.
    """
    rng = np.random.default_rng(seed)
    t = np.asarray(t, dtype=float)
    if fixed_m0 is None:
        null = rng.random((n, m)) < pi0
    else:
        null = np.zeros((n, m), dtype=bool)
        null[:, :fixed_m0] = True
    z = rng.standard_normal((n, m))
    p = np.where(null, rng.random((n, m)), stats.norm.sf(z + delta))
    sp = np.sort(p, axis=1)
    ok = sp <= t
    R = np.where(ok.any(axis=1), m - np.argmax(ok[:, ::-1], axis=1), 0)
    cut = np.where(R > 0, sp[np.arange(n), np.maximum(R, 1) - 1], -1.0)
    rej = p <= cut[:, None]
    V = np.count_nonzero(rej & null, axis=1)
    return V, R, rej, ~null


def mean_and_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

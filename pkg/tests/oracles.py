"""Slow, literal reference implementations used as test oracles.

Nothing here imports the package under test; each function follows the
textbook definition with plain loops so it can be checked by eye.
"""

from __future__ import annotations

import itertools
import math

from scipy.stats import binom


def nearest_pairs(tv, tc):
    """For every verifier time, the index and gap of the nearest candidate time."""
    out = []
    for t in tv:
        best = min(range(len(tc)), key=lambda j: (abs(tc[j] - t), j))
        out.append((best, abs(tc[best] - t)))
    return out


def moving_average(x, M):
    return [sum(x[i:i + M]) / M for i in range(len(x) - M + 1)]


def pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    sab = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    saa = sum((x - ma) ** 2 for x in a)
    sbb = sum((y - mb) ** 2 for y in b)
    return sab / math.sqrt(saa * sbb)


def approx_entropy(x, m, r):
    """Pincus ApEn with self-matches, Chebyshev distance, natural log."""
    def phi(mm):
        n = len(x) - mm + 1
        templates = [x[i:i + mm] for i in range(n)]
        total = 0.0
        for u in templates:
            c = sum(1 for v in templates if max(abs(p - q) for p, q in zip(u, v)) <= r)
            total += math.log(c / n)
        return total / n
    return phi(m) - phi(m + 1)


def pass_probability_enum(f, K, alpha):
    """Sum over all 2^K pass/fail outcomes."""
    need = math.ceil(round(alpha * K, 9))
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=K):
        s = sum(outcome)
        if s >= need:
            total += f ** s * (1 - f) ** (K - s)
    return total


def tune_grid(train_C, train_M, K_max):
    """Exhaustive (tau, K, alpha) search with binomial tails from scipy.

    Returns (tau, K, alpha, eer) or None when no tau is feasible.
    """
    best = None
    for j in range(101):
        tau = j / 100
        fc = sum(1 for r in train_C if r >= tau) / len(train_C)
        fm = sum(1 for r in train_M if r >= tau) / len(train_M)
        if not (fc > 0.5 and fm < 0.5):
            continue
        for K in range(1, K_max + 1):
            tail_c = binom.sf(range(K), K, fc)  # P(X >= need) at index need - 1
            miss_c = binom.cdf(range(K), K, fc)  # P(X < need), not 1 - tail_c
            tail_m = binom.sf(range(K), K, fm)
            for need in range(1, K + 1):
                Fc = float(tail_c[need - 1])
                Fm = float(tail_m[need - 1])
                eer = max(float(miss_c[need - 1]), Fm)
                key = (eer, K, -(Fc - Fm), tau, need / K)
                if best is None or key < best[0]:
                    best = (key, (tau, K, need / K, eer))
    return None if best is None else best[1]

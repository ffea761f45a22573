"""RSS signal pipeline: alignment, smoothing, subset formation, correlation and
approximate entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel import RssTrace


class AlignmentError(ValueError):
    """Two traces cannot be paired sample by sample."""


class DegenerateInputError(ValueError):
    """Correlation is undefined because an input has zero variance."""


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Time-aligned RSS values of the verifier (``a``) and the candidate (``b``)."""

    a: np.ndarray
    b: np.ndarray
    t0: float
    rate: float
    max_gap: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if len(a) != len(b):
            raise ValueError("aligned sequences differ in length")
        if len(a) == 0:
            raise ValueError("aligned pair is empty")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return len(self.a)

    def head(self, n: int) -> AlignedPair:
        return AlignedPair(self.a[:n], self.b[:n], self.t0, self.rate, self.max_gap)


def align(tv: RssTrace, tc: RssTrace, tol: float | None = None,
          max_bad_fraction: float = 0.05) -> AlignedPair:
    """Pair each verifier sample with the nearest-in-time candidate sample.

    Only the common span is kept. Pairs further apart than ``tol`` (default
    half a sample period) are dropped; more than ``max_bad_fraction`` of them
    is a misalignment error.
    """
    if not math.isclose(tv.rate, tc.rate, rel_tol=1e-9):
        raise AlignmentError(f"sample rates differ: {tv.rate} Hz vs {tc.rate} Hz")
    if len(tv) == 0 or len(tc) == 0:
        raise AlignmentError("empty trace")
    if tol is None:
        tol = 0.5 / tv.rate
    lo = max(tv.start, tc.start) - tol
    hi = min(tv.end, tc.end) + tol
    iv = np.flatnonzero((tv.times >= lo) & (tv.times <= hi))
    if hi < lo or len(iv) == 0:
        raise AlignmentError("traces do not overlap in time")
    t = tv.times[iv]
    j = np.clip(np.searchsorted(tc.times, t), 1, len(tc) - 1)
    left = tc.times[j - 1]
    right = tc.times[j]
    j = np.where(np.abs(t - left) <= np.abs(right - t), j - 1, j)
    if len(tc) == 1:
        j = np.zeros_like(iv)
    gaps = np.abs(tc.times[j] - t)
    bad = gaps > tol + 1e-12
    if bad.mean() > max_bad_fraction:
        raise AlignmentError(
            f"{int(bad.sum())} of {len(bad)} candidate pairs exceed the {tol * 1e3:.1f} ms tolerance"
        )
    keep = ~bad
    # one candidate sample may serve one verifier sample only
    _, first = np.unique(j[keep], return_index=True)
    sel = np.flatnonzero(keep)[np.sort(first)]
    if len(sel) == 0:
        raise AlignmentError("no sample pairs within tolerance")
    return AlignedPair(tv.rss[iv[sel]], tc.rss[j[sel]], float(t[sel[0]]), tv.rate,
                       float(gaps[sel].max()))


def moving_average(x, M: int) -> np.ndarray:
    """Trailing M-point mean; output has ``len(x) - M + 1`` samples."""
    x = np.asarray(x, dtype=float)
    if M < 1:
        raise ValueError("window length must be >= 1")
    if len(x) < M:
        raise ValueError(f"sequence of {len(x)} samples is shorter than the window M={M}")
    if M == 1:
        return x.copy()
    return sliding_window_view(x, M).mean(axis=1)


def pearson(a, b) -> float:
    """Pearson correlation coefficient, clamped to [-1, 1].

    Raises DegenerateInputError if either input has zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise ValueError("inputs differ in length")
    if len(a) < 2:
        raise ValueError("need at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateInputError("zero-variance input")
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def subset_count(n: int, N: int) -> int:
    """Number of half-overlapping N-sample subsets that fit in ``n`` samples."""
    if N % 2 or N < 2:
        raise ValueError("subset length N must be a positive even number")
    if n < N:
        return 0
    return (n - N) // (N // 2) + 1


def required_samples(K: int, N: int) -> int:
    """Samples needed for K half-overlapping subsets of length N."""
    return (K + 1) * N // 2


def split_subsets(x, N: int) -> list[np.ndarray]:
    """Subsets of length N starting at 0, N/2, N, ...; consecutive ones share N/2 samples."""
    x = np.asarray(x)
    if N % 2 or N < 2:
        raise ValueError("subset length N must be a positive even number")
    if len(x) < N:
        raise ValueError(f"sequence of {len(x)} samples is shorter than N={N}")
    half = N // 2
    return [x[k * half:k * half + N] for k in range(subset_count(len(x), N))]


def _phi(x: np.ndarray, m: int, r: float, chunk: int = 512) -> float:
    emb = sliding_window_view(x, m)
    n = len(emb)
    total = 0.0
    for s in range(0, n, chunk):
        blk = emb[s:s + chunk]
        dist = np.abs(blk[:, None, :] - emb[None, :, :]).max(axis=2)
        counts = (dist <= r).sum(axis=1)
        total += float(np.log(counts / n).sum())
    return total / n


def approx_entropy(x, m: int = 2, r: float | None = None) -> float:
    """Approximate entropy with self-matches, Chebyshev distance and natural log.

    ``r`` defaults to 0.2 times the standard deviation of ``x``. Constant
    input yields exactly 0.
    """
    x = np.asarray(x, dtype=float)
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(x) < m + 2:
        raise ValueError(f"need at least m + 2 = {m + 2} samples, got {len(x)}")
    if r is None:
        r = 0.2 * float(np.std(x))
        if r == 0.0:
            return 0.0
    if r <= 0:
        raise ValueError("similarity radius r must be positive")
    return max(0.0, _phi(x, m, r) - _phi(x, m + 1, r))

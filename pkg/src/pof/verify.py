"""Decision engine: per-subset correlation tests, the K-of-alpha rule, the
binomial passing probability and the error-rate-minimising parameter search."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .sigproc import (AlignedPair, DegenerateInputError, moving_average, pearson,
                      required_samples, split_subsets)

# rho reported for a subset whose smoothed values have zero variance
DEGENERATE_RHO = -1.0
TAU_GRID = tuple(j / 100 for j in range(101))


class InsufficientSamplesError(ValueError):
    def __init__(self, have: int, required: int):
        super().__init__(f"need {required} aligned samples, have {have}")
        self.have = have
        self.required = required


class InseparableTrainingError(ValueError):
    """No threshold separates the legitimate and adversary training sets."""


def required_passes(K: int, alpha: float) -> int:
    """ceil(alpha * K), immune to float noise such as 0.55 * 20 = 11.000000000000002."""
    return math.ceil(round(alpha * K, 9))


@dataclass(frozen=True)
class PofParams:
    N: int = 400
    M: int = 20
    K: int = 20
    tau: float = 0.45
    alpha: float = 0.75

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.N % 2 or self.N < 2 * self.M:
            raise ValueError(f"N must be even and >= 2M, got N={self.N}, M={self.M}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 1 <= required_passes(self.K, self.alpha) <= self.K:
            raise ValueError("ceil(alpha K) must lie in [1, K]")

    @property
    def required(self) -> int:
        return required_passes(self.K, self.alpha)

    @property
    def samples_needed(self) -> int:
        return required_samples(self.K, self.N)

    def duration(self, rate: float) -> float:
        """Seconds of collection at ``rate`` Hz for one decision."""
        return self.samples_needed / rate


@dataclass(frozen=True)
class PofDecision:
    rhos: tuple
    passed_count: int
    required: int
    accept: bool

    @property
    def mean_rho(self) -> float:
        return float(np.mean(self.rhos))

    def to_dict(self) -> dict:
        return {"rhos": list(self.rhos), "passed_count": self.passed_count,
                "required": self.required, "accept": self.accept}


def correlation_tests(pair: AlignedPair, p: PofParams) -> list[float]:
    """K correlation values, one per half-overlapping N-sample subset.

    Each raw subset is smoothed on both sides before correlating. A subset
    with zero variance after smoothing counts as rho = -1.
    """
    need = p.samples_needed
    if len(pair) < need:
        raise InsufficientSamplesError(len(pair), need)
    sa = split_subsets(pair.a[:need], p.N)
    sb = split_subsets(pair.b[:need], p.N)
    rhos = []
    for xa, xb in zip(sa, sb):
        try:
            rhos.append(pearson(moving_average(xa, p.M), moving_average(xb, p.M)))
        except DegenerateInputError:
            rhos.append(DEGENERATE_RHO)
    return rhos


def decide(rhos: Sequence[float], tau: float, alpha: float) -> PofDecision:
    if len(rhos) == 0:
        raise ValueError("no correlation values")
    K = len(rhos)
    need = required_passes(K, alpha)
    passed = sum(1 for r in rhos if r >= tau)
    return PofDecision(tuple(float(r) for r in rhos), passed, need, passed >= need)


def verify_pair(pair: AlignedPair, p: PofParams) -> PofDecision:
    return decide(correlation_tests(pair, p), p.tau, p.alpha)


def _binom_terms(f: float, K: int) -> list[float]:
    if f <= 0.0:
        return [1.0] + [0.0] * K
    if f >= 1.0:
        return [0.0] * K + [1.0]
    if K <= 1000:
        g = 1.0 - f
        return [math.comb(K, x) * f**x * g ** (K - x) for x in range(K + 1)]
    lf, lg = math.log(f), math.log1p(-f)
    lk = math.lgamma(K + 1)
    return [math.exp(lk - math.lgamma(x + 1) - math.lgamma(K - x + 1) + x * lf + (K - x) * lg)
            for x in range(K + 1)]


def pass_probability(f: float, K: int, alpha: float) -> float:
    """Probability that at least ceil(alpha K) of K independent tests pass."""
    if not 0.0 <= f <= 1.0:
        raise ValueError("f must lie in [0, 1]")
    if K < 1:
        raise ValueError("K must be >= 1")
    need = required_passes(K, alpha)
    terms = _binom_terms(f, K)
    return min(1.0, math.fsum(terms[need:]))


def _tail_table(f: float, K: int) -> tuple[list[float], list[float]]:
    """Upper and lower binomial tails for j = 1..K (index j-1).

    ``upper[j-1]`` is pass_probability(f, K, j/K); ``lower[j-1]`` is its
    complement, summed directly so that tiny miss rates keep their precision
    instead of rounding to 0 as ``1 - upper`` would.
    """
    terms = _binom_terms(f, K)
    upper = [min(1.0, math.fsum(terms[j:])) for j in range(1, K + 1)]
    lower = [min(1.0, math.fsum(terms[:j])) for j in range(1, K + 1)]
    return upper, lower


def model_threshold(d_ref: float, d_corr: float) -> float:
    if d_ref < 0 or d_corr <= 0:
        raise ValueError("need d_ref >= 0 and d_corr > 0")
    return math.exp(-d_ref / d_corr)


def estimate_pass_rate(train: Sequence[float], tau: float) -> float:
    r = np.asarray(train, dtype=float)
    if r.size == 0:
        raise ValueError("empty training set")
    return float(np.count_nonzero(r >= tau)) / r.size


@dataclass(frozen=True)
class TuneResult:
    tau: float
    K: int
    alpha: float
    eer: float
    f_C: float
    f_M: float
    F_C: float = float("nan")
    F_M: float = float("nan")

    def params(self, N: int = 400, M: int = 20) -> PofParams:
        return PofParams(N=N, M=M, K=self.K, tau=self.tau, alpha=self.alpha)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in ("F_C", "F_M")}
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> TuneResult:
        d = json.loads(text)
        return cls(float(d["tau"]), int(d["K"]), float(d["alpha"]), float(d["eer"]),
                   float(d["f_C"]), float(d["f_M"]))


def feasible_taus(train_C, train_M, grid=TAU_GRID) -> list[tuple[float, float, float]]:
    """``(tau, f_C, f_M)`` for grid thresholds with f_C > 0.5 and f_M < 0.5."""
    out = []
    for tau in grid:
        fc = estimate_pass_rate(train_C, tau)
        fm = estimate_pass_rate(train_M, tau)
        if fc > 0.5 and fm < 0.5:
            out.append((tau, fc, fm))
    return out


def tune(train_C: Sequence[float], train_M: Sequence[float], K_max: int = 40,
         strategy: str = "eer", d_ref: float | None = None,
         d_corr: float | None = None) -> TuneResult:
    """Search (tau, K, alpha) minimising max(1 - F_C, F_M).

    tau runs over the 0.01 grid restricted to f_C > 0.5 and f_M < 0.5, K over
    1..K_max and alpha over j/K. Ties prefer smaller K, then a larger
    F_C - F_M gap, then smaller tau, then smaller alpha.

    With ``strategy="gap"`` tau is fixed at ``model_threshold(d_ref, d_corr)``
    and (K, alpha) maximise F_C - F_M instead.
    """
    if len(train_C) == 0 or len(train_M) == 0:
        raise ValueError("both training sets must be nonempty")
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    if strategy == "gap":
        if d_ref is None or d_corr is None:
            raise ValueError("gap strategy needs d_ref and d_corr")
        tau = model_threshold(d_ref, d_corr)
        cands = [(tau, estimate_pass_rate(train_C, tau), estimate_pass_rate(train_M, tau))]
    elif strategy == "eer":
        cands = feasible_taus(train_C, train_M)
        if not cands:
            raise InseparableTrainingError(
                "no tau on the 0.01 grid has f_C > 0.5 and f_M < 0.5; "
                "legitimate and adversary correlations overlap too much"
            )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    best_key = None
    best = None
    for tau, fc, fm in cands:
        for K in range(1, K_max + 1):
            tc, miss = _tail_table(fc, K)
            tm, _ = _tail_table(fm, K)
            for j in range(1, K + 1):
                Fc, Fm = tc[j - 1], tm[j - 1]
                eer = max(miss[j - 1], Fm)
                gap = Fc - Fm
                if strategy == "eer":
                    key = (eer, K, -gap, tau, j / K)
                else:
                    key = (-gap, K, tau, j / K)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (tau, K, j / K, eer, fc, fm, Fc, Fm)
    return TuneResult(*best)

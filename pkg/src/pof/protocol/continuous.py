"""Repeated verification over long RSS streams after admission."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..channel import RssTrace
from ..sigproc import AlignmentError, align
from ..verify import PofDecision, PofParams, verify_pair


@dataclass(frozen=True)
class WindowVerdict:
    index: int
    start_t: float
    accept: bool | None  # None: window skipped
    decision: PofDecision | None = None
    diagnostic: str = ""


def _as_arrays(stream):
    if isinstance(stream, RssTrace):
        return stream.times, stream.rss
    t, x = stream
    return np.asarray(t, dtype=float), np.asarray(x, dtype=float)


def continuous_verification(params: PofParams, stream_v, stream_c, rate: float,
                            tol: float | None = None) -> Iterator[WindowVerdict]:
    """One verdict per consecutive window of ``(K+1) N / 2`` verifier samples.

    Streams are ``RssTrace`` objects or ``(times, rss)`` pairs and may contain
    gaps. A window in which either stream has a gap longer than one period
    plus ``tol`` is skipped with a diagnostic. Iteration stops after the
    first rejection, which revokes membership.
    """
    tv, xv = _as_arrays(stream_v)
    tc, xc = _as_arrays(stream_c)
    if len(tv) == 0 or len(tc) == 0:
        return
    period = 1.0 / rate
    if tol is None:
        tol = 0.5 * period
    L = params.samples_needed
    span = L * period
    t0 = tv[0]
    index = 0
    while t0 + span - period <= tv[-1] + 1e-9:
        t1 = t0 + span
        mv = (tv >= t0 - 1e-9) & (tv < t1 - 1e-9)
        mc = (tc >= t0 - tol) & (tc < t1 + tol)
        wv_t, wc_t = tv[mv], tc[mc]
        diag = ""
        for name, w in (("verifier", wv_t), ("candidate", wc_t)):
            if len(w) < 2:
                diag = f"{name} stream has no samples in window"
                break
            steps = np.diff(w)
            edges = np.array([w[0] - t0, t1 - period - w[-1]])
            if steps.max() > period + tol or np.any(edges > tol + 1e-9):
                worst = max(float(steps.max()), float(edges.max()) + period)
                diag = f"{name} stream gap of {worst:.3f} s exceeds tolerance"
                break
        if diag:
            yield WindowVerdict(index, float(t0), None, None, diag)
        else:
            try:
                pair = align(RssTrace(wv_t, xv[mv], rate), RssTrace(wc_t, xc[mc], rate), tol)
                decision = verify_pair(pair, params)
            except (AlignmentError, ValueError) as exc:
                yield WindowVerdict(index, float(t0), None, None, f"window skipped: {exc}")
            else:
                yield WindowVerdict(index, float(t0), decision.accept, decision)
                if not decision.accept:
                    return
        index += 1
        t0 = t1

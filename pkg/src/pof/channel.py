"""Generative RF channel: log-distance path loss, a correlated shadow field and
per-receiver small-scale residue.

The shadow field is a zero-mean Gaussian process over (x, y, t) with the
separable covariance

    sigma^2 * exp(-|dp| / d_corr) * exp(-|dt| / t_corr)

realised as a sum of random sinusoids whose spatial wave vectors are drawn
from the 2-D spectral density of the exponential kernel and whose temporal
frequencies are Cauchy distributed (the spectrum of the exponential in time).
Every realisation is a deterministic function of ``(seed, x, y, t)``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _fieldkernel
from .kinematics import Route, position_at


class NearFieldWarning(UserWarning):
    """A transmitter-receiver distance below ``d0`` was clamped."""


class TraceError(ValueError):
    """An RSS trace violates its invariants or fails to parse."""

    def __init__(self, msg: str, sample_index: int | None = None):
        super().__init__(msg)
        self.sample_index = sample_index


@dataclass(frozen=True)
class PathLossParams:
    d0: float = 1.0
    L_d0: float = 40.0
    beta: float = 3.0
    sigma_shadow: float = 6.0
    tx_power: float = 43.0

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.sigma_shadow < 0:
            raise ValueError("sigma_shadow must be non-negative")


@dataclass(frozen=True)
class ShadowFieldParams:
    d_corr: float = 53.35
    t_corr: float = 2.0
    seed: int = 0
    n_features: int = 2048

    def __post_init__(self):
        if self.d_corr <= 0:
            raise ValueError("d_corr must be positive")
        if self.t_corr <= 0:
            raise ValueError("t_corr must be positive")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")


def path_loss(d_tr, p: PathLossParams, return_flag: bool = False):
    """Deterministic log-distance path loss in dB.

    Distances below ``d0`` are clamped to ``d0``; a ``NearFieldWarning`` is
    emitted, or the clamp mask is returned when ``return_flag`` is set.
    """
    d = np.asarray(d_tr, dtype=float)
    clamped = d < p.d0
    if np.any(clamped) and not return_flag:
        warnings.warn(f"distance below d0={p.d0} m clamped", NearFieldWarning, stacklevel=2)
    loss = p.L_d0 + 10.0 * p.beta * np.log10(np.maximum(d, p.d0) / p.d0)
    if loss.ndim == 0:
        loss = float(loss)
        clamped = bool(clamped)
    return (loss, clamped) if return_flag else loss


def spatial_correlation(d, d_corr: float):
    """Exponential shadowing correlation at separation ``d``."""
    return np.exp(-np.asarray(d, dtype=float) / d_corr)


def temporal_correlation(dt, t_corr: float):
    return np.exp(-np.abs(np.asarray(dt, dtype=float)) / t_corr)


def field_correlation(dd, dt, d_corr: float, t_corr: float):
    """Model correlation between two field queries ``dd`` meters and ``dt`` seconds apart."""
    return spatial_correlation(dd, d_corr) * temporal_correlation(dt, t_corr)


class ShadowField:
    """Seeded realisation of the spatio-temporal shadow field (dB)."""

    def __init__(self, params: ShadowFieldParams, sigma: float):
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.params = params
        self.sigma = float(sigma)
        rng = np.random.default_rng(params.seed)
        J = params.n_features
        # radial wavenumber: CDF 1 - (1 + (k d)^2)^(-1/2) for the 2-D exponential kernel
        u = rng.random(J)
        k = np.sqrt(1.0 / (1.0 - u) ** 2 - 1.0) / params.d_corr
        theta = rng.uniform(0.0, 2.0 * np.pi, J)
        self._kx = k * np.cos(theta)
        self._ky = k * np.sin(theta)
        self._nu = np.tan(np.pi * (rng.random(J) - 0.5)) / params.t_corr
        self._phase = rng.uniform(0.0, 2.0 * np.pi, J)
        self._amp = self.sigma * math.sqrt(2.0 / J)

    def _prep(self, pos, t):
        pos = np.asarray(pos, dtype=float)
        scalar = pos.ndim == 1
        pos = pos.reshape(-1, 2)
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(pos),))
        return scalar, np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]), np.ascontiguousarray(t)

    def sample(self, pos, t):
        """Field value(s) at position(s) ``pos`` (shape ``(2,)`` or ``(n, 2)``) and time(s) ``t``."""
        scalar, x, y, tt = self._prep(pos, t)
        if self.sigma == 0:
            out = np.zeros(len(x))
        else:
            out = _fieldkernel.field_exact(x, y, tt, self._kx, self._ky, self._nu, self._phase, self._amp)
        return float(out[0]) if scalar else out

    def sample_along(self, pos, t):
        """Like :meth:`sample` for an ordered sequence of nearby points.

        Uniformly stepped stretches reuse a phase rotor; results match
        :meth:`sample` to ~1e-9 dB.
        """
        scalar, x, y, tt = self._prep(pos, t)
        if self.sigma == 0:
            return np.zeros(len(x))
        out = _fieldkernel.field_along(x, y, tt, self._kx, self._ky, self._nu, self._phase, self._amp)
        return float(out[0]) if scalar else out


def sample_shadow_field(field: ShadowField, pos, t):
    return field.sample(pos, t)


def cholesky_field_samples(points, d_corr: float, t_corr: float, sigma: float = 1.0,
                           size: int = 1, seed=None) -> np.ndarray:
    """Exact GP draws at ``points`` (rows of ``x, y, t``) by Cholesky factorisation.

    Slow reference generator, limited to 2000 points. Returns ``(size, n)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n > 2000:
        raise ValueError("cholesky reference is limited to 2000 points")
    dd = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    dt = pts[:, None, 2] - pts[None, :, 2]
    cov = sigma**2 * field_correlation(dd, dt, d_corr, t_corr)
    L = np.linalg.cholesky(cov + 1e-10 * sigma**2 * np.eye(n))
    z = np.random.default_rng(seed).standard_normal((size, n))
    return z @ L.T


@dataclass(frozen=True, eq=False)
class RssTrace:
    """Timestamped RSS samples (dB) collected at a fixed rate by one vehicle."""

    times: np.ndarray
    rss: np.ndarray
    rate: float
    vehicle_id: str = ""
    spacing_tol: float = 0.1

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        rss = np.array(self.rss, dtype=float).reshape(-1)
        times.setflags(write=False)
        rss.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rss", rss)
        if self.rate <= 0:
            raise TraceError("rate must be positive")
        if len(times) != len(rss):
            raise TraceError("times and rss differ in length")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(rss))):
            raise TraceError("trace contains non-finite values")
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                i = int(np.argmax(steps <= 0))
                raise TraceError(f"timestamps not strictly increasing at sample {i + 1}", i + 1)
            period = 1.0 / self.rate
            bad = np.abs(steps - period) > self.spacing_tol * period
            if np.any(bad):
                i = int(np.argmax(bad))
                raise TraceError(
                    f"sample spacing {steps[i]:.6f} s at sample {i + 1} deviates from 1/rate={period:.6f} s",
                    i + 1,
                )

    def __len__(self) -> int:
        return len(self.times)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def shifted(self, dt: float, vehicle_id: str | None = None) -> RssTrace:
        """Same samples with timestamps moved by ``dt`` seconds."""
        return RssTrace(self.times + dt, self.rss, self.rate,
                        self.vehicle_id if vehicle_id is None else vehicle_id, self.spacing_tol)

    def head(self, n: int) -> RssTrace:
        return RssTrace(self.times[:n], self.rss[:n], self.rate, self.vehicle_id, self.spacing_tol)

    def window(self, t0: float, t1: float) -> RssTrace:
        keep = (self.times >= t0) & (self.times < t1)
        return RssTrace(self.times[keep], self.rss[keep], self.rate, self.vehicle_id, self.spacing_tol)


def _noise_rng(seed: int, vehicle_id: str, t_start: float) -> np.random.Generator:
    key = int(round(t_start * 1000.0)) + (1 << 40)
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(vehicle_id.encode()), key])


def serving_distance(positions: np.ndarray, stations) -> np.ndarray:
    """Distance from each position to its nearest station."""
    st = np.asarray(stations, dtype=float).reshape(-1, 2)
    if len(st) == 0:
        raise ValueError("at least one base station is required")
    d = np.hypot(positions[:, None, 0] - st[None, :, 0], positions[:, None, 1] - st[None, :, 1])
    return d.min(axis=1)


def generate_rss_trace(
    route: Route,
    stations: Sequence[Sequence[float]],
    p: PathLossParams,
    field: ShadowField,
    rate: float,
    small_scale_std: float,
    seed: int,
    vehicle_id: str = "",
    t_start: float | None = None,
    n_samples: int | None = None,
    clock_offset: float = 0.0,
) -> RssTrace:
    """RSS samples along ``route``.

    Samples are taken at local times ``t_start + i / rate``; the vehicle's
    clock reads true time plus ``clock_offset``, so sample ``i`` is taken at
    true time ``t_start + i / rate - clock_offset`` and timestamped with the
    local reading. RSS = tx_power - path_loss(nearest station) - shadow +
    small-scale residue. The residue stream is keyed by
    ``(seed, vehicle_id, t_start)``.
    """
    if len(np.asarray(stations).reshape(-1)) == 0:
        raise ValueError("at least one base station is required")
    if t_start is None:
        t_start = route.start + clock_offset
    if n_samples is None:
        n_samples = int(math.floor((route.end + clock_offset - t_start) * rate + 1e-9)) + 1
    if n_samples < 2:
        raise ValueError("route span shorter than one sample period")
    local = t_start + np.arange(n_samples) / rate
    true_t = local - clock_offset
    pos = position_at(route, true_t)
    loss, _ = path_loss(serving_distance(pos, stations), p, return_flag=True)
    shadow = field.sample_along(pos, true_t)
    rss = p.tx_power - loss - shadow
    if small_scale_std > 0:
        rss = rss + _noise_rng(seed, vehicle_id, t_start).normal(0.0, small_scale_std, n_samples)
    return RssTrace(local, rss, rate, vehicle_id)


def write_trace_csv(trace: RssTrace, path: str | Path) -> Path:
    """Write ``t_s,rss_db`` rows plus a ``<name>.json`` metadata sidecar."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "rss_db"])
        for t, r in zip(trace.times, trace.rss):
            w.writerow([repr(float(t)), repr(float(r))])
    meta = {"rate_hz": trace.rate, "vehicle_id": trace.vehicle_id,
            "start_t_s": float(trace.times[0]) if len(trace) else None}
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return sidecar


def read_trace_csv(path: str | Path, rate: float | None = None, vehicle_id: str | None = None) -> RssTrace:
    """Read a trace CSV; rate and id come from the sidecar unless given."""
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"{path}: trace file does not exist")
    sidecar = path.with_suffix(".json")
    meta = {}
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TraceError(f"{sidecar}:{exc.lineno}: {exc.msg}") from None
    if rate is None:
        if "rate_hz" not in meta:
            raise TraceError(f"{path}: no rate given and no rate_hz in {sidecar.name}")
        rate = float(meta["rate_hz"])
    if vehicle_id is None:
        vehicle_id = str(meta.get("vehicle_id", path.stem))
    times, rss = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_s", "rss_db"]:
            raise TraceError(f"{path}:1: expected header 't_s,rss_db', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise TraceError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t, r = float(row[0]), float(row[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: cannot parse {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(r)):
                raise TraceError(f"{path}:{lineno}: non-finite value")
            times.append(t)
            rss.append(r)
    if not times:
        raise TraceError(f"{path}: no samples")
    try:
        return RssTrace(times, rss, rate, vehicle_id)
    except TraceError as exc:
        where = f"{path}:{exc.sample_index + 2}" if exc.sample_index is not None else str(path)
        raise TraceError(f"{where}: {exc}", exc.sample_index) from None

"""Vehicle routes, motion generation and the geometric following predicate.

Positions are planar meters in a local tangent plane. Routes interpolate
linearly between their points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_V_MAX = 60.0


class RouteError(ValueError):
    """A route violates its construction invariants."""


class OutOfRangeError(ValueError):
    """A time query falls outside the span of a route."""


class DisjointSpansError(ValueError):
    """Two routes do not overlap in time."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Route:
    """Time-ordered 2-D positions of one vehicle."""

    times: np.ndarray
    positions: np.ndarray
    v_max: float = DEFAULT_V_MAX

    def __post_init__(self):
        times = _frozen(self.times).reshape(-1)
        positions = _frozen(self.positions).reshape(-1, 2)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if len(times) < 2:
            raise RouteError("a route needs at least 2 points")
        if len(positions) != len(times):
            raise RouteError("times and positions differ in length")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(positions))):
            raise RouteError("route contains non-finite values")
        dt = np.diff(times)
        if np.any(dt <= 0):
            raise RouteError("route timestamps must be strictly increasing")
        speeds = np.linalg.norm(np.diff(positions, axis=0), axis=1) / dt
        if np.any(speeds > self.v_max * (1 + 1e-9)):
            i = int(np.argmax(speeds))
            raise RouteError(
                f"speed {speeds[i]:.2f} m/s between points {i} and {i + 1} "
                f"exceeds v_max={self.v_max} m/s"
            )

    @classmethod
    def from_points(cls, points: Iterable[tuple[Sequence[float], float]], v_max: float = DEFAULT_V_MAX) -> Route:
        """Build from ``((x, y), t)`` pairs."""
        pts = list(points)
        return cls(
            times=[t for _, t in pts],
            positions=[tuple(p) for p, _ in pts],
            v_max=v_max,
        )

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.times)

    def position_at(self, t):
        return position_at(self, t)

    def translated(self, offset: Sequence[float]) -> Route:
        return Route(self.times, self.positions + np.asarray(offset, dtype=float), self.v_max)


def position_at(route: Route, t):
    """Linearly interpolated position(s) at time ``t``.

    ``t`` may be a scalar (returns shape ``(2,)``) or an array (returns
    ``(n, 2)``). Values at route sample times are returned exactly.
    """
    ts = np.asarray(t, dtype=float)
    lo, hi = route.times[0], route.times[-1]
    if np.any(ts < lo) or np.any(ts > hi) or np.any(np.isnan(ts)):
        raise OutOfRangeError(f"t outside route span [{lo}, {hi}]")
    x = np.interp(ts, route.times, route.positions[:, 0])
    y = np.interp(ts, route.times, route.positions[:, 1])
    return np.stack([x, y], axis=-1)


def separation(route_a: Route, route_b: Route, t):
    """Euclidean distance between two routes at time(s) ``t``."""
    d = position_at(route_a, t) - position_at(route_b, t)
    return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True)
class FollowingResult:
    following: bool
    max_separation: float
    fraction_within: float

    def __bool__(self) -> bool:
        return self.following


def overlap(route_a: Route, route_b: Route) -> tuple[float, float]:
    lo = max(route_a.start, route_b.start)
    hi = min(route_a.end, route_b.end)
    if lo > hi:
        raise DisjointSpansError("routes do not overlap in time")
    return lo, hi


def is_following(
    route_v: Route,
    route_c: Route,
    d_ref: float,
    sample_dt: float = 0.05,
    window: tuple[float, float] | None = None,
) -> FollowingResult:
    """Ground-truth following check, sampled every ``sample_dt`` seconds.

    The candidate follows when its separation from the verifier stays within
    ``d_ref`` at every sampled instant of the common span (optionally clipped
    to ``window``).
    """
    if sample_dt <= 0:
        raise ValueError("sample_dt must be positive")
    lo, hi = overlap(route_v, route_c)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
        if lo > hi:
            raise DisjointSpansError("window does not intersect the route overlap")
    n = int(math.floor((hi - lo) / sample_dt + 1e-9))
    ts = lo + sample_dt * np.arange(n + 1)
    # float steps can land a hair past hi; keep the grid inside and end exactly on hi
    ts = np.append(ts[ts < hi], hi)
    sep = separation(route_v, route_c, ts)
    within = sep <= d_ref
    return FollowingResult(bool(np.all(within)), float(sep.max()), float(within.mean()))


class Polyline:
    """Arc-length parameterised path; extends linearly past both ends."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(v) < 2:
            raise ValueError("a path needs at least 2 vertices")
        seg = np.diff(v, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths <= 0):
            raise ValueError("path has repeated vertices")
        self.vertices = v
        self._dirs = seg / lengths[:, None]
        self._s = np.concatenate([[0.0], np.cumsum(lengths)])

    @property
    def length(self) -> float:
        return float(self._s[-1])

    @property
    def vertex_arclengths(self) -> np.ndarray:
        return self._s.copy()

    def point_at(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._dirs) - 1)
        base = self.vertices[idx]
        return base + (s - self._s[idx])[..., None] * self._dirs[idx]


@dataclass(frozen=True)
class KinematicSpec:
    """Constant-speed drive along a polyline.

    ``start_offset`` is the arc length reached at ``start_time``; negative
    offsets and times before ``start_time`` extrapolate along the path.
    """

    path: tuple
    speed: float
    start_offset: float = 0.0
    start_time: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        object.__setattr__(self, "path", tuple(tuple(map(float, p)) for p in self.path))

    def arclength_at(self, t):
        return self.start_offset + self.speed * (np.asarray(t, dtype=float) - self.start_time)

    def route(self, t0: float, t1: float, dt: float = 1.0, seed: int | None = None,
              v_max: float = DEFAULT_V_MAX) -> Route:
        """Sample the drive on ``[t0, t1]``; path corners are included exactly."""
        poly = Polyline(self.path)
        n = max(int(math.ceil((t1 - t0) / dt - 1e-9)), 1)
        ts = np.linspace(t0, t1, n + 1)
        corner_t = self.start_time + (poly.vertex_arclengths[1:-1] - self.start_offset) / self.speed
        corner_t = corner_t[(corner_t > t0) & (corner_t < t1)]
        ts = np.unique(np.concatenate([ts, corner_t]))
        pos = poly.point_at(self.arclength_at(ts))
        if self.jitter > 0:
            rng = np.random.default_rng(seed)
            pos = pos + rng.normal(0.0, self.jitter, pos.shape)
        return Route(ts, pos, v_max=v_max)


def route_from_arclength(path, times, arclengths, v_max: float = DEFAULT_V_MAX) -> Route:
    """Route that sits at ``arclengths[i]`` along ``path`` at ``times[i]``."""
    poly = Polyline(path)
    return Route(np.asarray(times, dtype=float), poly.point_at(arclengths), v_max=v_max)


def project_latlon(lat, lon, origin: tuple[float, float] | None = None) -> np.ndarray:
    """Equirectangular projection to meters about ``origin`` (default: centroid)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    lat0, lon0 = origin if origin is not None else (float(lat.mean()), float(lon.mean()))
    x = np.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = np.radians(lat - lat0) * EARTH_RADIUS_M
    return np.stack([x, y], axis=-1)


def write_route_csv(route: Route, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "x_m", "y_m"])
        for t, (x, y) in zip(route.times, route.positions):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y))])


def read_route_csv(path: str | Path, v_max: float = DEFAULT_V_MAX) -> Route:
    """Read a ``t_s,x_m,y_m`` CSV (or ``t_s,lat,lon``, which is projected)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise RouteError(f"{path}:{lineno}: {exc}") from None
    data = np.asarray(rows, dtype=float)
    if header == ["t_s", "x_m", "y_m"]:
        return Route(data[:, 0], data[:, 1:3], v_max=v_max)
    if header == ["t_s", "lat", "lon"]:
        return Route(data[:, 0], project_latlon(data[:, 1], data[:, 2]), v_max=v_max)
    raise RouteError(f"{path}:1: unexpected header {header!r}")

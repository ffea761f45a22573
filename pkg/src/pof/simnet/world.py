"""Simulated drive: a straight freeway, roadside base stations, a shared
shadow field and the kinematics of every scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..channel import (PathLossParams, RssTrace, ShadowField, ShadowFieldParams,
                       generate_rss_trace)
from ..kinematics import KinematicSpec, Route, is_following, route_from_arclength

SCENARIO_KINDS = ("none", "remote", "following-afar", "partially-following",
                  "mitm-known", "mitm-parallel", "mitm-delayed")


def default_stations() -> tuple:
    # one tower every 2 km on alternating sides of the road
    return tuple((float(x), 500.0 if i % 2 == 0 else -500.0)
                 for i, x in enumerate(range(-60000, 20001, 2000)))


@dataclass(frozen=True)
class World:
    path: tuple = ((-60000.0, 0.0), (20000.0, 0.0))
    stations: tuple = field(default_factory=default_stations)
    pathloss: PathLossParams = PathLossParams()
    shadow: ShadowFieldParams = ShadowFieldParams()
    rate: float = 20.0
    small_scale_std: float = 4.0
    speed: float = 25.0
    d_ref: float = 25.0
    clock_offset_bound: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(tuple(map(float, p)) for p in self.path))
        object.__setattr__(self, "stations", tuple(tuple(map(float, s)) for s in self.stations))
        if not self.stations:
            raise ValueError("world needs at least one base station")
        if self.rate <= 0 or self.speed <= 0:
            raise ValueError("rate and speed must be positive")
        if self.clock_offset_bound < 0:
            raise ValueError("clock_offset_bound must be non-negative")

    def shadow_field(self, seed: int) -> ShadowField:
        """Field realisation for one run; all vehicles of the run share it."""
        return ShadowField(replace(self.shadow, seed=_mix(seed, 0x5EED)), self.pathloss.sigma_shadow)

    def verifier_spec(self) -> KinematicSpec:
        return KinematicSpec(self.path, self.speed)

    def behind(self, gap: float) -> KinematicSpec:
        """Same drive as the verifier, ``gap`` meters behind it."""
        return KinematicSpec(self.path, self.speed, start_offset=-gap)


def _mix(seed: int, salt: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, salt]).generate_state(1)[0])


def clock_offsets(world: World, seed: int, parties) -> dict:
    """Per-party clock offset, uniform within the world's bound."""
    rng = np.random.default_rng(_mix(seed, 0xC10C))
    b = world.clock_offset_bound
    return {p: float(rng.uniform(-b, b)) if b > 0 else 0.0 for p in parties}


@dataclass(frozen=True)
class Motion:
    """How a party moves and when its radio observations are made.

    ``field_lag`` shifts the shadow-field time of every sample into the
    past: a remote adversary drives the same road ``field_lag`` seconds
    before the verifier and later relabels its timestamps.
    """

    route: Route
    field_lag: float = 0.0


def straight_motion(spec: KinematicSpec, t0: float, t1: float) -> Motion:
    return Motion(spec.route(t0, t1, dt=1.0))


def partial_motion(world: World, near: float, far: float, t_switch: float,
                   t0: float, t1: float, dt: float = 0.05) -> Motion:
    """Near the verifier until ``t_switch``, then abruptly ``far`` behind it."""
    ts = np.arange(int(math.ceil((t1 - t0) / dt)) + 1) * dt + t0
    ts[-1] = t1
    s_v = world.verifier_spec().arclength_at(ts)
    s = np.where(ts < t_switch, s_v - near, s_v - far)
    # the switch is instantaneous, which no real vehicle can do
    return Motion(route_from_arclength(world.path, ts, s, v_max=1e9))


def remote_motion(world: World, lead: float, t0: float, t1: float) -> Motion:
    """The verifier's own positions, observed ``lead`` seconds earlier."""
    return Motion(world.verifier_spec().route(t0, t1, dt=1.0), field_lag=lead)


def collect(world: World, motion: Motion, shadow: ShadowField, seed: int, vehicle_id: str,
            t_start_local: float, n_samples: int, clock_offset: float) -> RssTrace:
    """Trace of ``n_samples`` starting at local time ``t_start_local``."""
    route = motion.route
    if motion.field_lag:
        route = Route(route.times - motion.field_lag, route.positions, route.v_max)
    tr = generate_rss_trace(route, world.stations, world.pathloss, shadow, world.rate,
                            world.small_scale_std, seed, vehicle_id,
                            t_start=t_start_local - motion.field_lag, n_samples=n_samples,
                            clock_offset=clock_offset)
    return tr.shifted(motion.field_lag) if motion.field_lag else tr


def following_truth(world: World, verifier: Motion, other: Motion, t0: float, t1: float) -> dict:
    res = is_following(verifier.route, other.route, world.d_ref, window=(t0, t1))
    return {"following": res.following, "max_separation": res.max_separation,
            "fraction_within": res.fraction_within}

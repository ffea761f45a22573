import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pof.kinematics import (DisjointSpansError, KinematicSpec, OutOfRangeError, Route, RouteError,
                            is_following, position_at, project_latlon, read_route_csv,
                            separation, write_route_csv)

coord = st.floats(-1e4, 1e4, allow_nan=False)


def straight(offset=(0.0, 0.0), t1=10.0, speed=10.0):
    return Route([0.0, t1], [offset, (offset[0] + speed * t1, offset[1])])


def test_position_midpoint_and_endpoint():
    r = Route.from_points([((0, 0), 0.0), ((10, 0), 1.0)])
    assert position_at(r, 0.5) == pytest.approx([5, 0])
    assert np.array_equal(position_at(r, 1.0), [10.0, 0.0])


def test_position_second_segment():
    r = Route.from_points([((0, 0), 0.0), ((10, 0), 1.0), ((10, 20), 3.0)])
    assert position_at(r, 2.0) == pytest.approx([10, 10])


def test_position_vectorised():
    r = Route.from_points([((0, 0), 0.0), ((10, 0), 1.0)])
    assert position_at(r, [0.0, 0.25, 1.0]).shape == (3, 2)


@pytest.mark.parametrize("t", [-0.1, 1.1, float("nan")])
def test_position_out_of_range(t):
    r = Route.from_points([((0, 0), 0.0), ((10, 0), 1.0)])
    with pytest.raises(OutOfRangeError):
        position_at(r, t)


@pytest.mark.parametrize("times,pos", [
    ([0.0], [(0, 0)]),
    ([0.0, 0.0], [(0, 0), (1, 0)]),
    ([1.0, 0.0], [(0, 0), (1, 0)]),
    ([0.0, 1.0], [(0, 0), (100, 0)]),  # 100 m/s > 60 m/s
    ([0.0, 1.0], [(0, 0), (float("inf"), 0)]),
])
def test_route_invariants(times, pos):
    with pytest.raises(RouteError):
        Route(times, pos)


def test_v_max_is_configurable():
    Route([0.0, 1.0], [(0, 0), (100, 0)], v_max=120.0)


def test_separation_examples():
    a = straight()
    assert separation(a, a, 3.3) == 0
    assert separation(a, straight((0.0, 20.0)), np.linspace(0, 10, 7)) == pytest.approx(20)


def test_separation_from_kinematic_spec():
    path = ((0, 0), (5000, 0))
    a = KinematicSpec(path, 13.3, start_offset=140.0).route(0, 60, 0.5)
    b = KinematicSpec(path, 13.3, start_offset=100.0).route(0, 60, 0.5)
    assert separation(a, b, np.linspace(0, 60, 241)) == pytest.approx(40, abs=1e-9)


def test_is_following_examples():
    v = straight()
    assert is_following(v, straight((-20.0, 0.0)), 25).following
    res = is_following(v, straight((-40.0, 0.0)), 25)
    assert not res and res.max_separation == pytest.approx(40)


def test_is_following_ramp():
    v = straight(t1=10.0, speed=10.0)
    # gap grows linearly from 10 m to 30 m over the span
    c = Route([0.0, 10.0], [(-10.0, 0.0), (100.0 - 30.0, 0.0)])
    res = is_following(v, c, 25)
    assert not res.following
    assert res.max_separation == pytest.approx(30)
    assert res.fraction_within == pytest.approx(0.75, abs=0.01)


def test_is_following_window_and_disjoint():
    v = straight()
    late = Route([20.0, 30.0], [(0, 0), (1, 0)])
    with pytest.raises(DisjointSpansError):
        is_following(v, late, 25)
    c = Route([0.0, 10.0], [(-10.0, 0.0), (70.0, 0.0)])
    assert is_following(v, c, 25, window=(0.0, 5.0)).following


def test_corner_points_are_exact():
    spec = KinematicSpec(((0, 0), (100, 0), (100, 100)), 10.0)
    r = spec.route(0, 20, dt=3.0)
    assert 10.0 in r.times
    assert position_at(r, 10.0) == pytest.approx([100, 0])
    assert position_at(r, 15.0) == pytest.approx([100, 50])


def test_jitter_reproducible():
    spec = KinematicSpec(((0, 0), (1000, 0)), 10.0, jitter=0.5)
    a, b = spec.route(0, 10, 1.0, seed=3), spec.route(0, 10, 1.0, seed=3)
    assert np.array_equal(a.positions, b.positions)


def test_route_csv_roundtrip(tmp_path):
    r = KinematicSpec(((0, 0), (300, 400)), 12.5).route(0, 30, 0.7)
    p = tmp_path / "r.csv"
    write_route_csv(r, p)
    back = read_route_csv(p)
    assert np.array_equal(back.times, r.times) and np.array_equal(back.positions, r.positions)


def test_route_csv_latlon(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t_s,lat,lon\n0,40.0,-86.0\n10,40.0,-85.999\n")
    r = read_route_csv(p)
    # 0.001 degrees of longitude at 40 N is about 85 m
    assert np.hypot(*(r.positions[1] - r.positions[0])) == pytest.approx(85.2, abs=0.5)


def test_route_csv_bad_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_s,x_m,y_m\n0,0,0\n1,abc,0\n")
    with pytest.raises(RouteError, match=":3:"):
        read_route_csv(p)


def test_projection_centroid_origin():
    xy = project_latlon([10.0, 10.002], [20.0, 20.0])
    assert xy.mean(axis=0) == pytest.approx([0, 0], abs=1e-6)


@st.composite
def routes(draw):
    n = draw(st.integers(2, 6))
    dts = draw(st.lists(st.floats(0.5, 5.0), min_size=n - 1, max_size=n - 1))
    times = np.concatenate([[0.0], np.cumsum(dts)])
    pos = [(draw(st.floats(-50, 50)), draw(st.floats(-50, 50)))]
    for dt in dts:
        ang = draw(st.floats(0, 2 * math.pi))
        v = draw(st.floats(0, 30))
        x, y = pos[-1]
        pos.append((x + v * dt * math.cos(ang), y + v * dt * math.sin(ang)))
    return Route(times, pos)


@given(routes(), routes(), st.floats(0, 1))
def test_separation_symmetric(a, b, u):
    lo, hi = max(a.start, b.start), min(a.end, b.end)
    t = lo + u * (hi - lo)
    assert separation(a, b, t) == pytest.approx(separation(b, a, t))


@given(routes(), st.floats(0, 1000))
def test_self_following(r, d):
    assert is_following(r, r, d).following


@given(routes(), routes(), st.tuples(coord, coord), st.floats(0, 1))
def test_translation_invariance(a, b, shift, u):
    lo, hi = max(a.start, b.start), min(a.end, b.end)
    t = lo + u * (hi - lo)
    moved = separation(a.translated(shift), b.translated(shift), t)
    assert moved == pytest.approx(separation(a, b, t), abs=1e-6)


def test_following_grid_stays_inside_span():
    # 1.9 / 0.05 rounds so that the last grid step overshoots the route end
    r = Route([0.0, 1.9], [(0.0, 0.0), (0.0, 0.0)])
    res = is_following(r, r, 0.0)
    assert res.following and res.fraction_within == 1.0

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pof.protocol import SessionConfig
from pof.simnet import (AttackScenario, EventLoop, NetEvent, PassiveTap, Relay,
                        ScenarioError, World, distance_traces, pair_traces,
                        partially_following_sweep, run_simulation)
from pof.simnet.adversary import MitmDelayed, MitmKnownVerifier, MitmParallel
from pof.simnet.engine import WireFrame
from pof.verify import PofParams

WORLD = World()


def rate(scenario, seeds, world=WORLD, **kw):
    return np.mean([run_simulation(world, scenario, s, **kw).accepted for s in seeds])


@pytest.mark.slow
def test_legit_candidate_at_11m_accepted():
    assert rate(AttackScenario("none", candidate_distance=11.0), range(50)) >= 0.99


@pytest.mark.slow
def test_remote_prerecorded_40min_rejected():
    assert rate(AttackScenario("remote", pre_record_lead=2400.0), range(50)) == 0.0


@pytest.mark.slow
def test_mitm_delayed_rejected():
    reps = [run_simulation(WORLD, AttackScenario("mitm-delayed", variant="B"), s) for s in range(50)]
    assert all(r.verdict == "reject" for r in reps)


def test_mitm_known_cannot_read_candidate_report():
    for s in range(5):
        r = run_simulation(WORLD, AttackScenario("mitm-known"), s)
        assert r.verdict == "reject"
        assert r.wire["decrypt_attempts"] >= 1 and r.wire["leaked_plaintexts"] == 0


@pytest.mark.parametrize("strategy", ["forward-ciphertext", "resign-reply"])
def test_mitm_known_other_strategies_fail(strategy):
    for s in range(3):
        r = run_simulation(WORLD, AttackScenario("mitm-known", strategy=strategy), s)
        assert not r.accepted and r.wire["leaked_plaintexts"] == 0


def test_mitm_parallel_fails_timing_check():
    for s in range(5):
        r = run_simulation(WORLD, AttackScenario("mitm-parallel", variant="B"), s)
        assert r.verdict == "abort" and r.reason.startswith("stale-commit")


@pytest.mark.parametrize("strategy", ["forward-commit", "own-commit"])
def test_mitm_parallel_other_strategies_fail(strategy):
    for s in range(3):
        r = run_simulation(WORLD, AttackScenario("mitm-parallel", variant="B", strategy=strategy), s)
        assert not r.accepted


def test_passive_tap_relays_everything():
    tap = PassiveTap()
    for t in (b"\x00", b"\x01\x02"):
        assert tap.hook(WireFrame(0.0, "V", "C", t)) == [Relay()]


def test_following_afar_rejected_and_truth_negative():
    r = run_simulation(WORLD, AttackScenario("following-afar", follow_distance=250.0), 3)
    assert r.verdict == "reject"
    assert r.ground_truth["following"] is False


def test_legit_truth_positive():
    r = run_simulation(WORLD, AttackScenario("none", candidate_distance=15.0), 3)
    assert r.ground_truth["following"] and all(r.ground_truth["subset_following"])


def test_variant_b_legit_accepted():
    assert run_simulation(WORLD, AttackScenario("none", variant="B"), 2).accepted


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        AttackScenario("teleport")
    with pytest.raises(ScenarioError):
        AttackScenario("partially-following", theta=1.5)
    with pytest.raises(ScenarioError):
        AttackScenario("mitm-parallel", variant="A")
    with pytest.raises(ScenarioError, match="d_ref"):
        run_simulation(WORLD, AttackScenario("following-afar", follow_distance=20.0), 0)
    with pytest.raises(ScenarioError, match="rate"):
        run_simulation(WORLD, AttackScenario(), 0, SessionConfig(rate=10.0))


def test_event_loop_order_and_fifo():
    loop = EventLoop()
    seen = []
    for i, t in enumerate([2.0, 1.0, 1.0, 0.5, 1.0]):
        loop.schedule(NetEvent(t, "timer", "x", "x", i))
    loop.run(lambda ev: seen.append((ev.time, ev.payload)))
    assert seen == [(0.5, 3), (1.0, 1), (1.0, 2), (1.0, 4), (2.0, 0)]


def test_determinism_byte_identical():
    sc = AttackScenario("mitm-parallel", variant="B", strategy="own-commit")
    a = run_simulation(WORLD, sc, 11)
    b = run_simulation(WORLD, sc, 11)
    assert a.to_json() == b.to_json()
    assert a.transcript_jsonl() == b.transcript_jsonl()
    assert run_simulation(WORLD, sc, 12).transcript_jsonl() != a.transcript_jsonl()


def test_report_json_roundtrip():
    r = run_simulation(WORLD, AttackScenario(), 0)
    d = json.loads(r.to_json())
    assert d["verdict"] == r.verdict and d["rhos"] == r.rhos
    for line in r.transcript_jsonl().splitlines():
        json.loads(line)


def test_latency_shows_in_transcript():
    r = run_simulation(WORLD, AttackScenario(), 0, latency=0.25)
    sends = {rec["sha"]: rec["t"] for rec in r.transcript if rec["event"] == "send"}
    delivers = [(rec["sha"], rec["t"]) for rec in r.transcript if rec["event"] == "deliver"]
    assert delivers
    for dg, t in delivers:
        assert t - sends[dg] == pytest.approx(0.25)


def test_distance_traces_match_pair_traces():
    p = PofParams()
    tv, tcs = distance_traces(WORLD, [10.0, 40.0], 5, p)
    for d, tc in zip([10.0, 40.0], tcs):
        tv2, tc2 = pair_traces(WORLD, AttackScenario("none", candidate_distance=d), 5, p)
        assert np.array_equal(tv.rss, tv2.rss) and np.array_equal(tc.rss, tc2.rss)


def test_partial_sweep_endpoints():
    (t0, r0), (t1, r1) = partially_following_sweep(WORLD, [0.0, 1.0], runs=10, seed=1)
    assert (t0, r0) == (0.0, 0.0) and (t1, r1) == (1.0, 1.0)


@pytest.mark.slow
def test_partial_sweep_monotone_and_zero_up_to_04():
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    curve = partially_following_sweep(WORLD, grid, runs=20, seed=0)
    rates = [r for _, r in curve]
    assert all(a <= b for a, b in zip(rates, rates[1:])), curve
    assert all(r == 0.0 for t, r in curve if t <= 0.4)
    assert rates[-1] == 1.0


def test_partial_truth_matches_theta():
    r = run_simulation(WORLD, AttackScenario("partially-following", theta=0.5), 0)
    subs = r.ground_truth["subset_following"]
    assert subs[0] and not subs[-1]
    assert r.ground_truth["following"] is False


@pytest.mark.slow
def test_accepts_imply_following_windows():
    # over randomized scenarios, accepted subjects really followed in at least
    # alpha of the subset windows in 95% of accepting runs
    rng = np.random.default_rng(2024)
    alpha = PofParams().alpha
    accepted = good = 0
    for s in range(60):
        u = rng.uniform()
        if u < 0.4:
            sc = AttackScenario("none", candidate_distance=float(rng.uniform(5, 25)))
        elif u < 0.7:
            sc = AttackScenario("partially-following", theta=float(rng.uniform(0, 1)))
        else:
            sc = AttackScenario("following-afar", follow_distance=float(rng.uniform(60, 300)))
        r = run_simulation(WORLD, sc, s)
        if r.accepted:
            accepted += 1
            subs = r.ground_truth["subset_following"]
            good += np.mean(subs) >= alpha
    assert accepted >= 20
    assert good / accepted >= 0.95


@settings(max_examples=15)
@given(st.sampled_from(["mitm-known", "mitm-parallel", "mitm-delayed"]),
       st.integers(0, 10_000), st.data())
def test_adversary_never_reads_foreign_envelopes(kind, seed, data):
    variant = "A" if kind == "mitm-known" else "B"
    cls = {"mitm-known": MitmKnownVerifier, "mitm-parallel": MitmParallel,
           "mitm-delayed": MitmDelayed}[kind]
    strategy = data.draw(st.sampled_from(cls.STRATEGIES))
    r = run_simulation(WORLD, AttackScenario(kind, variant=variant, strategy=strategy), seed)
    assert r.wire["leaked_plaintexts"] == 0
    assert not r.accepted

"""Scenario assembly, the simulation entry point and its report."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..channel import RssTrace
from ..kinematics import is_following, route_from_arclength
from ..protocol.crypto import ToyCrypto
from ..protocol.session import SessionConfig
from ..sigproc import AlignmentError, align
from ..verify import InsufficientSamplesError, PofParams, correlation_tests, verify_pair
from .adversary import MitmDelayed, MitmKnownVerifier, MitmParallel, PassiveTap
from .engine import (DEFAULT_LATENCY, CandidateParty, EventLoop, NetEvent, Network,
                     Transcript, VerifierParty)
from .world import (SCENARIO_KINDS, Motion, World, clock_offsets, collect, partial_motion,
                    remote_motion, straight_motion)

MITM_KINDS = ("mitm-known", "mitm-parallel", "mitm-delayed")


class ScenarioError(ValueError):
    """Scenario and world are inconsistent."""


@dataclass(frozen=True)
class AttackScenario:
    kind: str = "none"
    variant: str = "A"
    candidate_distance: float = 15.0
    follow_distance: float = 250.0
    pre_record_lead: float = 60.0
    theta: float = 1.0
    pattern: str = "contiguous"
    strategy: str | None = None
    shift: float | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.variant not in ("A", "B"):
            raise ScenarioError(f"variant must be A or B, got {self.variant!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ScenarioError("theta must lie in [0, 1]")
        if self.pattern not in ("contiguous", "interleaved"):
            raise ScenarioError(f"unknown pattern {self.pattern!r}")
        if self.candidate_distance < 0 or self.follow_distance < 0 or self.pre_record_lead < 0:
            raise ScenarioError("distances and lead must be non-negative")
        if self.kind == "mitm-known" and self.variant != "A":
            raise ScenarioError("mitm-known targets the known-verifier variant A")
        if self.kind in ("mitm-parallel", "mitm-delayed") and self.variant != "B":
            raise ScenarioError(f"{self.kind} targets the commitment variant B")

    @property
    def label(self) -> str:
        return self.name or self.kind

    def check(self, world: World) -> None:
        if self.kind == "following-afar" and self.follow_distance <= world.d_ref:
            raise ScenarioError(
                f"following-afar distance {self.follow_distance} m must exceed d_ref={world.d_ref} m")
        if self.kind == "partially-following" and self.follow_distance <= world.d_ref:
            raise ScenarioError("partially-following far distance must exceed d_ref")

    @property
    def subject(self) -> str:
        return "C" if self.kind == "none" else "M"


@dataclass
class SimReport:
    scenario: dict
    seed: int
    subject: str
    verdict: str
    reason: str | None
    rhos: list | None
    passed_count: int | None
    ground_truth: dict
    sessions: dict
    aborts: list
    wire: dict
    transcript: list = field(repr=False, default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    @property
    def mean_rho(self) -> float | None:
        return float(np.mean(self.rhos)) if self.rhos else None

    def to_dict(self, with_transcript: bool = False) -> dict:
        d = asdict(self)
        if not with_transcript:
            d.pop("transcript")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.transcript)


def _span(world: World, scenario: AttackScenario, cfg: SessionConfig) -> tuple[float, float]:
    shift = scenario.shift if scenario.shift is not None else cfg.delta_t
    end = 30.0 + cfg.setup_lead + cfg.window_length + 3 * cfg.delta_t + shift + cfg.report_timeout
    return -30.0, end


def _subject_motion(world: World, scenario: AttackScenario, t0: float, t1: float,
                    window: tuple[float, float] | None):
    """Motion of the party whose admission is at stake (``None``: built lazily)."""
    k = scenario.kind
    if k == "none":
        return straight_motion(world.behind(scenario.candidate_distance), t0, t1)
    if k == "remote":
        return remote_motion(world, scenario.pre_record_lead, t0, t1)
    if k == "partially-following":
        if window is None:
            return None
        return _partial(world, scenario, window, t0, t1)
    return straight_motion(world.behind(scenario.follow_distance), t0, t1)


def _partial(world, scenario, window, t0, t1) -> Motion:
    ws, we = window
    near, far = scenario.candidate_distance, scenario.follow_distance
    if scenario.pattern == "contiguous":
        return partial_motion(world, near, far, ws + scenario.theta * (we - ws), t0, t1)
    # interleaved: near for the first theta of every block of one subset hop
    dt = 0.05
    ts = t0 + dt * np.arange(int(math.ceil((t1 - t0) / dt)) + 1)
    block = 10.0
    phase = np.mod(ts - ws, block) / block
    gap = np.where(phase < scenario.theta, near, far)
    if scenario.theta >= 1.0:
        gap[:] = near
    s = world.verifier_spec().arclength_at(ts) - gap
    return Motion(route_from_arclength(world.path, ts, s, v_max=1e9))


def _source(world, motion_or_builder, shadow, seed, vid):
    cache = {}

    def source(start_local: float, n: int, offset: float) -> RssTrace:
        m = motion_or_builder
        if callable(m):
            key = "motion"
            if key not in cache:
                start_true = start_local - offset
                cache[key] = m((start_true, start_true + n / world.rate))
            m = cache[key]
        return collect(world, m, shadow, seed, vid, start_local, n, offset)

    return source


def _truth(world, scenario, v_motion, s_motion, window, params: PofParams) -> dict:
    if scenario.kind == "remote" or s_motion is None:
        return {"following": False, "max_separation": None, "fraction_within": 0.0,
                "subset_following": [False] * params.K, "note": "adversary is not on the road"}
    ws, we = window
    res = is_following(v_motion.route, s_motion.route, world.d_ref, window=(ws, we))
    hop = params.N / 2 / world.rate
    length = params.N / world.rate
    subsets = [bool(is_following(v_motion.route, s_motion.route, world.d_ref,
                                 window=(ws + k * hop, ws + k * hop + length)))
               for k in range(params.K)]
    return {"following": res.following, "max_separation": res.max_separation,
            "fraction_within": res.fraction_within, "subset_following": subsets}


def run_simulation(world: World, scenario: AttackScenario, seed: int,
                   cfg: SessionConfig | None = None, latency: float = DEFAULT_LATENCY) -> SimReport:
    """Run one seeded protocol execution and report the verifier's decision on the subject."""
    cfg = cfg or SessionConfig(variant=scenario.variant, rate=world.rate)
    if cfg.variant != scenario.variant:
        raise ScenarioError(f"session variant {cfg.variant} does not match scenario variant {scenario.variant}")
    if not math.isclose(cfg.rate, world.rate):
        raise ScenarioError(f"session rate {cfg.rate} Hz differs from world rate {world.rate} Hz")
    if latency < 0:
        raise ScenarioError("latency must be non-negative")
    scenario.check(world)

    t0, t1 = _span(world, scenario, cfg)
    shadow = world.shadow_field(seed)
    crypto = ToyCrypto(seed)
    keys = {p: crypto.new_identity(p) for p in ("V", "C", "M")}
    offsets = clock_offsets(world, seed, ["V", "C", "M"])
    loop = EventLoop()
    transcript = Transcript()
    net = Network(loop, transcript, latency)

    v_motion = straight_motion(world.verifier_spec(), t0, t1)
    c_motion = straight_motion(world.behind(scenario.candidate_distance), t0, t1)
    subject_motion = _subject_motion(world, scenario, t0, t1, None)
    built = {}

    def subject_builder(window):
        built["motion"] = _subject_motion(world, scenario, t0, t1, window)
        return built["motion"]

    verifier = VerifierParty("V", keys["V"], crypto, offsets["V"],
                             _source(world, v_motion, shadow, seed, "V"), cfg)
    net.attach(verifier)
    parties = [verifier]
    v_ident = keys["V"].identity
    kind = scenario.kind
    if kind in MITM_KINDS:
        honest = CandidateParty("C", keys["C"], crypto, offsets["C"],
                                _source(world, c_motion, shadow, seed, "C"), cfg,
                                v_ident if cfg.variant == "A" else None)
        m_src = _source(world, subject_motion, shadow, seed, "M")
        args = ("M", keys["M"], crypto, offsets["M"], m_src, cfg, v_ident, keys["C"].identity)
        if kind == "mitm-known":
            adv = MitmKnownVerifier(*args, strategy=scenario.strategy)
        elif kind == "mitm-parallel":
            adv = MitmParallel(*args, strategy=scenario.strategy)
        else:
            adv = MitmDelayed(*args, strategy=scenario.strategy, shift=scenario.shift)
        net.attach(honest)
        net.attach(adv)
        net.tap = adv
        parties += [honest, adv]
    else:
        pid = scenario.subject
        motion = subject_motion if subject_motion is not None else subject_builder
        cand = CandidateParty(pid, keys[pid], crypto, offsets[pid],
                              _source(world, motion, shadow, seed, pid), cfg,
                              v_ident if cfg.variant == "A" else None)
        net.attach(cand)
        net.tap = PassiveTap()
        parties.append(cand)
        adv = None

    for p in parties:
        loop.schedule(NetEvent(0.0, "start", p.id, p.id))
    loop.run(net.dispatch, until=t1)

    subj = scenario.subject
    v = verifier.verdicts.get(subj)
    decision = v.decision if v else None
    if v is None:
        st = verifier.sessions.get(subj)
        verdict, reason = ("incomplete", f"session phase {st.phase}") if st else ("none", "no session")
    else:
        verdict, reason = v.outcome, v.reason
    st = verifier.sessions.get(subj)
    if st is not None and st.window is not None:
        window = (st.window[0] - offsets["V"], st.window[1] - offsets["V"])
    else:
        window = (cfg.setup_lead, cfg.setup_lead + cfg.window_length)
    s_motion = subject_motion if subject_motion is not None else built.get("motion")
    if s_motion is None and kind == "partially-following":
        s_motion = _subject_motion(world, scenario, t0, t1, window)
    truth = _truth(world, scenario, v_motion, s_motion, window, cfg.params)
    aborts = [a for p in parties for a in p.aborts]
    wire = {}
    if adv is not None:
        wire = {"strategy": adv.strategy, "recorded": len(adv.recorded),
                "decrypt_attempts": adv.decrypt_attempts, "leaked_plaintexts": adv.leaked}
    return SimReport(
        scenario=asdict(scenario), seed=int(seed), subject=subj, verdict=verdict, reason=reason,
        rhos=list(decision.rhos) if decision else None,
        passed_count=decision.passed_count if decision else None,
        ground_truth=truth,
        sessions={k: s.to_dict() for k, s in sorted(verifier.verdicts.items())},
        aborts=aborts, wire=wire, transcript=transcript.records,
    )


def pair_traces(world: World, scenario: AttackScenario, seed: int, params: PofParams,
                t_start: float = 1.0) -> tuple[RssTrace, RssTrace]:
    """Verifier and subject traces over one collection window, without the protocol.

    ``mitm-delayed`` yields the candidate's set collected ``shift`` seconds
    early and relabelled into the verifier's window, which is the data the
    verifier ends up correlating in that attack.
    """
    scenario.check(world)
    n = params.samples_needed
    lead = scenario.shift or 0.0
    t0, t1 = -30.0 - lead, t_start + n / world.rate + 30.0
    shadow = world.shadow_field(seed)
    offsets = clock_offsets(world, seed, ["V", "C", "M"])
    v_motion = straight_motion(world.verifier_spec(), t0, t1)
    tv = collect(world, v_motion, shadow, seed, "V", t_start, n, offsets["V"])
    window = (t_start - offsets["V"], t_start - offsets["V"] + n / world.rate)
    if scenario.kind == "mitm-delayed":
        m = straight_motion(world.behind(scenario.candidate_distance), t0, t1)
        tc = collect(world, m, shadow, seed, "C", t_start - lead, n, offsets["C"]).shifted(lead)
        return tv, tc
    m = _subject_motion(world, scenario, t0, t1, window)
    pid = scenario.subject
    return tv, collect(world, m, shadow, seed, pid, t_start, n, offsets[pid])


def distance_traces(world: World, distances, seed: int, params: PofParams,
                    t_start: float = 1.0) -> tuple[RssTrace, list[RssTrace]]:
    """One verifier trace and a candidate trace at each following distance.

    Same as calling ``pair_traces`` with ``none`` scenarios at each distance,
    but the verifier trace is generated once.
    """
    n = params.samples_needed
    t0, t1 = -30.0, t_start + n / world.rate + 30.0
    shadow = world.shadow_field(seed)
    offsets = clock_offsets(world, seed, ["V", "C", "M"])
    tv = collect(world, straight_motion(world.verifier_spec(), t0, t1), shadow, seed, "V",
                 t_start, n, offsets["V"])
    tcs = [collect(world, straight_motion(world.behind(float(d)), t0, t1), shadow, seed, "C",
                   t_start, n, offsets["C"]) for d in distances]
    return tv, tcs


def pair_rhos(world: World, scenario: AttackScenario, seed: int, params: PofParams) -> list[float]:
    tv, tc = pair_traces(world, scenario, seed, params)
    return correlation_tests(align(tv, tc), params)


def pair_decision(world: World, scenario: AttackScenario, seed: int, params: PofParams):
    tv, tc = pair_traces(world, scenario, seed, params)
    try:
        return verify_pair(align(tv, tc), params)
    except (AlignmentError, InsufficientSamplesError):
        return None


def partially_following_sweep(world: World, thetas, runs: int, seed: int = 0,
                              params: PofParams | None = None, cfg: SessionConfig | None = None,
                              far: float | None = None, pattern: str = "contiguous",
                              protocol: bool = True) -> list[tuple[float, float]]:
    """Mean passing rate of the partially-following adversary for each theta."""
    params = params or PofParams()
    out = []
    for theta in thetas:
        if not 0.0 <= theta <= 1.0:
            raise ScenarioError(f"theta {theta} outside [0, 1]")
        sc = AttackScenario("partially-following", theta=float(theta), pattern=pattern,
                            follow_distance=far if far is not None else AttackScenario.follow_distance)
        passes = 0
        for r in range(runs):
            s = seed * 1_000_003 + r
            if protocol:
                c = cfg or SessionConfig(params=params, rate=world.rate)
                passes += run_simulation(world, sc, s, c).accepted
            else:
                d = pair_decision(world, sc, s, params)
                passes += bool(d and d.accept)
        out.append((float(theta), passes / runs))
    return out

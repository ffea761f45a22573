"""Candidate and verifier session state machines.

Both machines are synchronous transducers: ``step(state, event)`` returns
the next state and the actions the host must carry out (send a frame, start
collecting RSS, arm a timer). Time only enters through the ``now`` field of
events, in the party's own clock.

Variant ``"A"``: the candidate knows the verifier. JoinReq, Reply, then the
RSS report after the collection window.

Variant ``"B"``: the verifier is discovered from its beacon. After the
window the candidate commits to its RSS set and opens the commitment
``delta_t`` seconds later. The verifier only accepts a commitment that
arrives within ``epsilon`` of its own last sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..channel import RssTrace
from ..sigproc import AlignmentError, align
from ..verify import InsufficientSamplesError, PofDecision, PofParams, verify_pair
from .crypto import CryptoProvider, DecryptionError, Identity, KeyPair
from .messages import (Beacon, Commit, FrameError, Gamma, JoinReq, MsgType, Open, Reply,
                       RssReport, plain_frame, seal, unseal)

PROTOCOL_VIOLATION = "protocol-violation"
AUTH_FAILURE = "auth-failure"
BINDING_FAILURE = "binding-failure"
STALE_COMMIT = "stale-commit"
TIMEOUT = "timeout"
BROADCAST = "*"


@dataclass(frozen=True)
class SessionConfig:
    params: PofParams = PofParams()
    variant: str = "A"
    epsilon: float = 0.5
    delta_t: float = 3.0
    rate: float = 20.0
    setup_lead: float = 1.0
    freq: str = "751MHz"
    sync_error_bound: float = 0.1
    report_timeout: float = 10.0
    align_tol: float | None = None
    mutual: bool = False

    def __post_init__(self):
        if self.variant not in ("A", "B"):
            raise ValueError(f"variant must be 'A' or 'B', got {self.variant!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.epsilon > self.delta_t / 4:
            raise ValueError(f"epsilon={self.epsilon} s must not exceed delta_t/4={self.delta_t / 4} s")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.setup_lead < 0 or self.sync_error_bound < 0:
            raise ValueError("setup_lead and sync_error_bound must be non-negative")
        if self.mutual:
            raise NotImplementedError("mutual verification is not implemented")

    @property
    def n_samples(self) -> int:
        return self.params.samples_needed

    @property
    def window_length(self) -> float:
        return self.n_samples / self.rate


# events

@dataclass(frozen=True)
class Start:
    now: float


@dataclass(frozen=True)
class Receive:
    frame: bytes
    now: float


@dataclass(frozen=True)
class CollectionComplete:
    trace: RssTrace
    now: float


@dataclass(frozen=True)
class TimerFired:
    name: str
    now: float


# actions

@dataclass(frozen=True)
class Send:
    frame: bytes
    dst: str


@dataclass(frozen=True)
class StartCollection:
    start_t: float
    end_t: float
    rate: float
    n_samples: int


@dataclass(frozen=True)
class SetTimer:
    name: str
    at: float


@dataclass(frozen=True)
class Abort:
    reason: str
    detail: str


@dataclass(frozen=True)
class Verdict:
    outcome: str  # accept | reject | abort
    peer: str
    reason: str | None = None
    decision: PofDecision | None = None

    @property
    def accept(self) -> bool:
        return self.outcome == "accept"

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "peer": self.peer, "reason": self.reason,
                "decision": self.decision.to_dict() if self.decision else None}


def timing_check(t_commit: float, t_v_last: float, epsilon: float) -> bool:
    """True iff the commitment arrived less than ``epsilon`` after the verifier's last sample."""
    return t_commit - t_v_last < epsilon


def commitment_input(gamma: Gamma, vehicle_id: str) -> bytes:
    b = vehicle_id.encode("utf-8")
    return gamma.encode() + len(b).to_bytes(2, "little") + b


def window_samples(start_t: float, end_t: float, rate: float) -> int:
    return int(round((end_t - start_t) * rate))


# candidate

@dataclass(frozen=True, eq=False)
class CandidateState:
    me: KeyPair
    cfg: SessionConfig
    crypto: CryptoProvider
    verifier: Identity | None = None
    phase: str = "idle"
    gamma: Gamma | None = None
    r: bytes | None = None
    window: tuple | None = None
    abort: Abort | None = None

    @property
    def finished(self) -> bool:
        return self.phase in ("done", "aborted")


def _cabort(state: CandidateState, reason: str, detail: str):
    a = Abort(reason, detail)
    return replace(state, phase="aborted", abort=a), [a]


def _join(state: CandidateState):
    me = state.me
    req = JoinReq(me.id, me.public_key, me.identity.certificate)
    return [Send(seal(req, me, state.verifier.public_key, state.crypto), state.verifier.id)]


def candidate_step(state: CandidateState, event):
    """Advance the candidate machine; returns ``(state, actions)``."""
    if state.finished:
        return state, []
    cfg = state.cfg
    if isinstance(event, Start):
        if state.phase != "idle":
            return _cabort(state, PROTOCOL_VIOLATION, "started twice")
        if cfg.variant == "B":
            return replace(state, phase="wait_beacon"), []
        if state.verifier is None:
            raise ValueError("variant A needs the verifier identity up front")
        return replace(state, phase="wait_reply"), _join(state)

    if isinstance(event, Receive):
        try:
            env = unseal(event.frame, state.me, state.crypto)
        except DecryptionError as exc:
            return _cabort(state, AUTH_FAILURE, f"cannot decrypt frame: {exc}")
        except FrameError as exc:
            return _cabort(state, PROTOCOL_VIOLATION, f"malformed frame: {exc}")
        if env.msg_type == MsgType.BEACON:
            if state.phase != "wait_beacon":
                return state, []  # beacons are broadcast; late ones are harmless
            b = env.msg
            ident = Identity(b.id, b.public_key, b.certificate)
            if not state.crypto.verify_certificate(ident):
                return _cabort(state, AUTH_FAILURE, f"beacon certificate for {b.id!r} does not verify")
            state = replace(state, verifier=ident, phase="wait_reply")
            return state, _join(state)
        if state.phase != "wait_reply" or env.msg_type != MsgType.REPLY:
            return _cabort(state, PROTOCOL_VIOLATION, f"unexpected {env.msg_type.name} in phase {state.phase}")
        if not env.signed_by(state.verifier.public_key, state.crypto):
            return _cabort(state, AUTH_FAILURE, "reply signature does not verify under the verifier key")
        rep: Reply = env.msg
        if rep.id != state.verifier.id:
            return _cabort(state, AUTH_FAILURE, f"reply names {rep.id!r}, expected {state.verifier.id!r}")
        n = window_samples(rep.start_t, rep.end_t, rep.rate)
        if rep.rate <= 0 or n < 2:
            return _cabort(state, PROTOCOL_VIOLATION, "reply window is empty")
        state = replace(state, phase="collecting", window=(rep.start_t, rep.end_t, rep.rate))
        return state, [StartCollection(rep.start_t, rep.end_t, rep.rate, n)]

    if isinstance(event, CollectionComplete):
        if state.phase != "collecting":
            return _cabort(state, PROTOCOL_VIOLATION, f"collection completed in phase {state.phase}")
        gamma = Gamma.from_trace(event.trace)
        me, crypto, v = state.me, state.crypto, state.verifier
        if cfg.variant == "A":
            frame = seal(RssReport(gamma, me.id), me, v.public_key, crypto)
            return replace(state, phase="done", gamma=gamma), [Send(frame, v.id)]
        r = crypto.nonce(16)
        c = crypto.commit(commitment_input(gamma, me.id), r)
        frame = seal(Commit(me.id, c), me, v.public_key, crypto)
        state = replace(state, phase="committed", gamma=gamma, r=r)
        return state, [Send(frame, v.id), SetTimer("open", event.now + cfg.delta_t)]

    if isinstance(event, TimerFired):
        if event.name != "open" or state.phase != "committed":
            return _cabort(state, PROTOCOL_VIOLATION, f"timer {event.name!r} in phase {state.phase}")
        me = state.me
        frame = seal(Open(state.gamma, me.id, state.r), me, state.verifier.public_key, state.crypto)
        return replace(state, phase="done"), [Send(frame, state.verifier.id)]

    raise TypeError(f"unknown event {event!r}")


# verifier

@dataclass(frozen=True, eq=False)
class VerifierState:
    me: KeyPair
    cfg: SessionConfig
    crypto: CryptoProvider
    phase: str = "listen"
    peer: Identity | None = None
    window: tuple | None = None
    own: RssTrace | None = None
    gamma: Gamma | None = None
    commit: bytes | None = None
    t_commit: float | None = None
    timing_ok: bool | None = None
    verdict: Verdict | None = None

    @property
    def finished(self) -> bool:
        return self.verdict is not None


def beacon_frame(me: KeyPair) -> bytes:
    return plain_frame(Beacon(me.id, me.public_key, me.identity.certificate))


def _vend(state: VerifierState, outcome: str, reason: str | None = None,
          decision: PofDecision | None = None, actions=()):
    peer = state.peer.id if state.peer else ""
    v = Verdict(outcome, peer, reason, decision)
    phase = "aborted" if outcome == "abort" else "done"
    return replace(state, phase=phase, verdict=v), list(actions), v


def _vabort(state, reason, detail):
    return _vend(state, "abort", f"{reason}: {detail}", actions=[Abort(reason, detail)])


def _correlate(state: VerifierState):
    cfg = state.cfg
    try:
        theirs = state.gamma.to_trace(cfg.rate, state.peer.id)
    except ValueError as exc:
        return _vend(state, "reject", f"malformed RSS set: {exc}")
    try:
        pair = align(state.own, theirs, cfg.align_tol)
        decision = verify_pair(pair, cfg.params)
    except (AlignmentError, InsufficientSamplesError) as exc:
        return _vend(state, "reject", str(exc))
    return _vend(state, "accept" if decision.accept else "reject", None, decision)


def _progress(state: VerifierState):
    """Run whatever checks the collected material now allows."""
    if state.own is None:
        return state, [], None
    if state.cfg.variant == "A":
        if state.gamma is not None:
            return _correlate(state)
        return state, [], None
    if state.commit is not None and state.timing_ok is None:
        ok = timing_check(state.t_commit, state.own.end, state.cfg.epsilon)
        if not ok:
            gap = state.t_commit - state.own.end
            return _vabort(state, STALE_COMMIT,
                           f"commitment arrived {gap:.3f} s after the last sample (epsilon={state.cfg.epsilon} s)")
        state = replace(state, timing_ok=True)
    if state.timing_ok and state.gamma is not None:
        return _correlate(state)
    return state, [], None


def verifier_step(state: VerifierState, event):
    """Advance the verifier machine; returns ``(state, actions, verdict or None)``."""
    if state.finished:
        return state, [], None
    cfg = state.cfg
    if isinstance(event, Start):
        if cfg.variant == "B":
            return state, [Send(beacon_frame(state.me), BROADCAST)], None
        return state, [], None

    if isinstance(event, Receive):
        try:
            env = unseal(event.frame, state.me, state.crypto)
        except DecryptionError as exc:
            return _vabort(state, AUTH_FAILURE, f"cannot decrypt frame: {exc}")
        except FrameError as exc:
            return _vabort(state, PROTOCOL_VIOLATION, f"malformed frame: {exc}")
        t = env.msg_type
        if t == MsgType.JOIN_REQ and state.phase == "listen":
            req: JoinReq = env.msg
            ident = Identity(req.id, req.public_key, req.certificate)
            if not state.crypto.verify_certificate(ident):
                state = replace(state, peer=ident)
                return _vabort(state, AUTH_FAILURE, f"certificate for {req.id!r} does not verify")
            state = replace(state, peer=ident)
            if not env.signed_by(req.public_key, state.crypto):
                return _vabort(state, AUTH_FAILURE, "join request signature does not verify")
            n = cfg.n_samples
            start = event.now + cfg.setup_lead
            end = start + n / cfg.rate
            reply = Reply(state.me.id, start, end, cfg.freq, cfg.rate)
            deadline = end + cfg.report_timeout + (cfg.delta_t if cfg.variant == "B" else 0.0)
            state = replace(state, phase="collecting", window=(start, end))
            return state, [Send(seal(reply, state.me, ident.public_key, state.crypto), ident.id),
                           StartCollection(start, end, cfg.rate, n),
                           SetTimer("deadline", deadline)], None
        expected = {"A": (MsgType.RSS_REPORT,), "B": (MsgType.COMMIT, MsgType.OPEN)}[cfg.variant]
        if state.phase != "collecting" or t not in expected:
            return _vabort(state, PROTOCOL_VIOLATION, f"unexpected {t.name} in phase {state.phase}")
        if not env.signed_by(state.peer.public_key, state.crypto):
            return _vabort(state, AUTH_FAILURE, f"{t.name} signature does not verify under {state.peer.id!r}")
        if env.msg.id != state.peer.id:
            return _vabort(state, BINDING_FAILURE, f"{t.name} names {env.msg.id!r}, session is {state.peer.id!r}")
        if t == MsgType.RSS_REPORT:
            if state.gamma is not None:
                return _vabort(state, PROTOCOL_VIOLATION, "second RSS report")
            state = replace(state, gamma=env.msg.gamma)
        elif t == MsgType.COMMIT:
            if state.commit is not None:
                return _vabort(state, PROTOCOL_VIOLATION, "second commitment")
            state = replace(state, commit=env.msg.c, t_commit=event.now)
        else:
            if state.commit is None:
                return _vabort(state, PROTOCOL_VIOLATION, "opening before commitment")
            if state.gamma is not None:
                return _vabort(state, PROTOCOL_VIOLATION, "second opening")
            o: Open = env.msg
            if not state.crypto.open_commitment(state.commit, commitment_input(o.gamma, o.id), o.r):
                return _vabort(state, BINDING_FAILURE, "opening does not match the commitment")
            state = replace(state, gamma=o.gamma)
        return _progress(state)

    if isinstance(event, CollectionComplete):
        if state.phase != "collecting" or state.own is not None:
            return _vabort(state, PROTOCOL_VIOLATION, f"collection completed in phase {state.phase}")
        return _progress(replace(state, own=event.trace))

    if isinstance(event, TimerFired):
        if event.name == "deadline":
            return _vabort(state, TIMEOUT, "candidate material did not arrive in time")
        return _vabort(state, PROTOCOL_VIOLATION, f"unknown timer {event.name!r}")

    raise TypeError(f"unknown event {event!r}")

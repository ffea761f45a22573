"""Discrete-event core: event queue, wire with an adversary tap, and the
honest parties that host the protocol state machines."""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable

from ..channel import RssTrace
from ..protocol.crypto import CryptoProvider, DecryptionError, Identity, KeyPair
from ..protocol.messages import FrameError, MsgType, decode_frame, unseal
from ..protocol.session import (BROADCAST, Abort, CandidateState, CollectionComplete,
                                Receive, Send, SessionConfig, SetTimer, Start,
                                StartCollection, TimerFired, Verdict, VerifierState,
                                candidate_step, verifier_step)

DEFAULT_LATENCY = 0.010


@dataclass(frozen=True)
class NetEvent:
    time: float
    kind: str  # deliver | timer | collect | start
    src: str
    dst: str
    payload: object = None


class EventLoop:
    """Time-ordered queue; equal times are served in insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0.0
        self.processed = 0

    def schedule(self, ev: NetEvent) -> None:
        if ev.time < self.now - 1e-12:
            raise ValueError(f"cannot schedule into the past ({ev.time} < {self.now})")
        heapq.heappush(self._heap, (ev.time, self._seq, ev))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)

    def run(self, dispatch: Callable[[NetEvent], None], until: float = float("inf"),
            max_events: int = 1_000_000) -> None:
        while self._heap and self._heap[0][0] <= until:
            if self.processed >= max_events:
                raise RuntimeError(f"event budget of {max_events} exhausted")
            t, _, ev = heapq.heappop(self._heap)
            self.now = t
            self.processed += 1
            dispatch(ev)


# adversary actions on a frame in flight

@dataclass(frozen=True)
class Relay:
    pass


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Delay:
    dt: float


@dataclass(frozen=True)
class Inject:
    frame: bytes
    dst: str
    src: str
    delay: float = 0.0


@dataclass(frozen=True)
class Record:
    pass


@dataclass(frozen=True)
class WireFrame:
    """A frame observed on the wire; ``src`` is the link-layer sender address."""

    time: float
    src: str
    dst: str
    frame: bytes

    @property
    def msg_type(self) -> MsgType:
        return MsgType(decode_frame(self.frame)[0])


def _digest(frame: bytes) -> str:
    return hashlib.sha256(frame).hexdigest()[:16]


class Transcript:
    def __init__(self):
        self.records = []

    def log(self, t: float, event: str, **fields) -> None:
        rec = {"t": round(float(t), 9), "event": event}
        rec.update(fields)
        self.records.append(rec)

    def frame(self, t: float, event: str, src: str, dst: str, frame: bytes, **extra) -> None:
        try:
            name = MsgType(decode_frame(frame)[0]).name
        except (FrameError, ValueError):
            name = "?"
        self.log(t, event, src=src, dst=dst, type=name, size=len(frame), sha=_digest(frame), **extra)

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


class Network:
    """Delivers frames after a constant latency; every frame passes the tap first."""

    def __init__(self, loop: EventLoop, transcript: Transcript, latency: float = DEFAULT_LATENCY):
        self.loop = loop
        self.transcript = transcript
        self.latency = latency
        self.parties = {}
        self.tap = None

    def attach(self, party) -> None:
        self.parties[party.id] = party
        party.net = self

    def send(self, src: str, dst: str, frame: bytes) -> None:
        now = self.loop.now
        self.transcript.frame(now, "send", src, dst, frame)
        actions = self.tap.hook(WireFrame(now, src, dst, frame)) if self.tap else [Relay()]
        for a in actions:
            if isinstance(a, Relay):
                self._schedule(now + self.latency, src, dst, frame)
            elif isinstance(a, Delay):
                self.transcript.frame(now, "delay", src, dst, frame, by=a.dt)
                self._schedule(now + self.latency + a.dt, src, dst, frame)
            elif isinstance(a, Drop):
                self.transcript.frame(now, "drop", src, dst, frame)
            elif isinstance(a, Inject):
                self.transcript.frame(now, "inject", a.src, a.dst, a.frame)
                self._schedule(now + self.latency + a.delay, a.src, a.dst, a.frame)
            elif isinstance(a, Record):
                pass
            else:
                raise TypeError(f"unknown wire action {a!r}")

    def _schedule(self, t: float, src: str, dst: str, frame: bytes) -> None:
        targets = [p for p in self.parties if p != src] if dst == BROADCAST else [dst]
        for d in targets:
            if d in self.parties:
                self.loop.schedule(NetEvent(t, "deliver", src, d, frame))

    def dispatch(self, ev: NetEvent) -> None:
        party = self.parties[ev.dst]
        if ev.kind == "deliver":
            self.transcript.frame(ev.time, "deliver", ev.src, ev.dst, ev.payload)
            party.on_frame(ev.payload, ev.src)
        elif ev.kind == "timer":
            party.on_timer(*ev.payload)
        elif ev.kind == "collect":
            party.on_collect(*ev.payload)
        elif ev.kind == "start":
            party.on_start()
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")


TraceSource = Callable[[float, int, float], RssTrace]


class Party:
    """Something with an address, a clock and an RSS receiver."""

    def __init__(self, pid: str, keys: KeyPair, crypto: CryptoProvider, clock_offset: float,
                 source: TraceSource | None, cfg: SessionConfig):
        self.id = pid
        self.keys = keys
        self.crypto = crypto
        self.clock_offset = clock_offset
        self.source = source
        self.cfg = cfg
        self.net: Network | None = None
        self.aborts = []

    @property
    def loop(self) -> EventLoop:
        return self.net.loop

    def local_now(self) -> float:
        return self.loop.now + self.clock_offset

    def true_time(self, local: float) -> float:
        return local - self.clock_offset

    def send(self, dst: str, frame: bytes) -> None:
        self.net.send(self.id, dst, frame)

    def set_timer(self, at_local: float, *payload) -> None:
        t = max(self.true_time(at_local), self.loop.now)
        self.loop.schedule(NetEvent(t, "timer", self.id, self.id, payload))

    def start_collection(self, sc: StartCollection, tag=None) -> None:
        last_local = sc.start_t + (sc.n_samples - 1) / sc.rate
        t = max(self.true_time(last_local), self.loop.now)
        self.loop.schedule(NetEvent(t, "collect", self.id, self.id, (sc, tag)))

    def collect(self, sc: StartCollection) -> RssTrace:
        tr = self.source(sc.start_t, sc.n_samples, self.clock_offset)
        self.net.transcript.log(self.loop.now, "collect", party=self.id, start=sc.start_t,
                                n=sc.n_samples)
        return tr

    def on_start(self) -> None:
        pass

    def on_frame(self, frame: bytes, src: str) -> None:
        pass

    def on_timer(self, *payload) -> None:
        pass

    def on_collect(self, sc: StartCollection, tag) -> None:
        pass

    def _note_abort(self, a: Abort, session: str = "") -> None:
        self.aborts.append({"party": self.id, "session": session, "reason": a.reason, "detail": a.detail})
        self.net.transcript.log(self.loop.now, "abort", party=self.id, session=session,
                                reason=a.reason, detail=a.detail)


class CandidateParty(Party):
    """Runs the candidate machine unmodified."""

    def __init__(self, pid, keys, crypto, clock_offset, source, cfg, verifier: Identity | None):
        super().__init__(pid, keys, crypto, clock_offset, source, cfg)
        self.state = CandidateState(keys, cfg, crypto, verifier=verifier)

    def _feed(self, event) -> None:
        self.state, actions = candidate_step(self.state, event)
        for a in actions:
            if isinstance(a, Send):
                self.send(a.dst, a.frame)
            elif isinstance(a, StartCollection):
                self.start_collection(a)
            elif isinstance(a, SetTimer):
                self.set_timer(a.at, a.name)
            elif isinstance(a, Abort):
                self._note_abort(a)

    def on_start(self) -> None:
        self._feed(Start(self.local_now()))

    def on_frame(self, frame: bytes, src: str) -> None:
        self._feed(Receive(frame, self.local_now()))

    def on_timer(self, name) -> None:
        self._feed(TimerFired(name, self.local_now()))

    def on_collect(self, sc, tag) -> None:
        self._feed(CollectionComplete(self.collect(sc), self.local_now()))


class VerifierParty(Party):
    """Hosts one verifier session per link-layer peer address."""

    def __init__(self, pid, keys, crypto, clock_offset, source, cfg):
        super().__init__(pid, keys, crypto, clock_offset, source, cfg)
        self.sessions: dict[str, VerifierState] = {}
        self.verdicts: dict[str, Verdict] = {}
        self.ignored = []

    def _feed(self, peer: str, event) -> None:
        state = self.sessions[peer]
        state, actions, verdict = verifier_step(state, event)
        self.sessions[peer] = state
        for a in actions:
            if isinstance(a, Send):
                self.send(a.dst if a.dst == BROADCAST else peer, a.frame)
            elif isinstance(a, StartCollection):
                self.start_collection(a, peer)
            elif isinstance(a, SetTimer):
                self.set_timer(a.at, peer, a.name)
            elif isinstance(a, Abort):
                self._note_abort(a, peer)
        if verdict is not None:
            self.verdicts[peer] = verdict
            self.net.transcript.log(self.loop.now, "verdict", party=self.id, session=peer,
                                    outcome=verdict.outcome, reason=verdict.reason)

    def on_start(self) -> None:
        if self.cfg.variant == "B":
            probe = VerifierState(self.keys, self.cfg, self.crypto)
            _, actions, _ = verifier_step(probe, Start(self.local_now()))
            for a in actions:
                self.send(a.dst, a.frame)

    def on_frame(self, frame: bytes, src: str) -> None:
        try:
            msg_type, _ = decode_frame(frame)
        except FrameError as exc:
            self.ignored.append((src, f"malformed frame: {exc}"))
            return
        if msg_type == MsgType.BEACON:
            return
        if src not in self.sessions:
            try:
                env = unseal(frame, self.keys, self.crypto)
            except (DecryptionError, FrameError) as exc:
                self.ignored.append((src, str(exc)))
                return
            if env.msg_type != MsgType.JOIN_REQ:
                self.ignored.append((src, f"{env.msg_type.name} without a session"))
                return
            self.sessions[src] = VerifierState(self.keys, self.cfg, self.crypto)
        self._feed(src, Receive(frame, self.local_now()))

    def on_timer(self, peer, name) -> None:
        self._feed(peer, TimerFired(name, self.local_now()))

    def on_collect(self, sc, peer) -> None:
        self._feed(peer, CollectionComplete(self.collect(sc), self.local_now()))

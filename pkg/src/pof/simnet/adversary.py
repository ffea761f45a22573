"""Wire adversaries. Each one sits on the V2V link (every frame passes its
``hook``) and is also an addressable party that can run its own sessions.

A hook returns a list of actions for the frame in flight: ``Relay``,
``Drop`` (reactive jamming, always successful), ``Delay``, ``Inject`` and
``Record``. Adversaries keep state across frames, so the hooks are methods
rather than free functions; given the run seed their behaviour is fixed.
"""

from __future__ import annotations

from ..protocol.crypto import DecryptionError, Identity
from ..protocol.messages import (Beacon, Commit, FrameError, Gamma, JoinReq, MsgType, Open, Reply,
                                 RssReport, decode_frame, decode_payload, plain_frame, seal,
                                 unseal)
from ..protocol.session import BROADCAST, StartCollection, commitment_input, window_samples
from .engine import Drop, Inject, Party, Record, Relay, WireFrame


class PassiveTap:
    """Transparent wire."""

    def hook(self, wf: WireFrame) -> list:
        return [Relay()]


class WireAdversary(Party):
    """Common plumbing: Dolev-Yao bookkeeping of everything overheard."""

    STRATEGIES: tuple = ()

    def __init__(self, pid, keys, crypto, clock_offset, source, cfg, verifier: Identity,
                 candidate: Identity, strategy: str | None = None):
        super().__init__(pid, keys, crypto, clock_offset, source, cfg)
        strategy = strategy or self.STRATEGIES[0]
        if strategy not in self.STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; choose from {self.STRATEGIES}")
        self.strategy = strategy
        self.verifier = verifier
        self.candidate = candidate
        self.recorded = []
        self.decrypt_attempts = 0
        self.leaked = 0  # plaintexts recovered from frames sealed to someone else

    def try_read(self, wf: WireFrame):
        """Attempt to open an overheard frame addressed to another party."""
        self.recorded.append(wf)
        self.decrypt_attempts += 1
        try:
            env = unseal(wf.frame, self.keys, self.crypto)
        except (DecryptionError, FrameError):
            return None
        self.leaked += 1
        return env

    def _seal_to(self, ident: Identity, msg) -> bytes:
        return seal(msg, self.keys, ident.public_key, self.crypto)

    def _open(self, frame: bytes, signer: Identity):
        env = unseal(frame, self.keys, self.crypto)
        if not env.signed_by(signer.public_key, self.crypto):
            raise DecryptionError("signature does not verify")
        return env.msg


class MitmKnownVerifier(WireAdversary):
    """Known-verifier man in the middle.

    The candidate seals everything to the verifier, so the adversary cannot
    learn the candidate's RSS set. Strategies:

    ``inject-own``: relay the candidate's request, run an own session and
    report own far-away RSS while jamming the candidate's report.
    ``forward-ciphertext``: present the candidate's sealed report as the
    adversary's own.
    ``resign-reply``: replace the verifier's reply to the candidate with a
    reply signed by the adversary.
    """

    STRATEGIES = ("inject-own", "forward-ciphertext", "resign-reply")

    def on_start(self) -> None:
        if self.strategy in ("inject-own", "forward-ciphertext"):
            req = JoinReq(self.id, self.keys.public_key, self.keys.identity.certificate)
            self.send(self.verifier.id, self._seal_to(self.verifier, req))

    def hook(self, wf: WireFrame) -> list:
        if wf.src == self.id:
            return [Relay()]
        t = wf.msg_type
        if t == MsgType.RSS_REPORT and wf.src == self.candidate.id:
            self.try_read(wf)
            if self.strategy == "forward-ciphertext":
                return [Record(), Drop(), Inject(wf.frame, self.verifier.id, self.id)]
            if self.strategy == "inject-own":
                return [Record(), Drop()]
        if t == MsgType.REPLY and wf.dst == self.candidate.id and self.strategy == "resign-reply":
            self.try_read(wf)
            start = self.local_now() + self.cfg.setup_lead
            forged = Reply(self.verifier.id, start, start + self.cfg.window_length,
                           self.cfg.freq, self.cfg.rate)
            return [Record(), Drop(), Inject(self._seal_to(self.candidate, forged),
                                             self.candidate.id, self.verifier.id)]
        return [Relay()]

    def on_frame(self, frame: bytes, src: str) -> None:
        if src != self.verifier.id:
            return
        try:
            rep = self._open(frame, self.verifier)
        except (DecryptionError, FrameError):
            return
        if isinstance(rep, Reply) and self.strategy == "inject-own":
            n = window_samples(rep.start_t, rep.end_t, rep.rate)
            self.start_collection(StartCollection(rep.start_t, rep.end_t, rep.rate, n))

    def on_collect(self, sc, tag) -> None:
        gamma = Gamma.from_trace(self.collect(sc))
        self.send(self.verifier.id, self._seal_to(self.verifier, RssReport(gamma, self.id)))


class _SpoofingVerifier(WireAdversary):
    """Jams the verifier's beacon and advertises itself as the verifier."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.v_window = None
        self.c_window = None
        self.c_commit = None

    def hook(self, wf: WireFrame) -> list:
        if wf.src == self.verifier.id and wf.msg_type == MsgType.BEACON:
            _, body = decode_frame(wf.frame)
            b = decode_payload(MsgType.BEACON, body)
            self.verifier = Identity(b.id, b.public_key, b.certificate)
            own = plain_frame(Beacon(self.id, self.keys.public_key, self.keys.identity.certificate))
            return [Record(), Drop(), Inject(own, BROADCAST, self.id)]
        if wf.dst not in (self.id, BROADCAST) and wf.src != self.id and wf.msg_type != MsgType.BEACON:
            self.try_read(wf)
        return [Relay()]

    def join_verifier(self) -> None:
        req = JoinReq(self.id, self.keys.public_key, self.keys.identity.certificate)
        self.send(self.verifier.id, self._seal_to(self.verifier, req))

    def reply_to_candidate(self, start: float, end: float, rate: float) -> None:
        self.c_window = (start, end, rate)
        self.send(self.candidate.id,
                  self._seal_to(self.candidate, Reply(self.id, start, end, self.cfg.freq, rate)))

    def commit_and_open(self, gamma, open_delay: float | None = None) -> None:
        r = self.crypto.nonce(16)
        c = self.crypto.commit(commitment_input(gamma, self.id), r)
        self.send(self.verifier.id, self._seal_to(self.verifier, Commit(self.id, c)))
        opening = self._seal_to(self.verifier, Open(gamma, self.id, r))
        if open_delay:
            self.set_timer(self.local_now() + open_delay, "send-open", opening)
        else:
            self.send(self.verifier.id, opening)

    def on_timer(self, name, *payload) -> None:
        if name == "send-open":
            self.send(self.verifier.id, payload[0])
        elif name == "join-verifier":
            self.join_verifier()

    def on_frame(self, frame: bytes, src: str) -> None:
        try:
            if src == self.candidate.id:
                msg = self._open(frame, self.candidate)
            elif src == self.verifier.id:
                msg = self._open(frame, self.verifier)
            else:
                return
        except (DecryptionError, FrameError):
            return
        if isinstance(msg, JoinReq):
            self.on_candidate_join()
        elif isinstance(msg, Reply):
            self.v_window = (msg.start_t, msg.end_t, msg.rate)
            self.on_verifier_reply(msg)
        elif isinstance(msg, Commit):
            self.c_commit = msg.c
            self.on_candidate_commit(msg)
        elif isinstance(msg, Open):
            self.on_candidate_open(msg)

    def on_candidate_join(self) -> None: ...

    def on_verifier_reply(self, msg: Reply) -> None: ...

    def on_candidate_commit(self, msg: Commit) -> None: ...

    def on_candidate_open(self, msg: Open) -> None: ...


class MitmParallel(_SpoofingVerifier):
    """Parallel session against an unknown-verifier candidate.

    The candidate gets the verifier's own window, so its RSS set would pass,
    but the adversary only learns it when the candidate opens its
    commitment, ``delta_t`` after the window. Strategies:

    ``late-commit``: commit to the candidate's set once opened (too late).
    ``forward-commit``: pass the candidate's commitment on in time and open
    it as the adversary's own.
    ``own-commit``: commit in time to own far-away RSS.
    """

    STRATEGIES = ("late-commit", "forward-commit", "own-commit")

    def on_candidate_join(self) -> None:
        self.join_verifier()

    def on_verifier_reply(self, msg: Reply) -> None:
        self.reply_to_candidate(msg.start_t, msg.end_t, msg.rate)
        if self.strategy == "own-commit":
            n = window_samples(msg.start_t, msg.end_t, msg.rate)
            self.start_collection(StartCollection(msg.start_t, msg.end_t, msg.rate, n))

    def on_candidate_commit(self, msg: Commit) -> None:
        if self.strategy == "forward-commit":
            self.send(self.verifier.id, self._seal_to(self.verifier, Commit(self.id, msg.c)))

    def on_candidate_open(self, msg: Open) -> None:
        if self.strategy == "late-commit":
            self.commit_and_open(msg.gamma)
        elif self.strategy == "forward-commit":
            self.send(self.verifier.id, self._seal_to(self.verifier, Open(msg.gamma, self.id, msg.r)))

    def on_collect(self, sc, tag) -> None:
        self.commit_and_open(Gamma.from_trace(self.collect(sc)), open_delay=self.cfg.delta_t)


class MitmDelayed(_SpoofingVerifier):
    """Delayed parallel session.

    The candidate collects first; the adversary starts its session with the
    verifier ``shift`` seconds later, so that the candidate's opening
    arrives just as the verifier's window closes. The candidate's set is
    relabelled into the verifier's window and committed immediately.
    """

    STRATEGIES = ("relabel",)

    def __init__(self, *args, shift: float | None = None, **kw):
        super().__init__(*args, **kw)
        self.shift = self.cfg.delta_t if shift is None else float(shift)

    def on_candidate_join(self) -> None:
        start = self.local_now() + self.cfg.setup_lead
        self.reply_to_candidate(start, start + self.cfg.window_length, self.cfg.rate)
        if self.shift > 0:
            self.set_timer(self.local_now() + self.shift, "join-verifier")
        else:
            self.join_verifier()

    def on_candidate_open(self, msg: Open) -> None:
        if self.v_window is None or self.c_window is None:
            return
        self.commit_and_open(msg.gamma.shifted(self.v_window[0] - self.c_window[0]))

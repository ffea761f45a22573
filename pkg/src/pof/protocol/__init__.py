"""PoF wire protocol: messages, crypto capability and session state machines."""

from .crypto import CryptoError, CryptoProvider, DecryptionError, Identity, KeyPair, ToyCrypto
from .messages import (Beacon, Commit, FrameError, Gamma, JoinReq, MsgType, Open, Reply,
                       RssReport, decode_frame, encode_frame, frame_type, seal, unseal)
from .session import (AUTH_FAILURE, BINDING_FAILURE, BROADCAST, PROTOCOL_VIOLATION,
                      STALE_COMMIT, TIMEOUT, Abort, CandidateState, CollectionComplete,
                      Receive, Send, SessionConfig, SetTimer, Start, StartCollection,
                      TimerFired, Verdict, VerifierState, beacon_frame, candidate_step,
                      commitment_input, timing_check, verifier_step)

__all__ = [
    "AUTH_FAILURE", "BINDING_FAILURE", "BROADCAST", "PROTOCOL_VIOLATION", "STALE_COMMIT",
    "TIMEOUT", "Abort", "Beacon", "CandidateState", "CollectionComplete", "Commit",
    "CryptoError", "CryptoProvider", "DecryptionError", "FrameError", "Gamma", "Identity",
    "JoinReq", "KeyPair", "MsgType", "Open", "Receive", "Reply", "RssReport", "Send",
    "SessionConfig", "SetTimer", "Start", "StartCollection", "TimerFired", "ToyCrypto",
    "Verdict", "VerifierState", "beacon_frame", "candidate_step", "commitment_input",
    "decode_frame", "encode_frame", "frame_type", "seal", "timing_check", "unseal",
    "verifier_step",
]

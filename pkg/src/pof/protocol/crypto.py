"""Cryptographic capability used by the protocol, plus a deterministic toy
implementation for simulation and tests.

The toy provider is an ideal functionality rather than real cryptography: it
keeps a private table from public key to secret key, so sealing to a public
key and checking a signature both consult that table. Outside code only ever
sees opaque byte strings.
"""

from __future__ import annotations

import hashlib
import hmac
from abc import ABC, abstractmethod
from dataclasses import dataclass

SIG_LEN = 32
NONCE_LEN = 16
FINGERPRINT_LEN = 8
TAG_LEN = 32


class CryptoError(Exception):
    pass


class DecryptionError(CryptoError):
    """Ciphertext was not sealed to this key or was modified."""


@dataclass(frozen=True)
class Identity:
    id: str
    public_key: bytes
    certificate: bytes


@dataclass(frozen=True)
class KeyPair:
    identity: Identity
    secret_key: bytes = b""

    @property
    def id(self) -> str:
        return self.identity.id

    @property
    def public_key(self) -> bytes:
        return self.identity.public_key

    def __repr__(self) -> str:  # keep secrets out of logs
        return f"KeyPair(id={self.id!r})"


class CryptoProvider(ABC):
    """Signatures, public-key sealing, commitments and nonces."""

    @abstractmethod
    def new_identity(self, name: str) -> KeyPair: ...

    @abstractmethod
    def verify_certificate(self, identity: Identity) -> bool: ...

    @abstractmethod
    def sign(self, secret_key: bytes, message: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...

    @abstractmethod
    def encrypt(self, public_key: bytes, plaintext: bytes) -> bytes: ...

    @abstractmethod
    def decrypt(self, secret_key: bytes, ciphertext: bytes) -> bytes: ...

    @abstractmethod
    def nonce(self, n: int = NONCE_LEN) -> bytes: ...

    def commit(self, data: bytes, r: bytes) -> bytes:
        """Hash commitment to ``data`` under the random opening value ``r``."""
        h = hashlib.sha256()
        h.update(b"pof-commit\x00")
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
        h.update(r)
        return h.digest()

    def open_commitment(self, c: bytes, data: bytes, r: bytes) -> bool:
        return hmac.compare_digest(c, self.commit(data, r))


class ToyCrypto(CryptoProvider):
    """Deterministic provider: the same seed reproduces every key, nonce and ciphertext."""

    def __init__(self, seed: int = 0):
        self._seed = int(seed).to_bytes(16, "little", signed=True)
        self._counter = 0
        self._secret = {}  # public key -> secret key
        self._ca_key = self._draw(32)

    def _draw(self, n: int) -> bytes:
        out = b""
        while len(out) < n:
            self._counter += 1
            out += hashlib.sha256(b"toy-drbg" + self._seed + self._counter.to_bytes(8, "little")).digest()
        return out[:n]

    @staticmethod
    def _public(sk: bytes) -> bytes:
        return hashlib.sha256(b"toy-pk" + sk).digest()

    def _cert(self, ident: str, pk: bytes) -> bytes:
        return hmac.new(self._ca_key, ident.encode() + b"\x00" + pk, hashlib.sha256).digest()

    def new_identity(self, name: str) -> KeyPair:
        sk = self._draw(32)
        pk = self._public(sk)
        self._secret[pk] = sk
        return KeyPair(Identity(name, pk, self._cert(name, pk)), sk)

    def verify_certificate(self, identity: Identity) -> bool:
        return hmac.compare_digest(identity.certificate, self._cert(identity.id, identity.public_key))

    def sign(self, secret_key: bytes, message: bytes) -> bytes:
        return hmac.new(secret_key, b"sig" + message, hashlib.sha256).digest()

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        sk = self._secret.get(public_key)
        if sk is None:
            return False
        return hmac.compare_digest(signature, self.sign(sk, message))

    @staticmethod
    def _keystream(sk: bytes, nonce: bytes, n: int) -> bytes:
        blocks = []
        for i in range((n + 31) // 32):
            blocks.append(hashlib.sha256(b"ks" + sk + nonce + i.to_bytes(4, "little")).digest())
        return b"".join(blocks)[:n]

    def encrypt(self, public_key: bytes, plaintext: bytes) -> bytes:
        sk = self._secret.get(public_key)
        if sk is None:
            raise CryptoError("unknown public key")
        nonce = self._draw(NONCE_LEN)
        body = bytes(a ^ b for a, b in zip(plaintext, self._keystream(sk, nonce, len(plaintext))))
        head = public_key[:FINGERPRINT_LEN] + nonce
        tag = hmac.new(sk, b"tag" + head + body, hashlib.sha256).digest()
        return head + body + tag

    def decrypt(self, secret_key: bytes, ciphertext: bytes) -> bytes:
        if len(ciphertext) < FINGERPRINT_LEN + NONCE_LEN + TAG_LEN:
            raise DecryptionError("ciphertext too short")
        head = ciphertext[:FINGERPRINT_LEN + NONCE_LEN]
        body = ciphertext[FINGERPRINT_LEN + NONCE_LEN:-TAG_LEN]
        tag = ciphertext[-TAG_LEN:]
        if head[:FINGERPRINT_LEN] != self._public(secret_key)[:FINGERPRINT_LEN]:
            raise DecryptionError("sealed to a different key")
        if not hmac.compare_digest(tag, hmac.new(secret_key, b"tag" + head + body, hashlib.sha256).digest()):
            raise DecryptionError("authentication tag mismatch")
        nonce = head[FINGERPRINT_LEN:]
        return bytes(a ^ b for a, b in zip(body, self._keystream(secret_key, nonce, len(body))))

    def nonce(self, n: int = NONCE_LEN) -> bytes:
        return self._draw(n)

"""Shared protocol vocabulary: parties, quorums, requests, and simulated attestations."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

PartyId = int
MarketId = str
RequestId = str  # hex digest binding (market, payload)
Timestamp = int


@dataclass(frozen=True)
class QuorumConfig:
    """Threshold configuration for n parties of which at most t are byzantine."""

    n: int
    t: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.t < 0:
            raise ValueError(f"degenerate configuration n={self.n} t={self.t}")
        if self.n < 3 * self.t + 1:
            raise ValueError(f"unsound resilience: n={self.n} < 3t+1={3 * self.t + 1}")

    @property
    def weak_size(self) -> int:
        return self.t + 1

    @property
    def strong_size(self) -> int:
        return self.n - self.t


def validate_config(n: int, t: int) -> QuorumConfig:
    """Sole constructor for quorum configurations; rejects n < 3t+1."""
    return QuorumConfig(n, t)


def weak_quorum(cfg: QuorumConfig, k: int) -> bool:
    """True iff any k parties are guaranteed to contain an honest one."""
    return k >= cfg.t + 1


def strong_quorum(cfg: QuorumConfig, k: int) -> bool:
    """True iff k reaches the largest set one can wait for without trusting corrupt parties."""
    return k >= cfg.n - cfg.t


def request_id(market: MarketId, payload: bytes) -> RequestId:
    h = hashlib.sha256()
    h.update(b"req|")
    h.update(market.encode("utf-8"))
    h.update(b"|")
    h.update(payload)
    return h.hexdigest()


@dataclass(frozen=True)
class Request:
    """A client transaction; the unit being ordered fairly within one market."""

    id: RequestId
    market: MarketId
    payload: bytes

    @property
    def name(self) -> str:
        # Generators use printable payloads; traces render them for humans.
        try:
            return self.payload.decode("utf-8")
        except UnicodeDecodeError:
            return self.id[:12]


def make_request(market: MarketId, payload: bytes) -> Request:
    return Request(id=request_id(market, payload), market=market, payload=payload)


# Attestations are simulation-level stand-ins for signatures. Each party owns a
# derived key; honest and byzantine code paths only ever sign with their own
# identity, so forgery is impossible by construction rather than by hardness.

def _party_key(party: PartyId) -> bytes:
    return hashlib.sha256(b"fairlab-party-key|%d" % party).digest()


@dataclass(frozen=True)
class Attestation:
    signer: PartyId
    digest: str

    def content_digest(self) -> str:
        return self.digest


def sign(signer: PartyId, content: bytes) -> Attestation:
    h = hashlib.sha256()
    h.update(_party_key(signer))
    h.update(content)
    return Attestation(signer=signer, digest=h.hexdigest())


def verify(att: Attestation, content: bytes) -> bool:
    h = hashlib.sha256()
    h.update(_party_key(att.signer))
    h.update(content)
    return att.digest == h.hexdigest()

"""Atomic-broadcast stub.

A trivially-correct sequencer standing in for a real consensus backend: it
totally orders block certificates, enforces external validity through the
block verifiers, tracks the delivered-request set, and flags proposers that
sign two different valid certificates for the same height.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .core import PartyId, QuorumConfig, RequestId
from .leaders import LeaderState, replay_undelivered
from .validity import (
    BlockCertificate,
    certificate_to_dict,
    verify_certificate,
)

ACCEPTED = "accepted"
REJECTED = "rejected"
EQUIVOCATION = "equivocation-detected"


@dataclass(frozen=True)
class SubmitOutcome:
    status: str
    reason: Optional[str] = None
    proposer: Optional[PartyId] = None

    @property
    def ok(self) -> bool:
        return self.status == ACCEPTED


@dataclass
class Chain:
    cfg: QuorumConfig
    blocks: list[tuple[int, BlockCertificate]] = field(default_factory=list)
    delivered: dict[RequestId, int] = field(default_factory=dict)  # request -> block number
    # (height, proposer) -> digests of valid certificates seen, for
    # equivocation detection even after the height is decided.
    _seen: dict[tuple[int, PartyId], list[str]] = field(default_factory=dict)
    equivocators: list[PartyId] = field(default_factory=list)

    @property
    def next_number(self) -> int:
        return len(self.blocks)

    def delivered_set(self) -> set[RequestId]:
        return set(self.delivered)

    def submit(self, proposer: PartyId, cert: BlockCertificate) -> SubmitOutcome:
        verdict = verify_certificate(self.cfg, cert)
        number = cert.proposal.block_number
        if verdict.ok:
            digest = cert.digest()
            prior = self._seen.setdefault((number, proposer), [])
            if prior and digest not in prior:
                prior.append(digest)
                if proposer not in self.equivocators:
                    self.equivocators.append(proposer)
                return SubmitOutcome(EQUIVOCATION, proposer=proposer)
            if digest not in prior:
                prior.append(digest)
        if number != self.next_number:
            return SubmitOutcome(REJECTED, "wrong-block-number")
        if not verdict.ok:
            return SubmitOutcome(REJECTED, "invalid-certificate")
        if any(rid in self.delivered for rid in cert.proposal.requests):
            return SubmitOutcome(REJECTED, "duplicate-request")
        self.blocks.append((number, cert))
        for rid in cert.proposal.requests:
            self.delivered[rid] = number
        return SubmitOutcome(ACCEPTED)

    def export_lines(self) -> list[str]:
        """One block per line; consumed by the auditor and `verify`."""
        return [
            json.dumps({"number": number, "certificate": certificate_to_dict(cert)},
                       sort_keys=True)
            for number, cert in self.blocks
        ]


def on_deliver(chain: Chain, leaders: list[LeaderState]) -> list[LeaderState]:
    """Advance every leader into the incarnation for the next block, replaying
    votes whose requests were not delivered."""
    delivered = chain.delivered_set()
    return [
        replay_undelivered(state, chain.next_number, delivered) for state in leaders
    ]

"""Per-party vote streams and the leader-side validated vote store.

A vote is a party's signed claim "I saw request r as my i-th request (at local
time ts)". The store admits votes per party strictly gap-free in sequence
number, buffers early arrivals, and permanently excludes parties that
contradict themselves (conflicting sequence numbers, or timestamps that run
backwards relative to sequence numbers in timestamped mode). Accepted votes
from before an exclusion remain usable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .core import (
    Attestation,
    PartyId,
    QuorumConfig,
    Request,
    RequestId,
    Timestamp,
    sign,
    verify,
)

PLAIN = "plain"
TIMESTAMPED = "timestamped"


@dataclass(frozen=True)
class Vote:
    instance: str
    block: int
    seq: int
    ts: Optional[Timestamp]
    request: RequestId
    att: Attestation

    @property
    def party(self) -> PartyId:
        return self.att.signer


def vote_payload(instance: str, block: int, seq: int, ts: Optional[Timestamp], request: RequestId) -> bytes:
    """Canonical byte encoding covered by a vote's attestation.

    Length-prefixed fields in fixed order so digests are stable across
    implementations; layout documented in docs/FORMATS.md.
    """
    inst = instance.encode("utf-8")
    rid = request.encode("ascii")
    parts = [b"vote|", struct.pack(">I", len(inst)), inst, struct.pack(">QQ", block, seq)]
    if ts is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01" + struct.pack(">Q", ts))
    parts.append(struct.pack(">I", len(rid)))
    parts.append(rid)
    return b"".join(parts)


def make_vote(signer: PartyId, instance: str, block: int, seq: int,
              ts: Optional[Timestamp], request: RequestId) -> Vote:
    att = sign(signer, vote_payload(instance, block, seq, ts, request))
    return Vote(instance=instance, block=block, seq=seq, ts=ts, request=request, att=att)


def vote_verifies(v: Vote) -> bool:
    return verify(v.att, vote_payload(v.instance, v.block, v.seq, v.ts, v.request))


class Report(Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


ACCEPTED = "accepted"
BUFFERED = "buffered"
REJECTED = "rejected"


@dataclass(frozen=True)
class IngestOutcome:
    status: str
    reason: Optional[str] = None
    # Votes that became accepted through this ingest, in acceptance order
    # (the new vote plus any buffered successors it released).
    accepted: tuple[Vote, ...] = ()


@dataclass
class PartyVoteLog:
    party: PartyId
    accepted: list[Vote] = field(default_factory=list)
    pending: dict[int, Vote] = field(default_factory=dict)
    invalid: bool = False  # permanently-invalid: accepted never grows again

    @property
    def active(self) -> bool:
        return not self.invalid

    def seq_of(self, request: RequestId) -> Optional[int]:
        for v in self.accepted:
            if v.request == request:
                return v.seq
        return None


@dataclass
class AcceptedVote:
    vote: Vote
    index: int  # global acceptance counter, used for arrival-order tie-breaks


class VoteStore:
    """Single-writer view of all validated votes for one protocol incarnation."""

    def __init__(self, cfg: QuorumConfig, mode: str, instance: str, block: int):
        if mode not in (PLAIN, TIMESTAMPED):
            raise ValueError(f"unknown store mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.instance = instance
        self.block = block
        self.logs: dict[PartyId, PartyVoteLog] = {p: PartyVoteLog(p) for p in range(cfg.n)}
        # request -> party -> AcceptedVote, in acceptance order at both levels
        self.by_request: dict[RequestId, dict[PartyId, AcceptedVote]] = {}
        self.requests: dict[RequestId, Request] = {}
        self._counter = 0
        self.weak_at: dict[RequestId, int] = {}
        self.strong_at: dict[RequestId, int] = {}
        self.strong_quorum_ts: dict[RequestId, tuple[Timestamp, ...]] = {}
        self.version = 0  # bumps on any acceptance or invalidation

    # -- ingestion ---------------------------------------------------------

    def register_request(self, req: Request) -> None:
        self.requests.setdefault(req.id, req)

    def ingest(self, v: Vote, req: Optional[Request] = None) -> IngestOutcome:
        if req is not None:
            self.register_request(req)
        if not vote_verifies(v):
            return IngestOutcome(REJECTED, "bad-attestation")
        if v.instance != self.instance or v.block != self.block:
            return IngestOutcome(REJECTED, "wrong-block")
        if v.party not in self.logs:
            return IngestOutcome(REJECTED, "unknown-party")
        if self.mode == TIMESTAMPED and v.ts is None:
            return IngestOutcome(REJECTED, "missing-timestamp")
        log = self.logs[v.party]
        if log.invalid:
            return IngestOutcome(REJECTED, "party-invalid")

        # Conflicts with what this party already committed to.
        if v.seq < len(log.accepted):
            prior = log.accepted[v.seq]
            if prior == v:
                return IngestOutcome(REJECTED, "duplicate")
            self._invalidate(log)
            return IngestOutcome(REJECTED, "equivocation")
        if v.seq in log.pending:
            if log.pending[v.seq] == v:
                return IngestOutcome(REJECTED, "duplicate")
            self._invalidate(log)
            return IngestOutcome(REJECTED, "equivocation")

        if v.seq > len(log.accepted):
            log.pending[v.seq] = v
            return IngestOutcome(BUFFERED)

        # v is the next expected vote; accept it and cascade buffered successors.
        newly: list[Vote] = []
        cursor: Optional[Vote] = v
        while cursor is not None:
            if self.mode == TIMESTAMPED and log.accepted:
                if cursor.ts <= log.accepted[-1].ts:
                    self._invalidate(log)
                    if not newly:
                        return IngestOutcome(REJECTED, "timestamp-order")
                    # v itself was accepted; the cascade hit the mismatch.
                    return IngestOutcome(ACCEPTED, "timestamp-order", tuple(newly))
            self._accept(log, cursor)
            newly.append(cursor)
            cursor = log.pending.pop(len(log.accepted), None)
        return IngestOutcome(ACCEPTED, None, tuple(newly))

    def _accept(self, log: PartyVoteLog, v: Vote) -> None:
        log.accepted.append(v)
        slot = self.by_request.setdefault(v.request, {})
        slot[v.party] = AcceptedVote(v, self._counter)
        count = len(slot)
        if count == self.cfg.weak_size and v.request not in self.weak_at:
            self.weak_at[v.request] = self._counter
        if count == self.cfg.strong_size and v.request not in self.strong_at:
            self.strong_at[v.request] = self._counter
            self.strong_quorum_ts[v.request] = tuple(
                av.vote.ts for av in slot.values() if av.vote.ts is not None
            )
        self._counter += 1
        self.version += 1

    def _invalidate(self, log: PartyVoteLog) -> None:
        log.invalid = True
        log.pending.clear()
        self.version += 1

    def mark_invalid(self, party: PartyId) -> None:
        """Carry a permanent exclusion into a rebuilt store."""
        self._invalidate(self.logs[party])

    # -- queries -----------------------------------------------------------

    def reported_before(self, party: PartyId, r: RequestId, r2: RequestId) -> Report:
        log = self.logs[party]
        if log.invalid:
            return Report.UNKNOWN
        seq_r = log.seq_of(r)
        if seq_r is None:
            return Report.UNKNOWN
        seq_r2 = log.seq_of(r2)
        if seq_r2 is None:
            # The accepted log is gap-free, so holding r without r2 means the
            # party reported r and everything below it, but not r2.
            return Report.YES
        return Report.YES if seq_r < seq_r2 else Report.NO

    def count_before(self, r: RequestId, r2: RequestId) -> int:
        return sum(
            1
            for p in self.logs
            if self.reported_before(p, r, r2) is Report.YES
        )

    def votes_for(self, r: RequestId) -> list[Vote]:
        """All accepted votes for r, including those a now-invalid party cast
        before its exclusion (those stay usable as block justification)."""
        slot = self.by_request.get(r, {})
        return [av.vote for av in slot.values()]

    def accepted_count(self, r: RequestId) -> int:
        return len(self.by_request.get(r, {}))

    def known_requests(self) -> list[RequestId]:
        """Requests with at least one accepted vote, in first-acceptance order."""
        return list(self.by_request.keys())

    def active_parties(self) -> list[PartyId]:
        return [p for p, log in self.logs.items() if log.active]

    def invalid_parties(self) -> list[PartyId]:
        return [p for p, log in self.logs.items() if log.invalid]

    def market_of(self, r: RequestId) -> str:
        return self.requests[r].market

    def acceptance_records(self, r: RequestId) -> list[AcceptedVote]:
        return list(self.by_request.get(r, {}).values())

    def accepted_logs(self) -> dict[PartyId, list[Vote]]:
        return {p: list(log.accepted) for p, log in self.logs.items() if log.accepted}

"""Stand-alone block verifiers.

A certificate is self-contained: the proposal, every cited vote grouped per
voter (full histories from sequence number zero), and the request table that
binds every cited request id to its market and payload. Verification uses
only the certificate and the quorum configuration, never leader state.

The trailing fairness clause re-checks the emission condition the engines use:
a block-fair certificate may not omit a cited request that, on the cited
evidence, still blocks a member; a timed certificate may not omit a cited
request that a weak quorum timestamped below the declared pivot median.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

from .core import (
    Attestation,
    PartyId,
    QuorumConfig,
    Request,
    RequestId,
    request_id,
    verify,
)
from .fairness import MedianSummary, median_timestamp
from .leaders import TIMED_FAIR, Proposal
from .votes import Vote, vote_payload

VALID = "valid"
INVALID = "invalid"


@dataclass(frozen=True)
class VerifyOutcome:
    status: str
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == VALID


def _ok() -> VerifyOutcome:
    return VerifyOutcome(VALID)


def _bad(reason: str) -> VerifyOutcome:
    return VerifyOutcome(INVALID, reason)


@dataclass(frozen=True)
class BlockCertificate:
    proposal: Proposal
    proposer: PartyId

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(certificate_to_dict(self), sort_keys=True).encode()
        ).hexdigest()


class _Evidence:
    """Cited votes reshaped for verification: per-voter valid prefixes."""

    def __init__(self) -> None:
        self.valid_by_party: dict[PartyId, list[Vote]] = {}
        self.mismatch_found = False

    def seq_of(self, party: PartyId, rid: RequestId) -> Optional[int]:
        for v in self.valid_by_party.get(party, []):
            if v.request == rid:
                return v.seq
        return None

    def votes_for(self, rid: RequestId) -> list[Vote]:
        out = []
        for votes in self.valid_by_party.values():
            for v in votes:
                if v.request == rid:
                    out.append(v)
        return out

    def cited_requests(self) -> list[RequestId]:
        seen: dict[RequestId, None] = {}
        for votes in self.valid_by_party.values():
            for v in votes:
                seen.setdefault(v.request, None)
        return list(seen)

    def count_before(self, r: RequestId, r2: RequestId) -> int:
        count = 0
        for party, votes in self.valid_by_party.items():
            seq_r = self.seq_of(party, r)
            if seq_r is None:
                continue
            seq_r2 = self.seq_of(party, r2)
            if seq_r2 is None or seq_r < seq_r2:
                count += 1
        return count


def _collect_evidence(cfg: QuorumConfig, cert: BlockCertificate,
                      timestamped: bool) -> tuple[Optional[_Evidence], Optional[VerifyOutcome]]:
    prop = cert.proposal
    ev = _Evidence()
    for party, votes in prop.votes_by_party.items():
        if not (0 <= party < cfg.n):
            return None, _bad("bad-attestation")
        expected_seq = 0
        prefix: list[Vote] = []
        truncated = False
        for v in sorted(votes, key=lambda v: v.seq):
            if v.party != party:
                return None, _bad("bad-attestation")
            if not verify(v.att, vote_payload(v.instance, v.block, v.seq, v.ts, v.request)):
                return None, _bad("bad-attestation")
            if v.instance != prop.instance or v.block != prop.block_number:
                return None, _bad("bad-attestation")
            if v.seq != expected_seq:
                return None, _bad("missing-history")
            expected_seq += 1
            if v.request not in prop.request_table:
                return None, _bad("missing-history")
            if timestamped:
                if v.ts is None:
                    return None, _bad("missing-history")
                if prefix and not truncated and v.ts <= prefix[-1].ts:
                    # Sequence and timestamp orders disagree: this vote and all
                    # that follow from this voter are discounted.
                    ev.mismatch_found = True
                    truncated = True
            if not truncated:
                prefix.append(v)
        if prefix:
            ev.valid_by_party[party] = prefix
    for rid, req in prop.request_table.items():
        if request_id(req.market, req.payload) != rid:
            return None, _bad("bad-attestation")
    return ev, None


def _achievable_medians(timestamps: list[int], q: int) -> set[int]:
    if len(timestamps) < q:
        return set()
    return {median_timestamp(sub) for sub in combinations(sorted(timestamps), q)}


def _verify(cfg: QuorumConfig, cert: BlockCertificate, timestamped: bool) -> VerifyOutcome:
    prop = cert.proposal
    if not prop.requests:
        return _bad("empty-block")
    if len(set(prop.requests)) != len(prop.requests):
        return _bad("duplicate-request")
    ev, err = _collect_evidence(cfg, cert, timestamped)
    if err is not None:
        return err
    for rid in prop.requests:
        if len(ev.votes_for(rid)) < cfg.strong_size:
            return _bad("insufficient-votes")
    if timestamped and ev.mismatch_found:
        return _bad("timestamp-order")

    member_set = set(prop.requests)
    if prop.mode_tag == TIMED_FAIR:
        if prop.pivot is None or prop.pivot.request not in member_set:
            return _bad("invalid-pivot")
        seed_ts = [v.ts for v in ev.votes_for(prop.pivot.request)]
        if prop.pivot.m_r not in _achievable_medians(seed_ts, cfg.strong_size):
            return _bad("invalid-pivot")
        for rid in ev.cited_requests():
            if rid in member_set:
                continue
            below = sum(1 for v in ev.votes_for(rid) if v.ts < prop.pivot.m_r)
            if below >= cfg.weak_size:
                return _bad("omitted-blocked-request")
        medians = {
            rid: median_timestamp([v.ts for v in ev.votes_for(rid)])
            for rid in prop.requests
        }
        ordered = sorted(prop.requests, key=lambda rid: (medians[rid], rid))
        if list(prop.requests) != ordered:
            return _bad("timestamp-order")
    else:
        table = prop.request_table
        for rid in ev.cited_requests():
            if rid in member_set:
                continue
            for member in prop.requests:
                if table[rid].market != table[member].market:
                    continue
                if ev.count_before(member, rid) < cfg.weak_size:
                    return _bad("omitted-blocked-request")
    return _ok()


def verify_block(cfg: QuorumConfig, cert: BlockCertificate) -> VerifyOutcome:
    """Plain block validity: non-empty, a strong quorum of fully-historied
    votes per member, and no cited request left out while it still blocks."""
    return _verify(cfg, cert, timestamped=False)


def verify_block_timestamped(cfg: QuorumConfig, cert: BlockCertificate) -> VerifyOutcome:
    """Block validity under timestamped vote rules: voters whose timestamps run
    against their sequence numbers lose their votes from the mismatch onward,
    which can drop a member below quorum."""
    return _verify(cfg, cert, timestamped=True)


def verify_certificate(cfg: QuorumConfig, cert: BlockCertificate) -> VerifyOutcome:
    """Dispatch on vote shape: timestamped votes get the stricter rules."""
    has_ts = any(
        v.ts is not None for votes in cert.proposal.votes_by_party.values() for v in votes
    )
    if has_ts or cert.proposal.mode_tag == TIMED_FAIR:
        return verify_block_timestamped(cfg, cert)
    return verify_block(cfg, cert)


# -- canonical serialization -------------------------------------------------

def certificate_to_dict(cert: BlockCertificate) -> dict:
    prop = cert.proposal
    return {
        "instance": prop.instance,
        "block": prop.block_number,
        "mode": prop.mode_tag,
        "proposer": cert.proposer,
        "requests": list(prop.requests),
        "pivot": (
            None
            if prop.pivot is None
            else {
                "request": prop.pivot.request,
                "timestamps": list(prop.pivot.timestamps),
                "median": prop.pivot.m_r,
            }
        ),
        "votes": {
            str(party): [[v.seq, v.ts, v.request, v.att.digest] for v in votes]
            for party, votes in prop.votes_by_party.items()
        },
        "requests_table": {
            rid: {"market": req.market, "payload": req.payload.hex()}
            for rid, req in prop.request_table.items()
        },
    }


def certificate_from_dict(data: dict) -> BlockCertificate:
    pivot = None
    if data["pivot"] is not None:
        pivot = MedianSummary(
            request=data["pivot"]["request"],
            timestamps=tuple(data["pivot"]["timestamps"]),
            m_r=data["pivot"]["median"],
        )
    votes_by_party = {}
    for party_s, votes in data["votes"].items():
        party = int(party_s)
        votes_by_party[party] = tuple(
            Vote(
                instance=data["instance"],
                block=data["block"],
                seq=seq,
                ts=ts,
                request=rid,
                att=Attestation(signer=party, digest=att),
            )
            for seq, ts, rid, att in votes
        )
    table = {
        rid: Request(id=rid, market=entry["market"], payload=bytes.fromhex(entry["payload"]))
        for rid, entry in data["requests_table"].items()
    }
    prop = Proposal(
        instance=data["instance"],
        block_number=data["block"],
        mode_tag=data["mode"],
        requests=tuple(data["requests"]),
        pivot=pivot,
        votes_by_party=votes_by_party,
        request_table=table,
    )
    return BlockCertificate(proposal=prop, proposer=data["proposer"])

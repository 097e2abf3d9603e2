"""Leader engines: block-fair, clock-fair, and hybrid proposal construction.

Each engine is a deterministic state machine over a VoteStore. The driver
ingests delivered votes and calls step(); a step emits at most one proposal,
and the surrounding broadcast loop replays undelivered requests into a fresh
incarnation after every accepted block. Proposals cite the full accepted vote
logs so a verifier can recheck the emission conditions with no leader state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

from .core import PartyId, QuorumConfig, Request, RequestId, Timestamp
from .fairness import MedianSummary, blocks, max_median, median_timestamp, timed_precedes
from .votes import TIMESTAMPED, Vote, VoteStore, make_vote

NEVERENDING = "neverending"
CLOCKED = "clocked"
HYBRID = "hybrid"

BLOCK_FAIR = "block-fair"
TIMED_FAIR = "timed-fair"


@dataclass(frozen=True)
class CandidateBlock:
    """A set of requests that must ship together, grown around one seed."""

    seed: RequestId
    members: tuple[RequestId, ...]

    @property
    def order(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Proposal:
    instance: str
    block_number: int
    mode_tag: str
    requests: tuple[RequestId, ...]
    pivot: Optional[MedianSummary]
    # Justification: every accepted vote in the store at emission, per party,
    # in sequence order. Self-contained evidence for the block verifiers.
    votes_by_party: dict[PartyId, tuple[Vote, ...]]
    request_table: dict[RequestId, Request]

    def cited_requests(self) -> list[RequestId]:
        seen: dict[RequestId, None] = {}
        for votes in self.votes_by_party.values():
            for v in votes:
                seen.setdefault(v.request, None)
        return list(seen)


@dataclass
class CoinConfig:
    """Shared-randomness stop rule for the hybrid cutoff region."""

    shared_seed: str = "coin"
    stop_probability: float = 1.0


def coin_stop(shared_seed: str, block_number: int, admissions_past_cutoff: int,
              stop_probability: float) -> bool:
    """Deterministic pseudo-random stop bit; equal inputs give equal bits on
    every party, so a distributed evaluation cannot diverge."""
    if stop_probability >= 1.0:
        return True
    h = hashlib.sha256(
        f"{shared_seed}|{block_number}|{admissions_past_cutoff}".encode()
    ).digest()
    draw = int.from_bytes(h[:8], "big") / float(1 << 64)
    return draw < stop_probability


@dataclass
class LeaderState:
    cfg: QuorumConfig
    mode: str
    party: PartyId
    instance: str
    block_number: int
    store: VoteStore
    r_max: int = 0
    coin: CoinConfig = field(default_factory=CoinConfig)
    delivered: set[RequestId] = field(default_factory=set)
    fallback_active: bool = False
    fallback_snapshot: tuple[RequestId, ...] = ()
    admissions_past_cutoff: int = 0
    fallback_blocks_emitted: int = 0
    max_candidate_order: int = 0
    cutoff_events: int = 0
    carried_invalid: tuple[PartyId, ...] = ()


def new_leader(cfg: QuorumConfig, mode: str, party: PartyId, instance: str,
               block_number: int = 0, r_max: int = 0,
               coin: Optional[CoinConfig] = None) -> LeaderState:
    store_mode = TIMESTAMPED if mode in (CLOCKED, HYBRID) else "plain"
    store = VoteStore(cfg, store_mode, instance, block_number)
    return LeaderState(
        cfg=cfg, mode=mode, party=party, instance=instance,
        block_number=block_number, store=store, r_max=r_max,
        coin=coin or CoinConfig(),
    )


# -- shared helpers ----------------------------------------------------------

def _quorum_order(state: LeaderState, at: dict[RequestId, int]) -> list[RequestId]:
    """Requests holding the given quorum, first-completed first; residual ties
    (impossible with a strict counter, kept for robustness) break on id."""
    return sorted(at, key=lambda rid: (at[rid], rid))


def _outside_blocker_exists(state: LeaderState, members: set[RequestId]) -> bool:
    store, cfg = state.store, state.cfg
    for rid in store.known_requests():
        if rid in members:
            continue
        for m in members:
            if blocks(store, cfg, rid, m):
                return True
    return False


def _grow_closure(state: LeaderState, seed: RequestId, threshold: int,
                  respect_cutoff: bool) -> tuple[list[RequestId], bool]:
    """Grow a candidate from seed: admit any outside request that still blocks
    a member and has at least `threshold` votes. Returns (members, halted),
    halted meaning the hybrid cutoff fired during growth."""
    store, cfg = state.store, state.cfg
    members: list[RequestId] = [seed]
    member_set = {seed}
    halted = False
    changed = True
    while changed and not halted:
        changed = False
        for rid in store.known_requests():
            if rid in member_set or store.accepted_count(rid) < threshold:
                continue
            if any(blocks(store, cfg, rid, m) for m in members):
                members.append(rid)
                member_set.add(rid)
                changed = True
                if respect_cutoff and len(members) > state.r_max:
                    state.admissions_past_cutoff += 1
                    if coin_stop(state.coin.shared_seed, state.block_number,
                                 state.admissions_past_cutoff,
                                 state.coin.stop_probability):
                        halted = True
                        break
    return members, halted


def _prune_non_blocking(state: LeaderState, seed: RequestId,
                        members: list[RequestId]) -> list[RequestId]:
    """Drop non-seed members that no longer block any other member. Pruning in
    simultaneous rounds keeps the fixpoint independent of iteration order."""
    store, cfg = state.store, state.cfg
    current = list(members)
    while True:
        keep = [
            m for m in current
            if m == seed or any(blocks(store, cfg, m, o) for o in current if o != m)
        ]
        if len(keep) == len(current):
            return current
        current = keep


def _build_proposal(state: LeaderState, requests: list[RequestId], mode_tag: str,
                    pivot: Optional[MedianSummary]) -> Proposal:
    store = state.store
    table = {}
    votes_by_party = {}
    for party, accepted in store.accepted_logs().items():
        votes_by_party[party] = tuple(accepted)
        for v in accepted:
            table.setdefault(v.request, store.requests[v.request])
    return Proposal(
        instance=state.instance,
        block_number=state.block_number,
        mode_tag=mode_tag,
        requests=tuple(requests),
        pivot=pivot,
        votes_by_party=votes_by_party,
        request_table=table,
    )


def _cited_median(store: VoteStore, rid: RequestId) -> Timestamp:
    return median_timestamp([v.ts for v in store.votes_for(rid) if v.ts is not None])


def _timed_request_order(store: VoteStore, requests: list[RequestId]) -> list[RequestId]:
    # In-block order is locally recomputable from the cited votes.
    return sorted(requests, key=lambda rid: (_cited_median(store, rid), rid))


# -- block-fair engine (may never emit, by design) ---------------------------

def neverending_step(state: LeaderState) -> Optional[Proposal]:
    if state.mode != NEVERENDING:
        raise ValueError("engine is not in neverending mode")
    store, cfg = state.store, state.cfg
    seeds = _quorum_order(state, store.strong_at)
    if not seeds:
        return None
    members, _ = _grow_closure(state, seeds[0], cfg.strong_size, respect_cutoff=False)
    state.max_candidate_order = max(state.max_candidate_order, len(members))
    if _outside_blocker_exists(state, set(members)):
        return None
    return _build_proposal(state, members, BLOCK_FAIR, pivot=None)


# -- clock-fair engine -------------------------------------------------------

def _first_quorum_pivot(state: LeaderState, seed: RequestId) -> MedianSummary:
    """Median of the timestamps in the first strong quorum observed for seed."""
    q = state.cfg.strong_size
    records = state.store.acceptance_records(seed)
    first = sorted(records, key=lambda av: av.index)[:q]
    ts = tuple(av.vote.ts for av in first)
    return MedianSummary(request=seed, timestamps=ts, m_r=median_timestamp(ts))


def _frozen_low_set(state: LeaderState, seed: RequestId) -> list[RequestId]:
    """Requests that, at the moment seed completed its strong quorum, already
    had an accepted vote timestamped below some vote for seed."""
    store = state.store
    cutoff_index = store.strong_at[seed]
    seed_max_ts = max(
        av.vote.ts for av in store.acceptance_records(seed) if av.index <= cutoff_index
    )
    low = []
    for rid in store.known_requests():
        if rid == seed:
            continue
        for av in store.acceptance_records(rid):
            if av.index <= cutoff_index and av.vote.ts is not None and av.vote.ts < seed_max_ts:
                low.append(rid)
                break
    return low


def clocked_step(state: LeaderState) -> Optional[Proposal]:
    if state.mode != CLOCKED:
        raise ValueError("engine is not in clocked mode")
    store, cfg = state.store, state.cfg
    seeds = _quorum_order(state, store.strong_at)
    if not seeds:
        return None
    seed = seeds[0]
    pivot = _first_quorum_pivot(state, seed)
    low_set = _frozen_low_set(state, seed)
    # Wait until one common set of n-t active parties holds valid votes for
    # every request that was already timestamped below the seed when it
    # completed its quorum.
    covering = 0
    for party in store.active_parties():
        log = store.logs[party]
        voted = {v.request for v in log.accepted}
        if all(rid in voted for rid in low_set):
            covering += 1
    if covering < cfg.strong_size:
        return None
    # Admission sweeps everything currently known, not just the frozen set:
    # votes that arrived during the coverage wait are part of the cited
    # evidence and the block verifier holds the block to them.
    members = [seed]
    for rid in store.known_requests():
        if rid == seed:
            continue
        if timed_precedes(store, cfg, rid, pivot):
            members.append(rid)
    if any(store.accepted_count(m) < cfg.strong_size for m in members):
        return None
    ordered = _timed_request_order(store, members)
    return _build_proposal(state, ordered, TIMED_FAIR, pivot=pivot)


# -- hybrid engine -----------------------------------------------------------

def _hybrid_candidates(state: LeaderState) -> tuple[list[CandidateBlock], bool]:
    """Rebuild every per-request candidate from the store. Returns the list in
    seed quorum order plus whether any candidate crossed the cutoff."""
    store, cfg = state.store, state.cfg
    candidates = []
    crossed = False
    for seed in _quorum_order(state, store.weak_at):
        members, halted = _grow_closure(state, seed, cfg.weak_size, respect_cutoff=True)
        if halted:
            crossed = True
        members = _prune_non_blocking(state, seed, members)
        candidates.append(CandidateBlock(seed=seed, members=tuple(members)))
        state.max_candidate_order = max(state.max_candidate_order, len(members))
        if len(members) > state.r_max:
            crossed = True
        if crossed:
            break
    return candidates, crossed


def _hybrid_block_fair(state: LeaderState) -> Optional[Proposal]:
    store, cfg = state.store, state.cfg
    candidates, crossed = _hybrid_candidates(state)
    for cand in candidates:
        member_set = set(cand.members)
        if _outside_blocker_exists(state, member_set):
            continue
        # Every shipped member needs a strong quorum behind it or the block
        # certificate cannot carry n-t votes per request.
        if any(store.accepted_count(m) < cfg.strong_size for m in cand.members):
            continue
        return _build_proposal(state, list(cand.members), BLOCK_FAIR, pivot=None)
    if crossed:
        state.fallback_active = True
        state.fallback_snapshot = tuple(store.known_requests())
        state.cutoff_events += 1
    return None


def _hybrid_fallback(state: LeaderState) -> Optional[Proposal]:
    store, cfg = state.store, state.cfg
    remaining = [rid for rid in state.fallback_snapshot if rid not in state.delivered]
    if not remaining:
        state.fallback_active = False
        return None
    for seed in _quorum_order(state, store.strong_at):
        if seed not in remaining:
            continue
        pivot = max_median(store, cfg, seed)
        seed_max_ts = max(v.ts for v in store.votes_for(seed))
        low_set = []
        for rid in store.known_requests():
            if rid == seed:
                continue
            if any(v.ts is not None and v.ts < seed_max_ts for v in store.votes_for(rid)):
                low_set.append(rid)
        ready = True
        members = [seed]
        for rid in low_set:
            below = sum(1 for v in store.votes_for(rid) if v.ts is not None and v.ts < pivot.m_r)
            if below >= cfg.weak_size:
                members.append(rid)
            elif store.accepted_count(rid) < cfg.strong_size:
                ready = False
                break
        if not ready:
            continue
        if any(store.accepted_count(m) < cfg.strong_size for m in members):
            continue
        ordered = _timed_request_order(store, members)
        state.fallback_blocks_emitted += 1
        return _build_proposal(state, ordered, TIMED_FAIR, pivot=pivot)
    return None


def hybrid_step(state: LeaderState) -> list[Proposal]:
    if state.mode != HYBRID:
        raise ValueError("engine is not in hybrid mode")
    if state.fallback_active:
        p = _hybrid_fallback(state)
        if p is None and not state.fallback_active:
            # Snapshot drained; resume block-fair in the same step.
            p = _hybrid_block_fair(state)
        return [p] if p else []
    p = _hybrid_block_fair(state)
    if p is None and state.fallback_active:
        p = _hybrid_fallback(state)
    return [p] if p else []


def step(state: LeaderState) -> list[Proposal]:
    if state.mode == NEVERENDING:
        p = neverending_step(state)
    elif state.mode == CLOCKED:
        p = clocked_step(state)
    else:
        return hybrid_step(state)
    return [p] if p else []


# -- replay ------------------------------------------------------------------

def replay_undelivered(state: LeaderState, next_block: int,
                       delivered: set[RequestId]) -> LeaderState:
    """Fresh incarnation for the next block: re-ingest, per party in original
    order, every accepted vote for a request that was not delivered, with
    sequence numbers re-assigned densely from zero. Permanent exclusions and
    the fallback phase carry over; the vote store itself starts clean."""
    fresh = VoteStore(state.cfg, state.store.mode, state.instance, next_block)
    for req in state.store.requests.values():
        if req.id not in delivered:
            fresh.register_request(req)
    for party, log in state.store.logs.items():
        seq = 0
        for v in log.accepted:
            if v.request in delivered:
                continue
            replayed = make_vote(party, state.instance, next_block, seq, v.ts, v.request)
            fresh.ingest(replayed, state.store.requests.get(v.request))
            seq += 1
    invalid = tuple(sorted(set(state.carried_invalid) | set(state.store.invalid_parties())))
    for party in invalid:
        fresh.mark_invalid(party)
    snapshot = tuple(r for r in state.fallback_snapshot if r not in delivered)
    return replace(
        state,
        block_number=next_block,
        store=fresh,
        delivered=set(delivered),
        fallback_snapshot=snapshot,
        fallback_active=state.fallback_active and bool(snapshot),
        carried_invalid=invalid,
    )

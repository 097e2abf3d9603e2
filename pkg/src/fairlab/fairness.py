"""Pure fairness predicates: the blocking relation and median-timestamp machinery.

`blocks(r2, r)` answers whether current evidence still leaves open that r2 must
be delivered in the same block as r or earlier. It turns false exactly when a
weak quorum reported seeing r before r2 (one of those reporters is honest, so
not every honest party can have seen r2 first), or when the two requests live
in different markets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .core import QuorumConfig, RequestId, Timestamp
from .votes import VoteStore


@dataclass(frozen=True)
class MedianSummary:
    """A pivot for timed decisions: the largest median over any strong-quorum
    sized subset of the vote timestamps collected for one request."""

    request: RequestId
    timestamps: tuple[Timestamp, ...]
    m_r: Timestamp


def blocks(store: VoteStore, cfg: QuorumConfig, r2: RequestId, r: RequestId) -> bool:
    if store.market_of(r2) != store.market_of(r):
        return False
    return store.count_before(r, r2) < cfg.weak_size


def median_timestamp(ts: Iterable[Timestamp]) -> Timestamp:
    """Median of a timestamp multiset; even cardinality takes the lower middle."""
    ordered = sorted(ts)
    if not ordered:
        raise ValueError("median of empty timestamp multiset")
    return ordered[(len(ordered) - 1) // 2]


def max_median(store: VoteStore, cfg: QuorumConfig, r: RequestId) -> MedianSummary:
    """Largest median over any (n-t)-subset of r's vote timestamps.

    Computed via the shortcut: the median of the n-t largest timestamps.
    Equivalence with full subset enumeration is covered by an exhaustive test.
    """
    ts = tuple(v.ts for v in store.votes_for(r) if v.ts is not None)
    q = cfg.strong_size
    if len(ts) < q:
        raise ValueError(f"request {r[:12]} has {len(ts)} timestamped votes, needs {q}")
    top = sorted(ts)[-q:]
    return MedianSummary(request=r, timestamps=ts, m_r=median_timestamp(top))


def max_median_of(timestamps: Iterable[Timestamp], q: int) -> Timestamp:
    """Shortcut formula over a bare multiset (q = strong quorum size)."""
    ordered = sorted(timestamps)
    if len(ordered) < q:
        raise ValueError("not enough timestamps")
    return median_timestamp(ordered[-q:])


def enumerate_max_median(timestamps: Iterable[Timestamp], q: int) -> Timestamp:
    """Brute-force reference: enumerate every q-subset. Test oracle only."""
    ordered = sorted(timestamps)
    if len(ordered) < q:
        raise ValueError("not enough timestamps")
    return max(median_timestamp(sub) for sub in combinations(ordered, q))


def timed_precedes(store: VoteStore, cfg: QuorumConfig, r2: RequestId, pivot: MedianSummary) -> bool:
    """True iff a weak quorum of votes timestamp r2 strictly below the pivot median."""
    below = sum(
        1 for v in store.votes_for(r2) if v.ts is not None and v.ts < pivot.m_r
    )
    return below >= cfg.weak_size

import pytest

from fairlab.core import make_request, validate_config
from fairlab.votes import PLAIN, VoteStore, make_vote

INSTANCE = "test-instance"


@pytest.fixture
def cfg4():
    return validate_config(4, 1)


@pytest.fixture
def cfg7():
    return validate_config(7, 2)


def req(name, market="m"):
    return make_request(market, name.encode())


def new_store(cfg, mode=PLAIN, block=0):
    return VoteStore(cfg, mode, INSTANCE, block)


def cast(store, party, seq, request, ts=None):
    """Sign and ingest one vote; returns the ingest outcome."""
    vote = make_vote(party, store.instance, store.block, seq, ts, request.id)
    return store.ingest(vote, request)


def fill_logs(store, logs, timestamped=False):
    """logs: {party: [request, ...]} ingested in per-party order, timestamps
    1,2,3,... when requested."""
    for party, requests in logs.items():
        for seq, request in enumerate(requests):
            cast(store, party, seq, request, ts=seq + 1 if timestamped else None)

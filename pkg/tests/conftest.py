import pathlib

import pytest

from fairchk import load

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"

# Expected checker outcome of every corpus file: definition name -> rank
# (as rendered in the report) for the accepted ones, None for the rejected.
CORPUS_RANKS = {
    "bsc.ft": {"Buyer": 0, "Seller": 0, "Carrier": 0, "Main": 3},
    "slot.ft": {"Machine": 0, "Player": 0, "Main": 1},
    "rank_example.ft": {},
    "delegation.ft": {"Sender": 0, "Receiver": 0, "Peer": 0, "Main": 2},
    "infinite_sessions.ft": {"C": 0, "Main": 1},
    "action_unbounded.ft": None,
    "session_unbounded.ft": None,
    "cast_unbounded.ft": None,
    "finite_unfair.ft": None,
    "fwd.ft": None,
}

ACCEPTED = sorted(name for name, ranks in CORPUS_RANKS.items() if ranks is not None)
REJECTED = sorted(name for name, ranks in CORPUS_RANKS.items() if ranks is None)

# accepted programs with a runnable zero-parameter Main
RUNNABLE = ["bsc.ft", "slot.ft", "delegation.ft", "infinite_sessions.ft"]


def corpus_path(name: str) -> str:
    if not name.endswith(".ft"):
        name += ".ft"
    return str(CORPUS / name)


def corpus_text(name: str) -> str:
    return pathlib.Path(corpus_path(name)).read_text(encoding="utf-8")


def load_corpus(name: str):
    return load(corpus_text(name))


@pytest.fixture
def bsc():
    return load_corpus("bsc.ft")


@pytest.fixture
def slot():
    return load_corpus("slot.ft")

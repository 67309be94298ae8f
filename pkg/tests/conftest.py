import sys
from importlib.resources import files
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pact.beliefs import BeliefProfile, load_beliefs  # noqa: E402
from pact.checker import check_well_formed  # noqa: E402
from pact.game import build_game  # noqa: E402
from pact.parser import parse_protocol  # noqa: E402

DATA = files("pact") / "data"
BOOKSELLER = str(DATA / "bookseller.pact")
LEMONS = str(DATA / "lemons.beliefs.json")

# The lemons market with a naive seller removed: everything uniform at level 0.
LEMONS_UNIFORM = {
    "priors": {"book.quality": {"low": 0.4, "high": 0.6}},
    "utility_terms": {"buyer": {"book.quality": {"table": {"low": 0, "high": 3}}}},
    "level": 1,
    "noise": 0.2,
}

# Accepts with probability p/2 at price p.
PRICE_PROPORTIONAL_BUYER = {"accept": [
    {"given": {"price": 1}, "probs": {"true": 0.5, "false": 0.5}},
    {"given": {"price": 2}, "probs": {"true": 1.0, "false": 0.0}},
]}


def parse_ok(text, file="test.pact"):
    p = parse_protocol(text, file)
    assert not isinstance(p, list), [d.format() for d in p]
    return p


def check_ok(text, file="test.pact"):
    c = check_well_formed(parse_ok(text, file))
    assert not isinstance(c, list), [d.format() for d in c]
    return c


def diagnostics_of(text):
    p = parse_protocol(text, "m.pact")
    if isinstance(p, list):
        return p
    c = check_well_formed(p)
    return c if isinstance(c, list) else c.warnings


@pytest.fixture(scope="session")
def bookseller_text():
    return (DATA / "bookseller.pact").read_text()


@pytest.fixture(scope="session")
def bookseller(bookseller_text):
    return check_ok(bookseller_text, "bookseller.pact")


@pytest.fixture(scope="session")
def lemons_profile():
    return load_beliefs(LEMONS)


@pytest.fixture(scope="session")
def uniform_profile():
    return BeliefProfile.from_dict(LEMONS_UNIFORM)


@pytest.fixture(scope="session")
def lemons_game(bookseller, uniform_profile):
    return build_game(bookseller, uniform_profile)

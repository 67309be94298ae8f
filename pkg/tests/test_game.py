import random

import pytest
from hypothesis import given, settings, strategies as st

from pact.ast import Label
from pact.beliefs import BeliefProfile, ProfileError
from pact.dist import check_distribution
from pact.game import (
    Chance,
    Decision,
    PolicyError,
    Terminal,
    build_game,
    expected_utility,
    outcome_distribution,
)
from conftest import LEMONS_UNIFORM, check_ok
from protogen import checked_corpus, random_profile

HIGH, LOW = Label("high", 1), Label("low", 0)


def profile_for(g, pick):
    """Policy profile with ``pick(infoset, actions) -> dist`` at every info set."""
    pp = {}
    for i in g.infosets:
        pp.setdefault(i.role, {})[i] = pick(i, g.actions(i))
    return pp


def uniform_all(g):
    return profile_for(g, lambda i, acts: {a: 1 / len(acts) for a in acts})


def seller_uniform_buyer(accept_prob):
    def pick(i, acts):
        if i.role == "buyer":
            return {True: accept_prob, False: 1 - accept_prob}
        return {a: 1 / len(acts) for a in acts}
    return pick


def test_lemons_tree_shape(lemons_game):
    g = lemons_game
    assert g.summary() == "8 terminals, 4 decision info sets, 1 chance node"
    assert isinstance(g.root, Chance) and g.root.var == "book.quality"
    assert len(g.infosets_of("seller")) == 2 and len(g.infosets_of("buyer")) == 2
    for i in g.infosets_of("seller"):
        assert dict(i.observed)["book.quality"] in (HIGH, LOW)
    for i in g.infosets_of("buyer"):
        assert "book.quality" not in dict(i.observed)
        assert len(g.infosets[i]) == 2  # one node per quality


def test_accept_terminal_utilities(lemons_game):
    [t] = [t for t in lemons_game.terminals
           if t.bindings["book.quality"] == HIGH and t.bindings["price"] == 2 and t.bindings["accept"]]
    assert t.utility == {"buyer": 1.0, "seller": 2.0}
    assert t.holdings["book"] == "buyer"


def test_rejection_is_status_quo(lemons_game):
    for t in lemons_game.terminals:
        if not t.bindings["accept"]:
            assert t.utility == {"buyer": 0.0, "seller": 0.0}


def test_always_accept_buyer_eu(lemons_game):
    pp = profile_for(lemons_game, seller_uniform_buyer(1.0))
    assert expected_utility(lemons_game, "buyer", pp) == pytest.approx(0.6 * 3 - 1.5, abs=1e-12)


def test_never_accept_seller_eu(lemons_game):
    pp = profile_for(lemons_game, seller_uniform_buyer(0.0))
    assert expected_utility(lemons_game, "seller", pp) == 0.0


def test_all_zero_utilities_give_zero():
    c = check_ok("domain D = {1, 2}\nprotocol p {\n  x = a.choose(D)\n  send(x, b)\n}\n")
    g = build_game(c, BeliefProfile())
    pp = uniform_all(g)
    assert expected_utility(g, "a", pp) == 0.0 == expected_utility(g, "b", pp)


def test_uniform_outcome_distribution(lemons_game):
    out = outcome_distribution(lemons_game, uniform_all(lemons_game))
    assert len(out) == 8
    for t, p in out:
        expected = 0.15 if t.bindings["book.quality"] == HIGH else 0.10
        assert p == pytest.approx(expected, abs=1e-12)
    check_distribution({t.id: p for t, p in out})


def test_point_mass_prior_and_deterministic_policy(bookseller):
    prof = BeliefProfile.from_dict({**LEMONS_UNIFORM, "priors": {"book.quality": {"high": 1.0}}})
    g = build_game(bookseller, prof)
    pp = profile_for(g, lambda i, acts: {acts[-1]: 1.0})
    live = [(t, p) for t, p in outcome_distribution(g, pp) if p > 0]
    assert len(live) == 1 and live[0][1] == 1.0


def test_no_choices_single_terminal():
    c = check_ok("param t : T @ a\nprotocol p {\n  send(t, b)\n}\n")
    g = build_game(c, BeliefProfile())
    assert isinstance(g.root, Terminal)
    assert g.root.utility == {"a": 0.0, "b": 0.0}
    assert [p for _, p in outcome_distribution(g, {})] == [1.0]


def test_missing_prior_or_term(bookseller):
    with pytest.raises(ProfileError, match="book.quality"):
        build_game(bookseller, BeliefProfile.from_dict({**LEMONS_UNIFORM, "priors": {}}))
    with pytest.raises(ProfileError, match=r"buyer\.values\(book\.quality\)"):
        build_game(bookseller, BeliefProfile.from_dict({**LEMONS_UNIFORM, "utility_terms": {}}))


def test_bad_prior_is_rejected(bookseller):
    with pytest.raises(ProfileError):
        build_game(bookseller, BeliefProfile.from_dict(
            {**LEMONS_UNIFORM, "priors": {"book.quality": {"low": 0.5, "high": 0.6}}}))
    with pytest.raises(ProfileError):
        build_game(bookseller, BeliefProfile.from_dict(
            {**LEMONS_UNIFORM, "priors": {"book.quality": {"low": 0.4, "mid": 0.6}}}))


def test_missing_policy_is_reported(lemons_game):
    pp = uniform_all(lemons_game)
    del pp["buyer"][next(iter(pp["buyer"]))]
    with pytest.raises(PolicyError):
        expected_utility(lemons_game, "buyer", pp)


def test_changing_prior_keeps_terminal_utilities(bookseller, lemons_game):
    other = BeliefProfile.from_dict({**LEMONS_UNIFORM, "priors": {"book.quality": {"low": 0.9, "high": 0.1}}})
    g2 = build_game(bookseller, other)
    assert [t.utility for t in g2.terminals] == [t.utility for t in lemons_game.terminals]


def test_info_sets_use_checker_knowledge(bookseller, lemons_game):
    for i in lemons_game.infosets:
        assert {k for k, _ in i.observed} == set(bookseller.signatures[i.var])


def _paths(node, trail=()):
    if isinstance(node, Terminal):
        yield trail
        return
    for c in node.children:
        yield from _paths(c, trail + ((node,) if isinstance(node, Decision) else ()))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_perfect_recall_and_sound_info_sets(seed):
    [(_, c)] = checked_corpus(seed, 1)
    g = build_game(c, random_profile(c, random.Random(seed)))
    for i, nodes in g.infosets.items():
        assert {n.actions for n in nodes} == {g.actions(i)}
        for n in nodes:
            seen = set(dict(i.observed))
            # the key is exactly the role's known bindings, a superset of what the checker guarantees
            assert seen >= set(c.signatures[i.var]) & set(n.bindings)
            assert all(n.bindings[k] == v for k, v in i.observed)
    for trail in _paths(g.root):
        last: dict = {}
        for d in trail:
            now = set(d.infoset.observed)
            assert last.get(d.role, set()) <= now
            last[d.role] = now


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1))
def test_expected_utility_is_linear_in_one_info_set(seed, t):
    [(_, c)] = checked_corpus(seed, 1)
    g = build_game(c, random_profile(c, random.Random(seed)))
    if not g.infosets:
        return
    rng = random.Random(seed)
    base = profile_for(g, lambda i, acts: {a: 1 / len(acts) for a in acts})
    target = sorted(g.infosets, key=lambda i: i.sort_key())[rng.randrange(len(g.infosets))]
    acts = g.actions(target)
    d0 = {a: 1.0 if a == acts[0] else 0.0 for a in acts}
    d1 = {a: 1.0 if a == acts[-1] else 0.0 for a in acts}

    def eu_at(s):
        pp = {r: dict(m) for r, m in base.items()}
        pp[target.role][target] = {a: (1 - s) * d0[a] + s * d1[a] for a in acts}
        return {r: expected_utility(g, r, pp) for r in c.roles}

    e0, e1, et = eu_at(0.0), eu_at(1.0), eu_at(t)
    for r in c.roles:
        assert et[r] == pytest.approx((1 - t) * e0[r] + t * e1[r], abs=1e-9)

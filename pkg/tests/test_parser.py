import random

import pytest
from hypothesis import given, settings, strategies as st

from pact.ast import Choose, Exchange, IfBroadcast, Label, Lit, NatureChoose, Send, Values, Var
from pact.parser import parse_protocol, render_protocol, tokenize
from conftest import parse_ok
from protogen import generate


def test_bookseller_statements(bookseller_text):
    p = parse_ok(bookseller_text)
    kinds = [type(s) for s in p.body]
    assert kinds == [NatureChoose, Values, Send, Choose, Send, IfBroadcast]
    assert p.body[0].target == "book.quality"
    assert p.body[3] == Choose("price", "seller", "Prices")
    guard = p.body[5]
    assert guard.var == "accept" and guard.guard == Choose("accept", "buyer", "Bool")
    assert guard.then == (Exchange("buyer", "seller", Var("book"), Var("price")),)


def test_empty_protocol():
    p = parse_ok("protocol empty { }")
    assert p.body == ()
    assert render_protocol(p) == "protocol empty {\n}\n"


def test_missing_comma_is_one_error():
    diags = parse_protocol("protocol p {\n  send(title seller)\n}\n", "m.pact")
    assert isinstance(diags, list) and len(diags) == 1
    d = diags[0]
    assert (d.code, d.span.line, d.span.column) == ("P001", 2, 14)
    assert d.format().startswith("m.pact:2:14: P001:")


def test_nested_comments_are_skipped():
    p = parse_ok("(* outer (* inner *) still outer *)\nprotocol p {\n}\n")
    assert p.name == "p"


def test_unterminated_comment_is_lexical_error():
    diags = parse_protocol("(* never closed\nprotocol p { }", "m.pact")
    assert [d.code for d in diags] == ["P002"]


def test_labels_resolve_to_domain_constants():
    p = parse_ok("domain Q = {low=0, high=1}\nprotocol p {\n  x = high @ a\n}\n")
    assert p.body[0].expr == Lit(Label("high", 1))


def test_expression_guard_and_else():
    text = ("domain P = {1, 2}\nprotocol p {\n  x = a.choose(P)\n"
            "  if broadcast(cheap = x < 2 @ a) {\n    send(x, b)\n  } else {\n    send(x, c)\n  }\n}\n")
    p = parse_ok(text)
    s = p.body[1]
    assert s.var == "cheap" and s.broadcaster == "a"
    assert len(s.then) == 1 and len(s.orelse) == 1
    assert parse_ok(render_protocol(p)) == p


def test_unnamed_guards_get_fresh_names():
    text = "protocol p {\n  if broadcast(a.choose(Bool)) {\n  }\n  if broadcast(b.choose(Bool)) {\n  }\n}\n"
    p = parse_ok(text)
    assert [s.var for s in p.body] == ["choice", "choice2"]


def test_tokens_carry_positions():
    toks, errs = tokenize("send(x, y)", "f")
    assert not errs
    assert [(t.text, t.span.column) for t in toks[:3]] == [("send", 1), ("(", 5), ("x", 6)]


def test_bookseller_round_trip(bookseller_text):
    p = parse_ok(bookseller_text)
    assert parse_ok(render_protocol(p)) == p


def test_nested_branches_round_trip():
    text = ("protocol p {\n  if broadcast(g = a.choose(Bool)) {\n"
            "    if broadcast(h = b.choose(Bool)) {\n      x = a.choose(Bool)\n    }\n  }\n}\n")
    p = parse_ok(text)
    rendered = render_protocol(p)
    assert "      x = a.choose(Bool)" in rendered
    assert parse_ok(rendered) == p


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_round_trip_on_generated_protocols(seed):
    p = parse_ok(generate(random.Random(seed)))
    once = render_protocol(p)
    assert parse_ok(once) == p
    assert render_protocol(parse_ok(once)) == once


BROKEN_LINES = ["send(x y)", "x = = 3", "if broadcast( {", "exchange(a, b, c)", "x.y <- world.pick(D)"]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_error_recovery_is_bounded(k):
    rng = random.Random(k)
    body = []
    for line in rng.sample(BROKEN_LINES, k):
        body += ["  send(t, b)", "  " + line]
    text = "param t : T @ a\nprotocol p {\n" + "\n".join(body) + "\n}\n"
    diags = parse_protocol(text, "m.pact")
    assert isinstance(diags, list)
    assert 1 <= len(diags) <= k + 2

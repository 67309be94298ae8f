import pytest

from pact.ast import (
    BOOL,
    BinOp,
    Domain,
    EvalError,
    Exchange,
    Label,
    Lit,
    Opaque,
    Send,
    UnOp,
    Var,
    desugar_exchange,
    eval_expr,
    format_value,
    free_vars,
    numeric,
    roles_of,
)
from conftest import parse_ok


def test_format_values():
    assert format_value(True) == "true"
    assert format_value(3) == "3"
    assert format_value(Label("high", 1)) == "high"
    assert format_value(Opaque("book")) == "<book>"


def test_label_magnitude_is_numeric():
    assert numeric(Label("high", 7)) == 7
    with pytest.raises(EvalError):
        numeric(Label("plain"))
    with pytest.raises(EvalError):
        numeric(True)


def test_domain_rejects_empty_and_duplicates():
    with pytest.raises(ValueError):
        Domain("E", ())
    with pytest.raises(ValueError):
        Domain("D", (1, 1))
    assert Domain("D", (1, 2)).lookup("2") == 2
    assert BOOL.lookup(True) is True
    with pytest.raises(KeyError):
        BOOL.lookup("maybe")


def test_eval_arithmetic_and_comparison():
    e = BinOp("<", BinOp("+", Var("x"), Lit(1)), Lit(Label("hi", 5)))
    assert eval_expr(e, {"x": 3}) is True
    assert eval_expr(e, {"x": 4}) is False
    assert eval_expr(UnOp("not", Lit(False)), {}) is True
    assert free_vars(e) == ["x"]
    with pytest.raises(EvalError):
        eval_expr(Var("missing"), {})


def test_exchange_desugars_to_item_then_payment():
    s = Exchange("buyer", "seller", Var("book"), Var("price"))
    item, pay = desugar_exchange(s)
    assert item == Send(Var("book"), "seller", "buyer", "item")
    assert pay == Send(Var("price"), "buyer", "seller", "money")


def test_roles_include_world_only_with_nature(bookseller_text):
    assert roles_of(parse_ok(bookseller_text)) == {"buyer", "seller", "world"}
    assert "world" not in roles_of(parse_ok("param t : T @ a\nprotocol p {\n send(t, b)\n}\n"))

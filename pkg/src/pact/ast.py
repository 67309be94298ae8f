"""Abstract syntax for Pact protocols.

Values that flow through a protocol are plain Python objects: ``int``,
``bool``, :class:`Label` (a named constant, optionally carrying a numeric
magnitude) and :class:`Opaque` (a parameter whose concrete value the
analysis never inspects).  All nodes are frozen dataclasses; source spans
are excluded from equality so that ASTs compare structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Union

from .diagnostics import SourceSpan

WORLD = "world"


class DesugarError(Exception):
    pass


class EvalError(Exception):
    pass


# -- values -----------------------------------------------------------------


@dataclass(frozen=True)
class Label:
    name: str
    magnitude: int | None = None

    def __repr__(self):
        if self.magnitude is None:
            return self.name
        return f"{self.name}={self.magnitude}"


@dataclass(frozen=True)
class Opaque:
    name: str

    def __repr__(self):
        return f"<{self.name}>"


Value = Union[int, bool, Label, Opaque]


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Label):
        return v.name
    if isinstance(v, Opaque):
        return f"<{v.name}>"
    raise TypeError(f"not a Pact value: {v!r}")


def numeric(v: Value) -> int:
    """Magnitude of a value used in arithmetic and ordering."""
    if isinstance(v, bool):
        raise EvalError(f"boolean {format_value(v)} has no magnitude")
    if isinstance(v, int):
        return v
    if isinstance(v, Label) and v.magnitude is not None:
        return v.magnitude
    raise EvalError(f"{format_value(v)} has no magnitude")


@dataclass(frozen=True)
class Domain:
    name: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"domain {self.name} is empty")
        if len(set(map(format_value, self.values))) != len(self.values):
            raise ValueError(f"domain {self.name} has duplicate values")

    def lookup(self, text) -> Value:
        """Resolve a textual (or JSON scalar) value against this domain."""
        if not isinstance(text, str):
            text = format_value(text)
        for v in self.values:
            if format_value(v) == text:
                return v
        raise KeyError(f"{text!r} is not a value of domain {self.name}")

    @property
    def is_numeric(self) -> bool:
        return all(
            not isinstance(v, bool)
            and (isinstance(v, int) or (isinstance(v, Label) and v.magnitude is not None))
            for v in self.values
        )

    @property
    def is_boolean(self) -> bool:
        return set(map(format_value, self.values)) == {"true", "false"}


BOOL = Domain("Bool", (False, True))
BUILTIN_DOMAINS = {"Bool": BOOL, "bool": BOOL}


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Lit:
    value: object
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Expr = Union[Var, Lit, BinOp, UnOp]

ARITH_OPS = ("+", "-", "*")
ORDER_OPS = ("<", "<=", ">", ">=")
EQ_OPS = ("==", "!=")
BOOL_OPS = ("and", "or")


def free_vars(e: Expr) -> list[str]:
    """Variables referenced by ``e``, in first-occurrence order."""
    out: list[str] = []

    def walk(e):
        if isinstance(e, Var):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, UnOp):
            walk(e.operand)

    walk(e)
    return out


def var_nodes(e: Expr) -> Iterator[Var]:
    if isinstance(e, Var):
        yield e
    elif isinstance(e, BinOp):
        yield from var_nodes(e.left)
        yield from var_nodes(e.right)
    elif isinstance(e, UnOp):
        yield from var_nodes(e.operand)


def _equal(a: Value, b: Value) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, Label) and isinstance(b, Label):
        return a.name == b.name
    if isinstance(a, Opaque) or isinstance(b, Opaque):
        return a == b
    # int vs labelled magnitude
    try:
        return numeric(a) == numeric(b)
    except EvalError:
        return False


def eval_expr(e: Expr, env: dict) -> Value:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name}") from None
    if isinstance(e, UnOp):
        v = eval_expr(e.operand, env)
        if e.op == "not":
            if not isinstance(v, bool):
                raise EvalError(f"'not' applied to non-boolean {format_value(v)}")
            return not v
        return -numeric(v)
    if e.op in BOOL_OPS:
        lhs = eval_expr(e.left, env)
        if not isinstance(lhs, bool):
            raise EvalError(f"'{e.op}' applied to non-boolean {format_value(lhs)}")
        if e.op == "and" and not lhs:
            return False
        if e.op == "or" and lhs:
            return True
        rhs = eval_expr(e.right, env)
        if not isinstance(rhs, bool):
            raise EvalError(f"'{e.op}' applied to non-boolean {format_value(rhs)}")
        return rhs
    lhs, rhs = eval_expr(e.left, env), eval_expr(e.right, env)
    if e.op == "==":
        return _equal(lhs, rhs)
    if e.op == "!=":
        return not _equal(lhs, rhs)
    a, b = numeric(lhs), numeric(rhs)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "<":
        return a < b
    if e.op == "<=":
        return a <= b
    if e.op == ">":
        return a > b
    if e.op == ">=":
        return a >= b
    raise EvalError(f"unknown operator {e.op}")


def is_statically_non_numeric(e: Expr) -> bool:
    """True when ``e`` cannot denote a number whatever its variables hold."""
    if isinstance(e, Lit):
        v = e.value
        return isinstance(v, (bool, Opaque)) or (isinstance(v, Label) and v.magnitude is None)
    if isinstance(e, BinOp):
        return e.op not in ARITH_OPS
    if isinstance(e, UnOp):
        return e.op == "not"
    return False


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    role: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Send:
    expr: Expr
    sender: str | None
    to: str
    kind: str = "data"  # data | item | money
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Choose:
    target: str
    chooser: str
    domain: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class NatureChoose:
    target: str
    domain: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Values:
    role: str
    term: Expr
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IfBroadcast:
    """Branch on a guard whose value every role learns.

    ``guard`` is either an inline :class:`Choose` (whose target is ``var``)
    or an expression computed by ``broadcaster``.  ``broadcast=False``
    records a plain ``if`` that the checker rejects.
    """

    guard: Union[Choose, Expr]
    var: str
    broadcaster: str | None
    then: tuple = ()
    orelse: tuple = ()
    broadcast: bool = True
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Exchange:
    a: str
    b: str
    item: Expr
    payment: Expr
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Local:
    target: str
    owner: str | None
    expr: Expr
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Stmt = Union[Send, Choose, NatureChoose, Values, IfBroadcast, Exchange, Local]


@dataclass(frozen=True)
class Protocol:
    name: str
    params: tuple = ()
    domains: tuple = ()
    body: tuple = ()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def domain(self, name: str) -> Domain | None:
        for d in self.domains:
            if d.name == name:
                return d
        return BUILTIN_DOMAINS.get(name)

    @property
    def domain_map(self) -> dict[str, Domain]:
        out = dict(BUILTIN_DOMAINS)
        out.update((d.name, d) for d in self.domains)
        return out


def walk(stmts: Iterable[Stmt]) -> Iterator[Stmt]:
    """Pre-order traversal including statements nested in branches."""
    for s in stmts:
        yield s
        if isinstance(s, IfBroadcast):
            if isinstance(s.guard, Choose):
                yield s.guard
            yield from walk(s.then)
            yield from walk(s.orelse)


def desugar_exchange(s: Exchange) -> list[Send]:
    """Split an exchange into the item delivery followed by the payment.

    The payment send is tagged ``kind="money"``: the payer's money falls and
    the payee's rises by the payment's value.  Both legs belong to the same
    terminal outcome.
    """
    if is_statically_non_numeric(s.payment):
        raise DesugarError("exchange payment must be numeric")
    return [
        Send(s.item, s.b, s.a, "item", span=s.span),
        Send(s.payment, s.a, s.b, "money", span=s.span),
    ]


def desugar(stmts: Iterable[Stmt]) -> tuple:
    out = []
    for s in stmts:
        if isinstance(s, Exchange):
            out.extend(desugar_exchange(s))
        elif isinstance(s, IfBroadcast):
            out.append(replace(s, then=desugar(s.then), orelse=desugar(s.orelse)))
        else:
            out.append(s)
    return tuple(out)


def roles_of(p: Protocol) -> set[str]:
    roles = {prm.role for prm in p.params}
    has_nature = False
    for s in walk(p.body):
        if isinstance(s, Send):
            roles.add(s.to)
            if s.sender:
                roles.add(s.sender)
        elif isinstance(s, Choose):
            roles.add(s.chooser)
        elif isinstance(s, NatureChoose):
            has_nature = True
        elif isinstance(s, Values):
            roles.add(s.role)
        elif isinstance(s, IfBroadcast):
            if s.broadcaster:
                roles.add(s.broadcaster)
        elif isinstance(s, Exchange):
            roles.update((s.a, s.b))
        elif isinstance(s, Local):
            if s.owner:
                roles.add(s.owner)
    if has_nature:
        roles.add(WORLD)
    else:
        roles.discard(WORLD)
    return roles

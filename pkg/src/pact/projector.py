"""Endpoint projection: one local program per role.

Each choreography statement turns into the instructions the role itself
performs.  A send becomes a ``Send`` at the sender and a ``Recv`` at the
receiver; a broadcast guard is decided (or computed) by its owner, sent to
every other role in name order, and then every role branches on it.
Exchanges project through their two-send desugaring, except that the
payee's receive of the payment is written as a ``MoneyDelta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    WORLD,
    Choose,
    Exchange,
    IfBroadcast,
    Local,
    NatureChoose,
    Send as CSend,
    Values,
    Var,
)
from .checker import CheckedProtocol
from .parser import render_expr


@dataclass(frozen=True)
class Send:
    expr: object
    to: str
    kind: str = "data"  # data | guard | item | money


@dataclass(frozen=True)
class Recv:
    var: str
    frm: str
    kind: str = "data"


@dataclass(frozen=True)
class ChooseLocal:
    var: str
    domain: str


@dataclass(frozen=True)
class Observe:
    var: str


@dataclass(frozen=True)
class ComputeLocal:
    var: str
    expr: object


@dataclass(frozen=True)
class MoneyDelta:
    """Receive a payment from ``peer``; the balance moves by ``sign * value``."""

    expr: object
    sign: int
    peer: str


@dataclass(frozen=True)
class BranchOnKnown:
    var: str
    then: tuple = ()
    orelse: tuple = ()


@dataclass(frozen=True)
class LocalProgram:
    role: str
    protocol: str
    body: tuple = field(default_factory=tuple)

    def instructions(self):
        """All instructions, branch bodies included, in program order."""
        yield from _iter(self.body)

    def listing(self) -> str:
        return render_listing(self)

    def to_dict(self) -> dict:
        return {"role": self.role, "protocol": self.protocol, "body": [_to_dict(i) for i in self.body]}


def _iter(body):
    for i in body:
        yield i
        if isinstance(i, BranchOnKnown):
            yield from _iter(i.then)
            yield from _iter(i.orelse)


class _Projector:
    def __init__(self, c: CheckedProtocol, role: str, observe_nature: bool):
        self.c = c
        self.role = role
        self.observe_nature = observe_nature

    def block(self, stmts) -> tuple:
        out: list = []
        for s in stmts:
            out.extend(self.stmt(s))
        return tuple(out)

    def stmt(self, s) -> list:
        r = self.role
        if isinstance(s, CSend):
            if s.sender == r:
                return [Send(s.expr, s.to, s.kind)]
            if s.to == r:
                return [Recv(s.expr.name, s.sender, s.kind)]
            return []
        if isinstance(s, Choose):
            return [ChooseLocal(s.target, s.domain)] if s.chooser == r else []
        if isinstance(s, NatureChoose):
            if self.observe_nature and self.c.variables[s.target].home == r:
                return [Observe(s.target)]
            return []
        if isinstance(s, Values):
            return []
        if isinstance(s, Local):
            return [ComputeLocal(s.target, s.expr)] if s.owner == r else []
        if isinstance(s, Exchange):
            if r == s.b:
                return [Send(s.item, s.a, "item"), MoneyDelta(s.payment, +1, s.a)]
            if r == s.a:
                return [Recv(s.item.name, s.b, "item"), Send(s.payment, s.b, "money")]
            return []
        if isinstance(s, IfBroadcast):
            return self.branch(s)
        raise TypeError(f"unexpected statement {s!r}")

    def branch(self, s: IfBroadcast) -> list:
        r = self.role
        out: list = []
        if s.broadcaster == r:
            if isinstance(s.guard, Choose):
                out.append(ChooseLocal(s.var, s.guard.domain))
            else:
                out.append(ComputeLocal(s.var, s.guard))
            out.extend(Send(Var(s.var), other, "guard")
                       for other in self.c.roles if other not in (r, WORLD))
        else:
            out.append(Recv(s.var, s.broadcaster, "guard"))
        out.append(BranchOnKnown(s.var, self.block(s.then), self.block(s.orelse)))
        return out


def project(c: CheckedProtocol, r: str, observe_nature: bool = False) -> LocalProgram:
    """The local program of role ``r``.

    With ``observe_nature`` each nature draw appears as an ``Observe`` at the
    role that learns it; the simulator uses this to deliver the draw.
    """
    if r not in c.roles:
        raise ValueError(f"{r} is not a role of {c.name}")
    return LocalProgram(r, c.name, _Projector(c, r, observe_nature).block(c.protocol.body))


def project_all(c: CheckedProtocol, observe_nature: bool = False) -> dict:
    return {r: project(c, r, observe_nature) for r in c.roles if r != WORLD}


def pair_counts(programs: dict) -> dict:
    """Static send/receive counts per ``(from, to, kind)``, branches included."""
    counts: dict = {}
    for role, prog in programs.items():
        for i in prog.instructions():
            if isinstance(i, Send):
                key = (role, i.to, i.kind)
                counts.setdefault(key, [0, 0])[0] += 1
            elif isinstance(i, Recv):
                key = (i.frm, role, i.kind)
                counts.setdefault(key, [0, 0])[1] += 1
            elif isinstance(i, MoneyDelta):
                key = (i.peer, role, "money")
                counts.setdefault(key, [0, 0])[1] += 1
    return {k: tuple(v) for k, v in sorted(counts.items())}


# -- rendering ----------------------------------------------------------------


def _render(body, indent: int, lines: list):
    pad = "  " * indent
    for i in body:
        if isinstance(i, Send):
            call = f"send({render_expr(i.expr)}, {i.to})"
            lines.append(pad + ("balance -= " + call if i.kind == "money" else call))
        elif isinstance(i, Recv):
            lines.append(f"{pad}{i.var} = recv({i.frm})")
        elif isinstance(i, ChooseLocal):
            lines.append(f"{pad}{i.var} = choose({i.domain})")
        elif isinstance(i, Observe):
            lines.append(f"{pad}{i.var} = observe(world)")
        elif isinstance(i, ComputeLocal):
            lines.append(f"{pad}{i.var} = {render_expr(i.expr)}")
        elif isinstance(i, MoneyDelta):
            op = "+=" if i.sign > 0 else "-="
            lines.append(f"{pad}balance {op} recv({i.peer})")
        elif isinstance(i, BranchOnKnown):
            lines.append(f"{pad}if {i.var} then begin")
            _render(i.then, indent + 1, lines)
            if i.orelse:
                lines.append(f"{pad}end else begin")
                _render(i.orelse, indent + 1, lines)
            lines.append(f"{pad}end")


def render_listing(p: LocalProgram) -> str:
    lines = [f"let {p.protocol}_{p.role} () ="]
    if p.body:
        _render(p.body, 1, lines)
    else:
        lines.append("  ()")
    return "\n".join(lines) + "\n"


def _to_dict(i) -> dict:
    if isinstance(i, Send):
        return {"op": "send", "expr": render_expr(i.expr), "to": i.to, "kind": i.kind}
    if isinstance(i, Recv):
        return {"op": "recv", "var": i.var, "from": i.frm, "kind": i.kind}
    if isinstance(i, ChooseLocal):
        return {"op": "choose", "var": i.var, "domain": i.domain}
    if isinstance(i, Observe):
        return {"op": "observe", "var": i.var}
    if isinstance(i, ComputeLocal):
        return {"op": "compute", "var": i.var, "expr": render_expr(i.expr)}
    if isinstance(i, MoneyDelta):
        return {"op": "money", "expr": render_expr(i.expr), "sign": i.sign, "peer": i.peer}
    if isinstance(i, BranchOnKnown):
        return {"op": "branch", "var": i.var,
                "then": [_to_dict(x) for x in i.then], "else": [_to_dict(x) for x in i.orelse]}
    raise TypeError(i)

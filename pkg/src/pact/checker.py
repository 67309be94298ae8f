"""Well-formedness checking and knowledge analysis.

Diagnostic codes:

    K001  a role uses a variable it does not know
    B002  a conditional whose guard is not broadcast
    D003  unknown domain
    R004  a role sends to (or exchanges with) itself
    W005  ``world`` used outside a nature draw
    U006  undefined (or possibly undefined) variable
    V007  variable introduced twice, or shadowing a label
    T008  type error (non-boolean guard, non-numeric payment, ...)
    L009  a local computation no role can be located at
    W010  warning: a value term over something the role never learns
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ast import (
    BOOL,
    ARITH_OPS,
    BOOL_OPS,
    ORDER_OPS,
    WORLD,
    Choose,
    Domain,
    Exchange,
    IfBroadcast,
    Label,
    Lit,
    Local,
    NatureChoose,
    Protocol,
    Send,
    UnOp,
    Values,
    Var,
    free_vars,
    is_statically_non_numeric,
    roles_of,
    var_nodes,
)
from .diagnostics import Diagnostic, error, warning

NUMERIC_SCALARS = {"int", "Int", "float", "Float", "number", "Number", "Money", "money"}
BOOL_SCALARS = {"bool", "Bool"}


@dataclass(frozen=True)
class VarInfo:
    name: str
    home: str
    type: object  # Domain or scalar type name
    kind: str  # param | choice | nature | local | guard

    @property
    def domain(self) -> Domain | None:
        return self.type if isinstance(self.type, Domain) else None


@dataclass
class KnowledgeMap:
    """Variables each role is sure to know before every statement.

    ``before`` is keyed by statement path: ``(i,)`` for the i-th top-level
    statement, ``(i, "then", j)`` for the j-th statement of its then-branch,
    and so on.  ``ever`` is the union over all paths of what a role may
    come to know.
    """

    before: dict
    final: dict
    ever: dict

    def at(self, path: tuple, role: str) -> frozenset:
        return self.before[path][role]


@dataclass
class CheckedProtocol:
    protocol: Protocol
    knowledge: KnowledgeMap
    signatures: dict  # choice variable -> chooser's known set at the choice
    variables: dict
    roles: tuple  # non-world roles, sorted
    warnings: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.protocol.name

    def domain(self, name: str) -> Domain:
        return self.protocol.domain_map[name]

    @property
    def value_terms(self) -> list[Values]:
        from .ast import walk

        return [s for s in walk(self.protocol.body) if isinstance(s, Values)]

    @property
    def goods(self) -> set[str]:
        return {p.name for p in self.protocol.params}

    @property
    def nature_vars(self) -> list[NatureChoose]:
        from .ast import walk

        return [s for s in walk(self.protocol.body) if isinstance(s, NatureChoose)]


# -- knowledge transfer (shared with game construction) ---------------------


def initial_knowledge(protocol: Protocol, roles) -> dict:
    known = {r: set() for r in roles}
    known.setdefault(WORLD, set())
    for prm in protocol.params:
        known.setdefault(prm.role, set()).add(prm.name)
    return {r: frozenset(v) for r, v in known.items()}


def _add(known: dict, role: str, names) -> dict:
    out = dict(known)
    out[role] = known.get(role, frozenset()) | frozenset(names)
    return out


def learn(known: dict, s, variables: dict) -> dict:
    """Knowledge after a (resolved, non-branching) statement."""
    if isinstance(s, Send):
        if isinstance(s.expr, Var):
            return _add(known, s.to, [s.expr.name])
        return known
    if isinstance(s, Choose):
        return _add(known, s.chooser, [s.target])
    if isinstance(s, NatureChoose):
        known = _add(known, WORLD, [s.target])
        info = variables.get(s.target)
        if info is not None and info.home != WORLD:
            known = _add(known, info.home, [s.target])
        return known
    if isinstance(s, Local):
        return _add(known, s.owner, [s.target])
    if isinstance(s, Exchange):
        if isinstance(s.item, Var):
            known = _add(known, s.a, [s.item.name])
        if isinstance(s.payment, Var):
            known = _add(known, s.b, [s.payment.name])
        return known
    return known


def learn_guard(known: dict, s: IfBroadcast, roles) -> dict:
    """Knowledge right after a broadcast header: every role knows the guard."""
    if isinstance(s.guard, Choose) or s.broadcaster:
        known = _add(known, s.broadcaster, [s.var])
    for r in roles:
        known = _add(known, r, [s.var])
    return known


def knowledge_analysis(p: Protocol) -> KnowledgeMap:
    """Knowledge map of ``p``; total, even for ill-formed protocols."""
    return _Checker(p).run()[1].knowledge


# -- the checker ------------------------------------------------------------


class _State:
    def __init__(self, must, may, defined, may_defined, held):
        self.must = must
        self.may = may
        self.defined = defined
        self.may_defined = may_defined
        self.held = held

    def copy(self):
        return _State(dict(self.must), dict(self.may), set(self.defined),
                      set(self.may_defined), {r: set(v) for r, v in self.held.items()})

    def join(self, other: "_State") -> "_State":
        roles = set(self.must) | set(other.must)
        e = frozenset()
        return _State(
            {r: self.must.get(r, e) & other.must.get(r, e) for r in roles},
            {r: self.may.get(r, e) | other.may.get(r, e) for r in roles},
            self.defined & other.defined,
            self.may_defined | other.may_defined,
            {r: self.held.get(r, set()) | other.held.get(r, set()) for r in roles},
        )


class _Checker:
    def __init__(self, p: Protocol):
        self.p = p
        self.diags: list[Diagnostic] = []
        self.vars: dict[str, VarInfo] = {}
        self.roles = tuple(sorted(roles_of(p) - {WORLD}))
        self.labels = {v.name for d in p.domains for v in d.values if isinstance(v, Label)}
        self.before: dict = {}
        self.signatures: dict = {}
        self.values: list[Values] = []

    def err(self, code, msg, span):
        self.diags.append(error(code, msg, span))

    # -- helpers --

    def type_class(self, t) -> str | None:
        if t is None:
            return None
        if isinstance(t, Domain):
            if t.is_boolean:
                return "bool"
            return "num" if t.is_numeric else "label"
        if t in NUMERIC_SCALARS:
            return "num"
        if t in BOOL_SCALARS:
            return "bool"
        return "opaque"

    def expr_class(self, e, span) -> str | None:
        """Type class of ``e``; reports T008 on misuse, None when unknown."""
        if isinstance(e, Lit):
            v = e.value
            if isinstance(v, bool):
                return "bool"
            if isinstance(v, int):
                return "num"
            if isinstance(v, Label):
                return "num" if v.magnitude is not None else "label"
            return "opaque"
        if isinstance(e, Var):
            info = self.vars.get(e.name)
            return self.type_class(info.type) if info else None
        if isinstance(e, UnOp):
            inner = self.expr_class(e.operand, span)
            want = "bool" if e.op == "not" else "num"
            if inner is not None and inner != want:
                self.err("T008", f"'{e.op}' needs a {_WORDS[want]} operand", e.span or span)
            return want
        lhs = self.expr_class(e.left, span)
        rhs = self.expr_class(e.right, span)
        if e.op in BOOL_OPS:
            want, result = "bool", "bool"
        elif e.op in ARITH_OPS:
            want, result = "num", "num"
        elif e.op in ORDER_OPS:
            want, result = "num", "bool"
        else:
            return "bool"
        for side in (lhs, rhs):
            if side is not None and side != want:
                self.err("T008", f"'{e.op}' needs {_WORDS[want]} operands", e.span or span)
                break
        return result

    def local_type(self, e, cls):
        if isinstance(e, Var) and e.name in self.vars:
            return self.vars[e.name].type
        if isinstance(e, Lit) and isinstance(e.value, Label):
            for d in self.p.domains:
                if e.value in d.values:
                    return d
        return {"num": "int", "bool": BOOL}.get(cls, "value")

    def check_uses(self, e, role: str | None, st: _State, span) -> bool:
        """U006/K001 for the variables of ``e`` at ``role``; True if clean."""
        ok = True
        for v in var_nodes(e):
            where = v.span or span
            if v.name not in st.defined:
                ok = False
                if v.name in st.may_defined:
                    self.err("U006", f"variable {v.name} may be undefined here", where)
                else:
                    self.err("U006", f"undefined variable {v.name}", where)
            elif role is not None and v.name not in st.must.get(role, frozenset()):
                ok = False
                self.err("K001", f"{role} does not know {v.name}", where)
        return ok

    def locate(self, e, owner, st: _State, span) -> str | None:
        """Role evaluating ``e``: the explicit owner, else inferred."""
        if owner is not None:
            if owner == WORLD:
                self.err("W005", "world cannot compute values", span)
                return None
            self.check_uses(e, owner, st, span)
            return owner
        names = free_vars(e)
        if not names:
            self.err("L009", "cannot infer where this is computed; add '@ role'", span)
            return None
        if not self.check_uses(e, None, st, span):
            return None
        candidates = [r for r in self.roles if all(n in st.must[r] for n in names)]
        if not candidates:
            self.err("K001", f"no single role knows all of {', '.join(names)}", span)
            return None
        home = self.vars[names[0]].home if names[0] in self.vars else None
        return home if home in candidates else candidates[0]

    def introduce(self, name, home, typ, kind, span, st: _State) -> bool:
        if name in self.vars:
            self.err("V007", f"variable {name} is already introduced", span)
            return False
        if name in self.labels:
            self.err("V007", f"variable {name} shadows a domain label", span)
        self.vars[name] = VarInfo(name, home, typ, kind)
        st.defined.add(name)
        st.may_defined.add(name)
        return True

    def domain(self, name, span) -> Domain | None:
        d = self.p.domain_map.get(name)
        if d is None:
            self.err("D003", f"unknown domain {name}", span)
        return d

    def apply(self, st: _State, s):
        st.must = learn(st.must, s, self.vars)
        st.may = learn(st.may, s, self.vars)

    # -- traversal --

    def run(self):
        st = _State(initial_knowledge(self.p, self.roles), initial_knowledge(self.p, self.roles),
                    set(), set(), {r: set() for r in self.roles})
        for prm in self.p.params:
            if prm.role == WORLD:
                self.err("W005", "world cannot hold parameters", prm.span)
            dom = self.p.domain_map.get(prm.type)
            if self.introduce(prm.name, prm.role, dom or prm.type, "param", prm.span, st):
                st.held.setdefault(prm.role, set()).add(prm.name)
        body, st = self.block(self.p.body, (), st)
        self.check_values(st)
        resolved = replace(self.p, body=body)
        km = KnowledgeMap(self.before, dict(st.must), dict(st.may))
        checked = CheckedProtocol(resolved, km, self.signatures, dict(self.vars), self.roles)
        return self.diags, checked

    def block(self, stmts, prefix, st: _State):
        out = []
        for i, s in enumerate(stmts):
            path = prefix + (i,)
            self.before[path] = dict(st.must)
            s, st = self.stmt(s, path, st)
            out.append(s)
        return tuple(out), st

    def stmt(self, s, path, st: _State):
        if isinstance(s, Send):
            return self.send(s, st), st
        if isinstance(s, Choose):
            self.choose(s, st)
            return s, st
        if isinstance(s, NatureChoose):
            d = self.domain(s.domain, s.span)
            base = s.target.split(".", 1)[0]
            home = WORLD
            if base in self.vars and self.vars[base].home != WORLD:
                home = self.vars[base].home
            if self.introduce(s.target, home, d, "nature", s.span, st):
                self.apply(st, s)
            return s, st
        if isinstance(s, Values):
            if s.role == WORLD:
                self.err("W005", "world holds no utility", s.span)
            self.expr_class(s.term, s.span)
            self.values.append(s)
            return s, st
        if isinstance(s, Local):
            owner = self.locate(s.expr, s.owner, st, s.span)
            cls = self.expr_class(s.expr, s.span)
            s = replace(s, owner=owner)
            if self.introduce(s.target, owner or "", self.local_type(s.expr, cls), "local", s.span, st) and owner:
                self.apply(st, s)
            return s, st
        if isinstance(s, Exchange):
            self.exchange(s, st)
            return s, st
        if isinstance(s, IfBroadcast):
            return self.branch(s, path, st)
        raise TypeError(f"unknown statement {s!r}")

    def send(self, s: Send, st: _State) -> Send:
        name = s.expr.name if isinstance(s.expr, Var) else None
        if name is None:
            self.err("T008", "only variables can be sent", s.span)
            return s
        if not self.check_uses(s.expr, None, st, s.span):
            return s
        sender = s.sender or self.vars[name].home
        if not sender:
            return s  # its introduction already failed
        if sender == WORLD or s.to == WORLD:
            self.err("W005", "world neither sends nor receives", s.span)
            return s
        if sender == s.to:
            self.err("R004", f"{sender} sends {name} to itself", s.span)
            return s
        if not self.check_uses(s.expr, sender, st, s.span):
            return s
        s = replace(s, sender=sender)
        self.apply(st, s)
        return s

    def choose(self, s: Choose, st: _State):
        if s.chooser == WORLD:
            self.err("W005", "world draws with '<- world.choose', not '= world.choose'", s.span)
        d = self.domain(s.domain, s.span)
        self.signatures[s.target] = st.must.get(s.chooser, frozenset())
        home = s.chooser if s.chooser != WORLD else ""
        if self.introduce(s.target, home, d, "choice", s.span, st) and home:
            self.apply(st, s)
        return d

    def exchange(self, s: Exchange, st: _State):
        if WORLD in (s.a, s.b):
            self.err("W005", "world cannot take part in an exchange", s.span)
            return
        if s.a == s.b:
            self.err("R004", f"{s.a} exchanges with itself", s.span)
            return
        if not isinstance(s.item, Var):
            self.err("T008", "the exchanged item must be a variable", s.span)
        else:
            self.check_uses(s.item, s.b, st, s.span)
        if is_statically_non_numeric(s.payment):
            self.err("T008", "exchange payment must be numeric", s.payment.span or s.span)
        else:
            cls = self.expr_class(s.payment, s.span)
            if cls not in (None, "num"):
                self.err("T008", "exchange payment must be numeric", s.payment.span or s.span)
            self.check_uses(s.payment, s.a, st, s.span)
        self.apply(st, s)
        if isinstance(s.item, Var):
            st.held.setdefault(s.a, set()).add(s.item.name)

    def branch(self, s: IfBroadcast, path, st: _State):
        if not s.broadcast:
            self.err("B002", "branch guard must be broadcast: use 'if broadcast(...)'", s.span)
        if isinstance(s.guard, Choose):
            d = self.choose(s.guard, st)
            if d is not None and not d.is_boolean:
                self.err("T008", f"guard choice must range over Bool, not {d.name}", s.guard.span)
            broadcaster = s.guard.chooser
        else:
            broadcaster = self.locate(s.guard, s.broadcaster, st, s.span)
            cls = self.expr_class(s.guard, s.span)
            if cls not in (None, "bool"):
                self.err("T008", "branch guard must be boolean", s.span)
            self.introduce(s.var, broadcaster or "", BOOL, "guard", s.span, st)
        s = replace(s, broadcaster=broadcaster)
        st.must = learn_guard(st.must, s, self.roles)
        st.may = learn_guard(st.may, s, self.roles)
        then, st_then = self.block(s.then, path + ("then",), st.copy())
        orelse, st_else = self.block(s.orelse, path + ("else",), st.copy())
        return replace(s, then=then, orelse=orelse), st_then.join(st_else)

    def check_values(self, st: _State):
        for s in self.values:
            for v in var_nodes(s.term):
                if v.name not in st.may_defined:
                    self.err("U006", f"undefined variable {v.name}", v.span or s.span)
                    continue
                if s.role == WORLD or v.name in st.may.get(s.role, frozenset()):
                    continue
                base = v.name.split(".", 1)[0]
                if "." in v.name and base in st.held.get(s.role, set()):
                    continue
                self.diags.append(warning(
                    "W010", f"{s.role} values {v.name} but never learns it", v.span or s.span))


_WORDS = {"bool": "boolean", "num": "numeric"}


def check_well_formed(p: Protocol) -> CheckedProtocol | list[Diagnostic]:
    """Check ``p``; returns the checked protocol or its error diagnostics.

    Warnings do not block and are kept on ``CheckedProtocol.warnings``.
    """
    diags, checked = _Checker(p).run()
    errors = [d for d in diags if d.is_error]
    if errors:
        return diags
    checked.warnings = diags
    return checked

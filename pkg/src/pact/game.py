"""Extensive-form games denoted by checked protocols.

Nature draws become chance nodes, choices become decision nodes keyed by
what the chooser knows at that point, and every complete execution ends
in a terminal carrying the final bindings, money balances, who holds which
good, and one utility per role.

A role's utility is its money balance plus its declared value terms.  A
term mentioning an attribute of a good (``book.quality``) only counts while
the role holds that good, so a buyer who walks away gets nothing from the
book and pays nothing for it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    WORLD,
    Choose,
    EvalError,
    Exchange,
    IfBroadcast,
    Local,
    NatureChoose,
    Send,
    Values,
    Var,
    eval_expr,
    format_value,
    numeric,
    var_nodes,
)
from .beliefs import BeliefProfile, ProfileError, ResolvedBeliefs, resolve
from .checker import CheckedProtocol, initial_knowledge, learn, learn_guard
from .dist import check_distribution


class PolicyError(Exception):
    pass


@dataclass(frozen=True)
class InfoSet:
    role: str
    var: str
    observed: tuple  # ((name, value), ...) sorted by name

    def __str__(self):
        obs = ",".join(f"{k}={format_value(v)}" for k, v in self.observed)
        return f"{self.role}:{self.var}|{obs}"

    def sort_key(self):
        return (self.role, self.var, tuple((k, format_value(v)) for k, v in self.observed))

    def bindings(self) -> dict:
        return dict(self.observed)


@dataclass(eq=False)
class Chance:
    id: int
    var: str
    outcomes: tuple
    probs: tuple
    children: tuple
    bindings: dict


@dataclass(eq=False)
class Decision:
    id: int
    role: str
    var: str
    infoset: InfoSet
    actions: tuple
    children: tuple
    bindings: dict


@dataclass(eq=False)
class Terminal:
    id: int
    bindings: dict
    money: dict
    holdings: dict
    utility: dict

    def outcome_key(self):
        return outcome_key(self.bindings, self.money, self.holdings)


def outcome_key(bindings: dict, money: dict, holdings: dict):
    """Hashable summary of a terminal state, for comparing executions."""
    return (
        frozenset(bindings.items()),
        tuple(sorted((r, m) for r, m in money.items() if m != 0)),
        frozenset(holdings.items()),
    )


@dataclass
class GameTree:
    root: object
    roles: tuple
    checked: CheckedProtocol
    beliefs: ResolvedBeliefs
    infosets: dict = field(default_factory=dict)  # InfoSet -> [Decision], sorted
    terminals: list = field(default_factory=list)
    chance_nodes: list = field(default_factory=list)

    def infosets_of(self, role: str) -> list[InfoSet]:
        return [i for i in self.infosets if i.role == role]

    def actions(self, infoset: InfoSet) -> tuple:
        return self.infosets[infoset][0].actions

    def nodes(self):
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            if not isinstance(n, Terminal):
                stack.extend(reversed(n.children))

    def summary(self) -> str:
        def plural(n, word):
            return f"{n} {word}" if n == 1 else f"{n} {word}s"

        return (f"{plural(len(self.terminals), 'terminal')}, "
                f"{plural(len(self.infosets), 'decision info set')}, "
                f"{plural(len(self.chance_nodes), 'chance node')}")


def terminal_utilities(beliefs: ResolvedBeliefs, roles, bindings: dict, money: dict,
                       holdings: dict) -> dict:
    """Utility of every role at a terminal state."""
    util = {r: float(money.get(r, 0)) for r in roles}
    for role, term, fn in beliefs.terms:
        gated = False
        for v in var_nodes(term):
            base = v.name.split(".", 1)[0]
            if "." in v.name and base in holdings and holdings[base] != role:
                gated = True
        if gated:
            continue
        try:
            value = eval_expr(term, bindings)
        except EvalError:
            continue  # the term's variables are not bound on this path
        util[role] = util.get(role, 0.0) + fn(value)
    return util


class _Builder:
    def __init__(self, checked: CheckedProtocol, beliefs: ResolvedBeliefs):
        self.c = checked
        self.b = beliefs
        self.next_id = 0
        self.infosets: dict = {}
        self.terminals: list = []
        self.chance: list = []

    def fresh(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    def infoset(self, role, var, known, bindings) -> InfoSet:
        observed = tuple(sorted((k, bindings[k]) for k in known.get(role, ()) if k in bindings))
        return InfoSet(role, var, observed)

    def build(self, stmts: tuple, bindings, known, money, holdings):
        for i, s in enumerate(stmts):
            rest = stmts[i + 1:]
            if isinstance(s, NatureChoose):
                dist = self.b.priors[s.target]
                node = Chance(self.fresh(), s.target, tuple(dist), tuple(dist.values()), (), dict(bindings))
                self.chance.append(node)
                k2 = learn(known, s, self.c.variables)
                node.children = tuple(
                    self.build(rest, {**bindings, s.target: v}, k2, money, holdings)
                    for v in node.outcomes)
                return node
            if isinstance(s, Choose):
                return self.decide(s, rest, bindings, known, money, holdings)
            if isinstance(s, IfBroadcast):
                if isinstance(s.guard, Choose):
                    return self.decide(s.guard, rest, bindings, known, money, holdings, branch=s)
                value = self.eval(s.guard, bindings)
                known = learn_guard(known, s, self.c.roles)
                bindings = {**bindings, s.var: value}
                return self.build((s.then if value else s.orelse) + rest, bindings, known, money, holdings)
            if isinstance(s, Local):
                bindings = {**bindings, s.target: self.eval(s.expr, bindings)}
            elif isinstance(s, Exchange):
                pay = numeric(self.eval(s.payment, bindings))
                money = {**money, s.a: money.get(s.a, 0) - pay, s.b: money.get(s.b, 0) + pay}
                if isinstance(s.item, Var):
                    holdings = {**holdings, s.item.name: s.a}
            elif not isinstance(s, (Send, Values)):
                raise TypeError(f"unexpected statement {s!r}")
            known = learn(known, s, self.c.variables)
        node = Terminal(self.fresh(), bindings, money, holdings,
                        terminal_utilities(self.b, self.c.roles, bindings, money, holdings))
        self.terminals.append(node)
        return node

    def decide(self, s: Choose, rest, bindings, known, money, holdings, branch=None):
        key = self.infoset(s.chooser, s.target, known, bindings)
        actions = self.c.domain(s.domain).values
        node = Decision(self.fresh(), s.chooser, s.target, key, actions, (), dict(bindings))
        self.infosets.setdefault(key, []).append(node)
        k2 = learn(known, s, self.c.variables)
        if branch is not None:
            k2 = learn_guard(k2, branch, self.c.roles)
        children = []
        for a in actions:
            b2 = {**bindings, s.target: a}
            cont = rest if branch is None else (branch.then if a else branch.orelse) + rest
            children.append(self.build(cont, b2, k2, money, holdings))
        node.children = tuple(children)
        return node

    def eval(self, e, bindings):
        try:
            return eval_expr(e, bindings)
        except EvalError as err:
            raise ProfileError(f"cannot evaluate during game construction: {err}") from None


def build_game(c: CheckedProtocol, b: BeliefProfile | ResolvedBeliefs) -> GameTree:
    """Unroll ``c`` into its game tree under belief profile ``b``."""
    beliefs = b if isinstance(b, ResolvedBeliefs) else resolve(b, c)
    builder = _Builder(c, beliefs)
    bindings = dict(beliefs.params)
    holdings = {prm.name: prm.role for prm in c.protocol.params}
    known = initial_knowledge(c.protocol, c.roles)
    root = builder.build(c.protocol.body, bindings, known, {}, holdings)
    infosets = {k: builder.infosets[k] for k in sorted(builder.infosets, key=InfoSet.sort_key)}
    return GameTree(root, c.roles, c, beliefs, infosets, builder.terminals, builder.chance)


def _policy(pp: dict, node: Decision) -> dict:
    try:
        return pp[node.role][node.infoset]
    except KeyError:
        raise PolicyError(f"no policy for information set {node.infoset}") from None


def expected_utility(g: GameTree, role: str, pp: dict) -> float:
    """Expected utility of ``role`` when everyone plays ``pp``."""

    def value(n) -> float:
        if isinstance(n, Terminal):
            return n.utility.get(role, 0.0)
        if isinstance(n, Chance):
            return sum(p * value(c) for p, c in zip(n.probs, n.children) if p > 0)
        dist = _policy(pp, n)
        return sum(dist.get(a, 0.0) * value(c) for a, c in zip(n.actions, n.children)
                   if dist.get(a, 0.0) > 0)

    return value(g.root)


def outcome_distribution(g: GameTree, pp: dict) -> list[tuple[Terminal, float]]:
    """Every terminal with its probability under ``pp`` (zero-mass ones included)."""
    out = []

    def walk(n, p):
        if isinstance(n, Terminal):
            out.append((n, p))
        elif isinstance(n, Chance):
            for q, c in zip(n.probs, n.children):
                walk(c, p * q)
        else:
            dist = _policy(pp, n)
            for a, c in zip(n.actions, n.children):
                walk(c, p * dist.get(a, 0.0))

    walk(g.root, 1.0)
    check_distribution({t.id: p for t, p in out}, "outcome distribution")
    return out


def choreography_outcomes(c: CheckedProtocol, params: dict | None = None) -> set:
    """Outcome keys of every complete execution of the choreography itself."""
    profile = BeliefProfile.uniform(c, params=params or {})
    return {t.outcome_key() for t in build_game(c, profile).terminals}


def game_roles(g: GameTree) -> tuple:
    return tuple(r for r in g.roles if r != WORLD)

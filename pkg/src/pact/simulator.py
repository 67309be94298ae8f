"""Joint execution of projected programs.

Every role runs its local program as an independent endpoint.  Endpoints
talk over FIFO channels, one per ordered pair of roles, and a scheduler
decides which enabled endpoint takes the next step.  The harness plays
``world``: it draws each nature variable from the prior when a role first
observes it.

Randomness is split into independent streams, one per role for its choices
and one per nature variable, all derived from the run seed.  A fixed seed
therefore fixes every sampled value, and the terminal state is the same
under any interleaving.

``explore`` drops the sampling and instead branches over every choice value
and every interleaving, which is what the deadlock-freedom and
trace-equivalence checks need.
"""
from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass, field

from .ast import (
    WORLD,
    Choose,
    EvalError,
    Exchange,
    IfBroadcast,
    Local,
    NatureChoose,
    Send as CSend,
    Var,
    eval_expr,
    format_value,
    numeric,
)
from .beliefs import BeliefProfile, ResolvedBeliefs, resolve
from .checker import CheckedProtocol
from .dist import check_distribution, sample
from .game import InfoSet, outcome_key, terminal_utilities
from .parser import render_expr
from .projector import (
    BranchOnKnown,
    ChooseLocal,
    ComputeLocal,
    MoneyDelta,
    Observe,
    Recv,
    Send,
    project_all,
)


class RuntimePolicyError(Exception):
    pass


class ConformanceError(Exception):
    pass


@dataclass(frozen=True)
class Event:
    seq: int
    role: str
    op: str  # send | recv | choose | observe | compute
    var: str
    peer: str = ""
    kind: str = ""
    value: object = None
    infoset: InfoSet | None = None

    def shape(self) -> tuple:
        return (self.op, self.var, self.peer, self.kind)

    def to_dict(self) -> dict:
        d = {"seq": self.seq, "role": self.role, "op": self.op, "var": self.var,
             "value": format_value(self.value)}
        if self.peer:
            d["peer"] = self.peer
        if self.kind:
            d["kind"] = self.kind
        if self.infoset is not None:
            d["observed"] = {k: format_value(v) for k, v in self.infoset.observed}
        return d


@dataclass
class TraceRecord:
    seed: object
    schedule: str
    events: list
    nature: dict
    bindings: dict
    money: dict
    holdings: dict
    utility: dict

    def messages(self) -> list[tuple]:
        """``(from, to, var)`` for every delivered message, in delivery order."""
        return [(e.peer, e.role, e.var) for e in self.events if e.op == "recv"]

    def outcome_key(self):
        return outcome_key(self.bindings, self.money, self.holdings)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "schedule": self.schedule,
            "events": [e.to_dict() for e in self.events],
            "nature": {k: format_value(v) for k, v in self.nature.items()},
            "bindings": {k: format_value(v) for k, v in sorted(self.bindings.items())},
            "money": dict(sorted(self.money.items())),
            "holdings": dict(sorted(self.holdings.items())),
            "utility": dict(sorted(self.utility.items())),
        }


# -- machine --------------------------------------------------------------------


class _Machine:
    """Global state of a joint execution: endpoint code and env, channels, ledger."""

    def __init__(self, c: CheckedProtocol, programs: dict, params: dict):
        self.c = c
        self.code = {r: p.body for r, p in sorted(programs.items())}
        self.env = {r: {} for r in self.code}
        for prm in c.protocol.params:
            if prm.role in self.env:
                self.env[prm.role][prm.name] = params[prm.name]
        self.chans: dict = {}
        self.money: dict = {}
        self.holdings = {prm.name: prm.role for prm in c.protocol.params}
        self.nature: dict = {}

    def copy(self) -> "_Machine":
        m = object.__new__(_Machine)
        m.c = self.c
        m.code = dict(self.code)
        m.env = {r: dict(e) for r, e in self.env.items()}
        m.chans = dict(self.chans)
        m.money = dict(self.money)
        m.holdings = dict(self.holdings)
        m.nature = dict(self.nature)
        return m

    def key(self):
        return (
            tuple(self.code.items()),
            tuple((r, frozenset(e.items())) for r, e in self.env.items()),
            frozenset((k, v) for k, v in self.chans.items() if v),
            frozenset((k, v) for k, v in self.money.items() if v),
            frozenset(self.holdings.items()),
            frozenset(self.nature.items()),
        )

    def done(self) -> bool:
        return all(not code for code in self.code.values())

    def head(self, r):
        return self.code[r][0] if self.code[r] else None

    def enabled(self, r) -> bool:
        i = self.head(r)
        if i is None:
            return False
        if isinstance(i, Recv):
            return bool(self.chans.get((i.frm, r)))
        if isinstance(i, MoneyDelta):
            return bool(self.chans.get((i.peer, r)))
        return True

    def enabled_roles(self) -> list:
        return [r for r in self.code if self.enabled(r)]

    def infoset(self, r, var) -> InfoSet:
        return InfoSet(r, var, tuple(sorted(self.env[r].items())))

    def options(self, r) -> list | None:
        """Possible values of ``r``'s next step, or None when it is deterministic."""
        i = self.head(r)
        if isinstance(i, ChooseLocal):
            return list(self.c.domain(i.domain).values)
        if isinstance(i, Observe) and i.var not in self.nature:
            return list(self.c.variables[i.var].domain.values)
        return None

    def eval(self, r, e):
        try:
            return eval_expr(e, self.env[r])
        except EvalError as err:
            raise ConformanceError(f"{r} cannot evaluate {render_expr(e)}: {err}") from None

    def step(self, r, pick=None):
        """Run ``r``'s next instruction; returns an event tuple or None."""
        i = self.head(r)
        rest = self.code[r][1:]
        self.code[r] = rest
        if isinstance(i, Send):
            value = self.eval(r, i.expr)
            name = i.expr.name if isinstance(i.expr, Var) else render_expr(i.expr)
            self.chans[(r, i.to)] = self.chans.get((r, i.to), ()) + ((name, i.kind, value),)
            if i.kind == "money":
                self.money[r] = self.money.get(r, 0) - numeric(value)
            return ("send", name, i.to, i.kind, value, None)
        if isinstance(i, (Recv, MoneyDelta)):
            frm = i.frm if isinstance(i, Recv) else i.peer
            (name, kind, value), *tail = self.chans[(frm, r)]
            self.chans[(frm, r)] = tuple(tail)
            if isinstance(i, Recv):
                if (name, kind) != (i.var, i.kind):
                    raise ConformanceError(f"{r} expected {i.var} from {frm} but got {name}")
                self.env[r][i.var] = value
                if kind == "item":
                    self.holdings[i.var] = r
            else:
                if kind != "money":
                    raise ConformanceError(f"{r} expected a payment from {frm} but got {name}")
                self.money[r] = self.money.get(r, 0) + i.sign * numeric(value)
                if isinstance(i.expr, Var):
                    self.env[r][i.expr.name] = value
            return ("recv", name, frm, kind, value, None)
        if isinstance(i, ChooseLocal):
            key = self.infoset(r, i.var)
            self.env[r][i.var] = pick
            return ("choose", i.var, "", "", pick, key)
        if isinstance(i, Observe):
            if i.var not in self.nature:
                self.nature[i.var] = pick
            self.env[r][i.var] = self.nature[i.var]
            return ("observe", i.var, WORLD, "", self.nature[i.var], None)
        if isinstance(i, ComputeLocal):
            self.env[r][i.var] = self.eval(r, i.expr)
            return ("compute", i.var, "", "", self.env[r][i.var], None)
        if isinstance(i, BranchOnKnown):
            if i.var not in self.env[r]:
                raise ConformanceError(f"{r} branches on unknown {i.var}")
            self.code[r] = (i.then if self.env[r][i.var] else i.orelse) + rest
            return None
        raise TypeError(f"unexpected instruction {i!r}")

    def bindings(self) -> dict:
        out: dict = {}
        for env in self.env.values():
            out.update(env)
        out.update(self.nature)
        return out


def pending_nature(c: CheckedProtocol, bindings: dict) -> list[NatureChoose]:
    """Nature draws on the executed path whose value no endpoint observed."""
    out = []

    def walk(stmts):
        for s in stmts:
            if isinstance(s, NatureChoose) and s.target not in bindings:
                out.append(s)
            elif isinstance(s, IfBroadcast):
                if s.var not in bindings:
                    return
                walk(s.then if bindings[s.var] else s.orelse)

    walk(c.protocol.body)
    return out


# -- seeded runs ---------------------------------------------------------------


def _scheduler(schedule: str, seed):
    if schedule == "roundrobin":
        state = {"last": -1}

        def pick(roles, enabled):
            n = len(roles)
            for k in range(1, n + 1):
                r = roles[(state["last"] + k) % n]
                if r in enabled:
                    state["last"] = roles.index(r)
                    return r
            raise AssertionError("no enabled role")

        return pick
    if schedule.startswith("random:"):
        try:
            k = int(schedule.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad schedule {schedule!r}") from None
        rng = random.Random(f"{seed}/schedule/{k}")
        return lambda roles, enabled: enabled[rng.randrange(len(enabled))]
    raise ValueError(f"unknown schedule {schedule!r}; use roundrobin or random:K")


def run_once(c: CheckedProtocol, programs: dict, pp: dict, b: BeliefProfile | ResolvedBeliefs,
             seed, schedule: str = "roundrobin") -> TraceRecord:
    """One seeded execution.  ``programs`` must be projected with ``observe_nature=True``."""
    beliefs = b if isinstance(b, ResolvedBeliefs) else resolve(b, c)
    m = _Machine(c, programs, beliefs.params)
    role_rng = {r: random.Random(f"{seed}/{r}") for r in m.code}

    def draw(var):
        return sample(beliefs.priors[var], random.Random(f"{seed}/world/{var}"))

    pick_role = _scheduler(schedule, seed)
    roles = list(m.code)
    events: list = []
    while not m.done():
        enabled = m.enabled_roles()
        if not enabled:
            raise ConformanceError("deadlock: every unfinished endpoint waits on an empty channel")
        r = pick_role(roles, enabled)
        i = m.head(r)
        pick = None
        if isinstance(i, ChooseLocal):
            key = m.infoset(r, i.var)
            try:
                dist = pp[r][key]
            except KeyError:
                raise RuntimePolicyError(f"no policy for information set {key}") from None
            check_distribution(dist, f"policy at {key}")
            pick = sample(dist, role_rng[r])
        elif isinstance(i, Observe) and i.var not in m.nature:
            pick = draw(i.var)
        ev = m.step(r, pick)
        if ev is not None:
            op, var, peer, kind, value, key = ev
            events.append(Event(len(events), r, op, var, peer, kind, value, key))
    if any(m.chans.values()):
        raise ConformanceError("messages left undelivered at termination")
    bindings = m.bindings()
    nature = dict(m.nature)
    for s in pending_nature(c, bindings):
        nature[s.target] = bindings[s.target] = draw(s.target)
    utility = terminal_utilities(beliefs, c.roles, bindings, m.money, m.holdings)
    return TraceRecord(seed, schedule, events, nature, bindings, dict(m.money), dict(m.holdings), utility)


# -- conformance ------------------------------------------------------------------


def expected_events(c: CheckedProtocol, bindings: dict) -> dict | None:
    """Per-role event shapes the choreography prescribes for these bindings."""
    out: dict = {r: [] for r in c.roles if r != WORLD}

    def add(r, *shape):
        if r in out:
            out[r].append(shape)

    def walk(stmts) -> bool:
        for s in stmts:
            if isinstance(s, CSend):
                add(s.sender, "send", s.expr.name, s.to, s.kind)
                add(s.to, "recv", s.expr.name, s.sender, s.kind)
            elif isinstance(s, Choose):
                add(s.chooser, "choose", s.target, "", "")
            elif isinstance(s, NatureChoose):
                add(c.variables[s.target].home, "observe", s.target, WORLD, "")
            elif isinstance(s, Local):
                add(s.owner, "compute", s.target, "", "")
            elif isinstance(s, Exchange):
                pay = s.payment.name if isinstance(s.payment, Var) else render_expr(s.payment)
                add(s.b, "send", s.item.name, s.a, "item")
                add(s.b, "recv", pay, s.a, "money")
                add(s.a, "recv", s.item.name, s.b, "item")
                add(s.a, "send", pay, s.b, "money")
            elif isinstance(s, IfBroadcast):
                a = s.broadcaster
                add(a, "choose" if isinstance(s.guard, Choose) else "compute", s.var, "", "")
                for r in out:
                    if r != a:
                        add(a, "send", s.var, r, "guard")
                        add(r, "recv", s.var, a, "guard")
                if s.var not in bindings:
                    return False
                if not walk(s.then if bindings[s.var] else s.orelse):
                    return False
        return True

    return out if walk(c.protocol.body) else None


def conformance_errors(t: TraceRecord, c: CheckedProtocol) -> list[str]:
    errors = []
    expected = expected_events(c, t.bindings)
    if expected is None:
        return ["trace lacks the value of a branch guard"]
    for r, shapes in expected.items():
        got = [e.shape() for e in t.events if e.role == r]
        if got != shapes:
            errors.append(f"{r} performed {got} but the choreography prescribes {shapes}")
    queues: dict = {}
    for e in t.events:
        if e.op == "send":
            queues.setdefault((e.role, e.peer), []).append(e)
        elif e.op == "recv":
            q = queues.get((e.peer, e.role))
            if not q:
                errors.append(f"event {e.seq}: {e.role} receives {e.var} before it was sent")
                continue
            s = q.pop(0)
            if (s.var, s.kind, s.value) != (e.var, e.kind, e.value):
                errors.append(f"event {e.seq}: {e.role} received {e.var}={format_value(e.value)} "
                              f"but the channel head is {s.var}={format_value(s.value)}")
        if e.op in ("choose", "compute", "observe", "recv") and e.var in t.bindings \
                and e.kind != "money" and t.bindings[e.var] != e.value:
            errors.append(f"event {e.seq}: {e.var}={format_value(e.value)} disagrees with the "
                          f"final binding {format_value(t.bindings[e.var])}")
    for (frm, to), q in queues.items():
        if q:
            errors.append(f"{len(q)} message(s) from {frm} to {to} never received")
    return errors


def check_trace_conformance(t: TraceRecord, c: CheckedProtocol) -> bool:
    return not conformance_errors(t, c)


# -- trials ------------------------------------------------------------------------


@dataclass
class SimulationReport:
    trials: int
    mean: dict
    stderr: dict
    frequencies: dict  # InfoSet -> {action: frequency}
    conformance_failures: int
    traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "utility": {r: {"mean": self.mean[r], "stderr": self.stderr[r]} for r in sorted(self.mean)},
            "frequencies": [
                {"role": i.role, "var": i.var,
                 "observed": {k: format_value(v) for k, v in i.observed},
                 "freq": {format_value(a): f for a, f in d.items()}}
                for i, d in self.frequencies.items()
            ],
            "conformance_failures": self.conformance_failures,
        }

    def to_tsv(self) -> str:
        lines = ["section\trole\tkey\tvalue\tstderr"]
        for r in sorted(self.mean):
            lines.append(f"utility\t{r}\tmean\t{self.mean[r]:.6f}\t{self.stderr[r]:.6f}")
        for i, d in self.frequencies.items():
            obs = ",".join(f"{k}={format_value(v)}" for k, v in i.observed)
            for a, f in d.items():
                lines.append(f"freq\t{i.role}\t{i.var}|{obs}|{format_value(a)}\t{f:.6f}\t")
        lines.append(f"conformance\t\tfailures\t{self.conformance_failures}\t")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [f"{self.trials} trial(s), {self.conformance_failures} conformance failure(s)"]
        for r in sorted(self.mean):
            lines.append(f"  {r}: mean utility {self.mean[r]:.4f} ± {self.stderr[r]:.4f}")
        for i, d in self.frequencies.items():
            freq = ", ".join(f"{format_value(a)}: {f:.3f}" for a, f in d.items())
            lines.append(f"  {i}  {freq}")
        return "\n".join(lines) + "\n"


def run_trials(c: CheckedProtocol, pp: dict, b: BeliefProfile | ResolvedBeliefs, n: int, seed=0,
               schedule: str = "roundrobin", keep_traces: bool = False) -> SimulationReport:
    """``n`` runs seeded ``f"{seed}:{k}"``; utilities summarized as mean ± standard error."""
    if n < 1:
        raise ValueError("need at least one trial")
    beliefs = b if isinstance(b, ResolvedBeliefs) else resolve(b, c)
    programs = project_all(c, observe_nature=True)
    samples: dict = {r: [] for r in c.roles}
    counts: dict = {}
    failures = 0
    traces = []
    for k in range(n):
        t = run_once(c, programs, pp, beliefs, f"{seed}:{k}", schedule)
        for r in samples:
            samples[r].append(t.utility.get(r, 0.0))
        for e in t.events:
            if e.op == "choose":
                row = counts.setdefault(e.infoset, {})
                row[e.value] = row.get(e.value, 0) + 1
        if not check_trace_conformance(t, c):
            failures += 1
        if keep_traces:
            traces.append(t)
    mean = {r: statistics.fmean(xs) for r, xs in samples.items()}
    stderr = {r: (statistics.stdev(xs) / math.sqrt(n) if n > 1 else 0.0) for r, xs in samples.items()}
    frequencies = {}
    for key in sorted(counts, key=InfoSet.sort_key):
        total = sum(counts[key].values())
        actions = c.variables[key.var].domain.values
        frequencies[key] = {a: counts[key].get(a, 0) / total for a in actions}
    return SimulationReport(n, mean, stderr, frequencies, failures, traces)


def traces_jsonl(traces) -> str:
    return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in traces)


# -- exhaustive exploration ------------------------------------------------------


@dataclass
class Exploration:
    outcomes: set
    states: int
    deadlocks: int
    terminals: int


def explore(c: CheckedProtocol, programs: dict | None = None, params: dict | None = None,
            limit: int = 2_000_000) -> Exploration:
    """Every interleaving and every choice value of the joint execution."""
    programs = programs or project_all(c, observe_nature=True)
    profile = BeliefProfile.uniform(c, params=params or {})
    beliefs = resolve(profile, c)
    start = _Machine(c, programs, beliefs.params)
    outcomes: set = set()
    seen = set()
    deadlocks = terminals = 0
    stack = [start]
    while stack:
        m = stack.pop()
        k = m.key()
        if k in seen:
            continue
        seen.add(k)
        if len(seen) > limit:
            raise RuntimeError("state space exceeds the exploration limit")
        if m.done():
            terminals += 1
            if any(m.chans.values()):
                deadlocks += 1
                continue
            bindings = m.bindings()
            for full in _complete_nature(c, bindings):
                outcomes.add(outcome_key(full, m.money, m.holdings))
            continue
        enabled = m.enabled_roles()
        if not enabled:
            deadlocks += 1
            continue
        for r in enabled:
            opts = m.options(r)
            for pick in (opts if opts is not None else [None]):
                m2 = m.copy()
                m2.step(r, pick)
                stack.append(m2)
    return Exploration(outcomes, len(seen), deadlocks, terminals)


def _complete_nature(c: CheckedProtocol, bindings: dict):
    pending = pending_nature(c, bindings)
    if not pending:
        yield bindings
        return
    s = pending[0]
    for v in c.domain(s.domain).values:
        yield from _complete_nature(c, {**bindings, s.target: v})

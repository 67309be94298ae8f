"""Random well-formed protocols for property tests.

``generate(rng)`` builds source text while tracking, per path, which
variables exist and who knows them, so that almost everything it emits
passes the checker.  Choice points (choices, guard choices and nature
draws) are capped so the games stay small.
"""
from __future__ import annotations

import random

ROLES = ("alice", "bob", "carol")
HEADER = """domain Two = {lo=0, hi=1}
domain Three = {1, 2, 3}
"""


class _Gen:
    def __init__(self, rng: random.Random, roles, max_choices: int):
        self.rng = rng
        self.roles = roles
        self.budget = max_choices
        self.n = 0
        self.lines: list[str] = []
        self.numeric: set[str] = set()
        self.home: dict[str, str] = {}
        self.top_level: list[str] = []

    def fresh(self, stem: str) -> str:
        self.n += 1
        return f"{stem}{self.n}"

    def emit(self, depth: int, text: str):
        self.lines.append("  " * (depth + 1) + text)

    def block(self, depth: int, known: dict, holder: dict, nature: set, length: int, top: bool):
        # ``nature`` is shared by all paths: an attribute is drawn at most once
        for _ in range(length):
            self.stmt(depth, known, holder, nature, top)

    def stmt(self, depth, known, holder, nature, top):
        rng = self.rng
        kinds = ["send", "send", "local"]
        if self.budget > 0:
            kinds += ["choose", "choose", "guard_choose"]
            if any(f"{g}.grade" not in nature for g in holder):
                kinds.append("nature")
        kinds.append("guard_expr")
        if depth >= 2:
            kinds = [k for k in kinds if not k.startswith("guard")] or ["send"]
        if holder:
            kinds.append("exchange")
        kind = rng.choice(kinds)

        if kind == "choose":
            r = rng.choice(self.roles)
            dom = rng.choice(["Two", "Three", "Bool"])
            v = self.fresh("x")
            self.budget -= 1
            self.emit(depth, f"{v} = {r}.choose({dom})")
            self.define(v, r, known, top, numeric=dom == "Three")
        elif kind == "nature":
            good = rng.choice([g for g in holder if f"{g}.grade" not in nature])
            self.budget -= 1
            v = f"{good}.grade"
            nature.add(v)
            self.emit(depth, f"{v} <- world.choose(Two)")
            self.define(v, self.home[good], known, top, numeric=False)
        elif kind == "send":
            options = [(v, r) for r in self.roles for v in known[r] if self.home.get(v) == r and "." not in v]
            if not options:
                return
            v, frm = rng.choice(sorted(options))
            to = rng.choice([r for r in self.roles if r != frm])
            self.emit(depth, f"send({v}, {to})")
            known[to].add(v)
        elif kind == "local":
            r = rng.choice(self.roles)
            nums = sorted(v for v in known[r] if v in self.numeric)
            v = self.fresh("y")
            if nums:
                self.emit(depth, f"{v} = {rng.choice(nums)} + {rng.randint(0, 2)} @ {r}")
                self.define(v, r, known, top, numeric=True)
        elif kind in ("guard_choose", "guard_expr"):
            r = rng.choice(self.roles)
            g = self.fresh("g")
            if kind == "guard_choose":
                self.budget -= 1
                head = f"{g} = {r}.choose(Bool)"
            else:
                nums = sorted(v for v in known[r] if v in self.numeric)
                if not nums:
                    return
                head = f"{g} = {rng.choice(nums)} < {rng.randint(1, 3)} @ {r}"
            self.emit(depth, f"if broadcast({head}) {{")
            self.home[g] = r
            for role in self.roles:
                known[role].add(g)
            self.block(depth + 1, _copy(known), dict(holder), nature, rng.randint(0, 3), False)
            if rng.random() < 0.5:
                self.emit(depth, "} else {")
                self.block(depth + 1, _copy(known), dict(holder), nature, rng.randint(1, 3), False)
            self.emit(depth, "}")
            if top:
                self.top_level.append(g)
        elif kind == "exchange":
            good = rng.choice(sorted(holder))
            seller = holder[good]
            buyers = [r for r in self.roles if r != seller]
            buyer = rng.choice(buyers)
            nums = sorted(v for v in known[buyer] if v in self.numeric)
            pay = rng.choice(nums) if nums and rng.random() < 0.7 else str(rng.randint(0, 3))
            self.emit(depth, f"exchange({buyer}, {seller}, {good}, {pay})")
            holder[good] = buyer
            known[buyer].add(good)
            if pay in self.home:
                known[seller].add(pay)

    def define(self, v, r, known, top, numeric):
        self.home[v] = r
        known[r].add(v)
        if numeric:
            self.numeric.add(v)
        if top:
            self.top_level.append(v)


def _copy(known: dict) -> dict:
    return {r: set(vs) for r, vs in known.items()}


def generate(rng: random.Random, max_choices: int = 4, n_roles: int | None = None) -> str:
    """Source text of a random protocol with at most ``max_choices`` choice points."""
    roles = ROLES[: n_roles or rng.choice([2, 2, 3])]
    gen = _Gen(rng, roles, max_choices)
    params = []
    holder = {}
    for k in range(rng.randint(1, 2)):
        name = ("book", "pen")[k]
        owner = rng.choice(roles)
        params.append(f"param {name} : Good @ {owner}")
        holder[name] = owner
        gen.home[name] = owner
    known = {r: set() for r in roles}
    for name, owner in holder.items():
        known[owner].add(name)
    gen.block(0, known, dict(holder), set(), rng.randint(2, 6), True)
    numeric_top = [v for v in gen.top_level if v in gen.numeric]
    if numeric_top and rng.random() < 0.8:
        gen.emit(0, f"{rng.choice(roles)}.values({rng.choice(numeric_top)})")
    body = "\n".join(gen.lines)
    return "\n".join(params) + "\n" + HEADER + f"\nprotocol gen{rng.randrange(10**6)} {{\n{body}\n}}\n"


def checked_corpus(seed: int, count: int, **kw) -> list:
    """``count`` generated protocols that pass the checker, with their source."""
    from pact.checker import check_well_formed
    from pact.parser import parse_protocol

    rng = random.Random(seed)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count:
            raise RuntimeError("generator rarely produces checkable protocols")
        text = generate(rng, **kw)
        p = parse_protocol(text, "gen.pact")
        if isinstance(p, list):
            continue
        c = check_well_formed(p)
        if isinstance(c, list):
            continue
        out.append((text, c))
    return out


def random_profile(c, rng: random.Random, level: int = 1, noise: float = 0.5):
    """A belief profile with random priors and random linear utility terms."""
    from pact.ast import format_value
    from pact.beliefs import BeliefProfile
    from pact.parser import render_expr

    priors = {}
    for s in c.nature_vars:
        vals = c.domain(s.domain).values
        w = [rng.random() + 0.05 for _ in vals]
        priors[s.target] = {format_value(v): x / sum(w) for v, x in zip(vals, w)}
    terms: dict = {}
    for s in c.value_terms:
        terms.setdefault(s.role, {})[render_expr(s.term)] = {"weight": rng.uniform(-2, 3)}
    return BeliefProfile.from_dict({"priors": priors, "utility_terms": terms,
                                    "level": level, "noise": noise})

"""Level-k softmax reasoning over a game tree.

Level 0 comes straight from the belief profile.  At level ``l`` every role
plays a softmax response, at temperature ``noise``, to the level ``l-1``
policies of everybody else.  All roles advance in lockstep.

Expected utilities at an information set weight each member node by its
external reach: the product of chance probabilities and other roles'
action probabilities on the way there.  The role's own later decisions are
answered by the same softmax rule, so a level is well defined at every
information set, reachable or not.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .ast import format_value
from .beliefs import BeliefProfile, ProfileError
from .dist import check_distribution, normalize, softmax, uniform
from .game import Chance, Decision, GameTree, InfoSet, Terminal, game_roles


@dataclass
class SolveResult:
    policies: list  # index = level; role -> {InfoSet: {action: prob}}
    posteriors: list  # index = level; InfoSet -> {hidden tuple: prob}
    diagnostics: list = field(default_factory=list)
    noise: float = 1.0

    @property
    def level(self) -> int:
        return len(self.policies) - 1

    def final(self) -> dict:
        return self.policies[-1]

    def acceptance_spread(self, level: int, role: str, var: str, action=True) -> float:
        """Spread of ``π(action | i)`` across ``role``'s info sets for ``var``."""
        probs = [d.get(action, 0.0) for i, d in self.policies[level][role].items() if i.var == var]
        return max(probs) - min(probs)


# -- level 0 ----------------------------------------------------------------


def _matches(given: dict, infoset: InfoSet) -> bool:
    seen = {k: format_value(v) for k, v in infoset.observed}
    return all(seen.get(k) == (v if isinstance(v, str) else format_value(v))
               for k, v in given.items())


def _table_dist(probs: dict, actions: tuple, where: str) -> dict:
    by_text = {format_value(a): a for a in actions}
    out = {a: 0.0 for a in actions}
    for key, p in probs.items():
        text = key if isinstance(key, str) else format_value(key)
        if text not in by_text:
            raise ProfileError(f"{where}: {text} is not an action")
        p = float(p)
        if p < 0:
            raise ProfileError(f"{where}: negative probability for {text}")
        out[by_text[text]] = p
    if sum(out.values()) <= 0:
        raise ProfileError(f"{where}: table has no positive mass")
    return normalize(out)


def level0_policy(g: GameTree, role: str, rule) -> dict:
    """Level-0 policy of ``role``: ``"uniform"`` or ``{var: rows | "uniform"}``.

    A row is ``{"given": {name: value}, "probs": {action: weight}}``; weights
    are normalized and the first row whose ``given`` matches wins.
    """
    policy = {}
    if rule is None:
        rule = "uniform"
    if rule != "uniform" and not isinstance(rule, dict):
        raise ProfileError(f"level0 for {role} must be 'uniform' or a table")
    for i in g.infosets_of(role):
        actions = g.actions(i)
        var_rule = "uniform" if rule == "uniform" else rule.get(i.var, "uniform")
        if var_rule == "uniform":
            policy[i] = uniform(actions)
            continue
        rows = [var_rule] if isinstance(var_rule, dict) else var_rule
        for row in rows:
            if _matches(row.get("given", {}), i):
                policy[i] = _table_dist(row["probs"], actions, f"level0 {role}.{i.var}")
                break
        else:
            raise ProfileError(f"level0 table for {role}.{i.var} has no row for {i}")
        check_distribution(policy[i], f"level-0 policy at {i}")
    return policy


def level0_profile(g: GameTree, b: BeliefProfile) -> dict:
    return {r: level0_policy(g, r, b.level0.get(r)) for r in game_roles(g)}


# -- posteriors and responses -------------------------------------------------


def _reach(g: GameTree, role: str, pp: dict) -> dict:
    """External reach of every decision node of ``role`` (own actions count as 1)."""
    reach = {}

    def walk(n, p):
        if isinstance(n, Terminal):
            return
        if isinstance(n, Chance):
            for q, c in zip(n.probs, n.children):
                walk(c, p * q)
            return
        if n.role == role:
            reach[n.id] = p
            for c in n.children:
                walk(c, p)
            return
        dist = pp[n.role][n.infoset]
        for a, c in zip(n.actions, n.children):
            walk(c, p * dist.get(a, 0.0))

    walk(g.root, 1.0)
    return reach


def _hidden(node: Decision) -> tuple:
    seen = {k for k, _ in node.infoset.observed}
    return tuple(sorted((k, v) for k, v in node.bindings.items() if k not in seen))


def _weights(g: GameTree, i: InfoSet, reach: dict, diagnostics: list | None):
    nodes = g.infosets[i]
    w = [reach.get(n.id, 0.0) for n in nodes]
    total = sum(w)
    if total <= 0:
        if diagnostics is not None:
            diagnostics.append(f"unreachable information set {i}; using a uniform posterior")
        return nodes, [1.0 / len(nodes)] * len(nodes)
    return nodes, [x / total for x in w]


def posterior(g: GameTree, i: InfoSet, opponents: dict, diagnostics: list | None = None) -> dict:
    """``Pr[hidden bindings | what i.role observed]`` under ``opponents``."""
    reach = _reach(g, i.role, opponents)
    nodes, w = _weights(g, i, reach, diagnostics)
    out: dict = {}
    for n, p in zip(nodes, w):
        key = _hidden(n)
        out[key] = out.get(key, 0.0) + p
    return check_distribution(out, f"posterior at {i}")


def softmax_response(g: GameTree, role: str, opponents: dict, noise: float,
                     diagnostics: list | None = None) -> dict:
    """Softmax response of ``role`` at each of its info sets to fixed ``opponents``."""
    if not noise > 0:
        raise ProfileError("noise must be positive")
    reach = _reach(g, role, opponents)
    policy: dict = {}
    values: dict = {}

    def value(n) -> float:
        if n.id in values:
            return values[n.id]
        if isinstance(n, Terminal):
            v = n.utility.get(role, 0.0)
        elif isinstance(n, Chance):
            v = sum(p * value(c) for p, c in zip(n.probs, n.children) if p > 0)
        else:
            dist = respond(n.infoset) if n.role == role else opponents[n.role][n.infoset]
            v = sum(dist[a] * value(c) for a, c in zip(n.actions, n.children) if dist.get(a, 0.0) > 0)
        values[n.id] = v
        return v

    def respond(i: InfoSet) -> dict:
        if i in policy:
            return policy[i]
        nodes, w = _weights(g, i, reach, diagnostics)
        actions = g.actions(i)
        eu = {a: 0.0 for a in actions}
        for n, p in zip(nodes, w):
            if p <= 0:
                continue
            for a, c in zip(n.actions, n.children):
                eu[a] += p * value(c)
        policy[i] = check_distribution(softmax(eu, noise), f"policy at {i}")
        return policy[i]

    for i in g.infosets_of(role):
        respond(i)
    return {i: policy[i] for i in g.infosets_of(role)}


def action_values(g: GameTree, i: InfoSet, pp: dict) -> dict:
    """``EU(a | i)`` for ``i.role`` when everyone, including later self, plays ``pp``."""
    role = i.role
    reach = _reach(g, role, pp)
    nodes, w = _weights(g, i, reach, None)

    def value(n) -> float:
        if isinstance(n, Terminal):
            return n.utility.get(role, 0.0)
        if isinstance(n, Chance):
            return sum(p * value(c) for p, c in zip(n.probs, n.children))
        dist = pp[n.role][n.infoset]
        return sum(dist.get(a, 0.0) * value(c) for a, c in zip(n.actions, n.children))

    eu = {a: 0.0 for a in g.actions(i)}
    for n, p in zip(nodes, w):
        for a, c in zip(n.actions, n.children):
            eu[a] += p * value(c)
    return eu


def _posteriors(g: GameTree, pp: dict, diagnostics: list) -> dict:
    return {i: posterior(g, i, pp, diagnostics) for i in g.infosets}


def solve_level_k(g: GameTree, b: BeliefProfile | None = None) -> SolveResult:
    """Policies at levels ``0..b.level``, with posteriors at each level."""
    b = b or g.beliefs.profile
    diagnostics: list = []
    policies = [level0_profile(g, b)]
    posteriors = [_posteriors(g, policies[0], [])]
    for level in range(1, b.level + 1):
        prev = policies[-1]
        diags: list = []
        policies.append({r: softmax_response(g, r, prev, b.noise, diags) for r in game_roles(g)})
        posteriors.append(_posteriors(g, prev, []))
        diagnostics.extend(f"level {level}: {d}" for d in dict.fromkeys(diags))
    return SolveResult(policies, posteriors, diagnostics, b.noise)


# -- export -------------------------------------------------------------------


def _observed_text(i: InfoSet) -> str:
    return ",".join(f"{k}={format_value(v)}" for k, v in i.observed)


def policy_rows(result: SolveResult, role: str | None = None):
    for level, profile in enumerate(result.policies):
        for r in sorted(profile):
            if role is not None and r != role:
                continue
            for i, dist in profile[r].items():
                for a, p in dist.items():
                    yield level, r, i.var, _observed_text(i), format_value(a), p


def to_tsv(result: SolveResult, role: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(["level", "role", "var", "observed", "action", "probability"])
    for level, r, var, obs, a, p in policy_rows(result, role):
        w.writerow([level, r, var, obs, a, f"{p:.12g}"])
    return buf.getvalue()


def _infoset_json(i: InfoSet) -> dict:
    return {"role": i.role, "var": i.var, "observed": {k: format_value(v) for k, v in i.observed}}


def to_json(result: SolveResult, role: str | None = None) -> dict:
    levels = []
    for level, profile in enumerate(result.policies):
        entries = []
        for r in sorted(profile):
            if role is not None and r != role:
                continue
            for i, dist in profile[r].items():
                entries.append({**_infoset_json(i),
                                "probs": {format_value(a): p for a, p in dist.items()}})
        post = []
        for i, dist in result.posteriors[level].items():
            if role is not None and i.role != role:
                continue
            post.append({**_infoset_json(i), "posterior": [
                {"hidden": {k: format_value(v) for k, v in h}, "prob": p} for h, p in dist.items()]})
        levels.append({"level": level, "policies": entries, "posteriors": post})
    return {"noise": result.noise, "levels": levels, "diagnostics": result.diagnostics}


def policy_profile_from_json(g: GameTree, data: dict, level: int | None = None) -> dict:
    """Rebuild a level's policy profile from ``to_json`` output."""
    entry = data["levels"][-1 if level is None else level]
    by_key = {(i.role, i.var, _observed_text(i)): i for i in g.infosets}
    pp: dict = {r: {} for r in game_roles(g)}
    for e in entry["policies"]:
        obs = ",".join(f"{k}={v}" for k, v in sorted(e["observed"].items()))
        i = by_key.get((e["role"], e["var"], obs))
        if i is None:
            raise ProfileError(f"policy file names unknown information set {e}")
        pp[e["role"]][i] = _table_dist(e["probs"], g.actions(i), f"policy at {i}")
    return pp


def summary(result: SolveResult, g: GameTree) -> str:
    """Per level, the probability of ``true`` at each boolean decision."""
    lines = []
    for level, profile in enumerate(result.policies):
        for r in sorted(profile):
            for i, dist in profile[r].items():
                if set(dist) == {False, True}:
                    lines.append(f"level {level}\t{r}\tP({i.var}=true | {_observed_text(i)}) = "
                                 f"{dist[True]:.6f}")
                else:
                    best = max(dist, key=lambda a: dist[a])
                    lines.append(f"level {level}\t{r}\t{i.var} | {_observed_text(i)}: "
                                 f"mode {format_value(best)} ({dist[best]:.6f})")
    for d in result.diagnostics:
        lines.append(f"note: {d}")
    return "\n".join(lines) + "\n"


def dumps(result: SolveResult, role: str | None = None) -> str:
    return json.dumps(to_json(result, role), indent=2, sort_keys=True) + "\n"

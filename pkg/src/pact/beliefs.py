"""Belief profiles: one analyst's priors, utility terms, level and noise.

On disk a profile is JSON::

    {
      "priors": {"book.quality": {"low": 0.4, "high": 0.6}},
      "utility_terms": {"buyer": {"book.quality": {"table": {"low": 0, "high": 3}}}},
      "level": 1,
      "noise": 0.2,
      "level0": {
        "seller": {"price": [{"given": {"book.quality": "high"}, "probs": {"1": 0.1, "2": 0.9}},
                             {"given": {"book.quality": "low"},  "probs": {"1": 0.9, "2": 0.1}}]},
        "buyer": "uniform"
      },
      "params": {}
    }

Values are written as their source text (``"high"``, ``"2"``, ``"true"``).
A utility term is either ``{"table": {value: utility}}`` or
``{"weight": w}``, the latter scaling the term's numeric magnitude.  Level-0
rows match an information set when every ``given`` binding agrees with
what the deciding role has observed; the first matching row wins.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .ast import Domain, EvalError, Opaque, format_value, numeric
from .dist import TOL, check_distribution
from .parser import render_expr


class ProfileError(Exception):
    pass


@dataclass(frozen=True)
class TermFunction:
    table: dict | None = None
    weight: float | None = None

    def __call__(self, value) -> float:
        if self.table is not None:
            key = format_value(value)
            if key not in self.table:
                raise ProfileError(f"utility table has no entry for {key}")
            return float(self.table[key])
        try:
            return self.weight * numeric(value)
        except EvalError as e:
            raise ProfileError(f"weighted utility term needs a number: {e}") from None

    def to_dict(self) -> dict:
        return {"table": dict(self.table)} if self.table is not None else {"weight": self.weight}


@dataclass
class BeliefProfile:
    priors: dict = field(default_factory=dict)
    utility_terms: dict = field(default_factory=dict)
    level: int = 0
    noise: float = 1.0
    level0: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.level, bool) or not isinstance(self.level, int) or self.level < 0:
            raise ProfileError(f"level must be a non-negative integer, got {self.level!r}")
        if not (isinstance(self.noise, (int, float)) and self.noise > 0):
            raise ProfileError(f"noise must be positive, got {self.noise!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "BeliefProfile":
        unknown = set(d) - {"priors", "utility_terms", "level", "noise", "level0", "params"}
        if unknown:
            raise ProfileError(f"unknown belief profile keys: {', '.join(sorted(unknown))}")
        terms = {}
        for role, entries in d.get("utility_terms", {}).items():
            terms[role] = {}
            for term, entry in entries.items():
                if "table" in entry:
                    fn = TermFunction(table={str(_text(k)): float(v) for k, v in entry["table"].items()})
                elif "weight" in entry:
                    fn = TermFunction(weight=float(entry["weight"]))
                else:
                    raise ProfileError(f"utility term {role}.values({term}) needs 'table' or 'weight'")
                terms[role][term] = fn
        priors = {
            var: {_text(k): float(p) for k, p in dist.items()}
            for var, dist in d.get("priors", {}).items()
        }
        return cls(
            priors=priors,
            utility_terms=terms,
            level=d.get("level", 0),
            noise=d.get("noise", 1.0),
            level0=d.get("level0", {}),
            params=d.get("params", {}),
        )

    @classmethod
    def load(cls, path) -> "BeliefProfile":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "priors": self.priors,
            "utility_terms": {
                r: {t: fn.to_dict() for t, fn in terms.items()}
                for r, terms in self.utility_terms.items()
            },
            "level": self.level,
            "noise": self.noise,
            "level0": self.level0,
            "params": self.params,
        }

    def with_overrides(self, level=None, noise=None) -> "BeliefProfile":
        changes = {}
        if level is not None:
            changes["level"] = level
        if noise is not None:
            changes["noise"] = noise
        return replace(self, **changes)

    @classmethod
    def uniform(cls, checked, **kw) -> "BeliefProfile":
        """Uniform priors and zero-weight utility terms for every declaration."""
        priors = {
            s.target: {format_value(v): 1.0 / len(checked.domain(s.domain).values)
                       for v in checked.domain(s.domain).values}
            for s in checked.nature_vars
        }
        terms = {}
        for s in checked.value_terms:
            terms.setdefault(s.role, {})[render_expr(s.term)] = TermFunction(weight=0.0)
        return cls(priors=priors, utility_terms=terms, **kw)


def _text(k) -> str:
    if isinstance(k, str):
        return k
    return format_value(k)


@dataclass
class ResolvedBeliefs:
    """A profile bound to a checked protocol's domains and declarations."""

    profile: BeliefProfile
    priors: dict  # nature var -> {Value: prob}, in domain order
    terms: list  # (role, term expr, TermFunction)
    params: dict  # param -> Value

    @property
    def level(self) -> int:
        return self.profile.level

    @property
    def noise(self) -> float:
        return self.profile.noise


def resolve(profile: BeliefProfile, checked) -> ResolvedBeliefs:
    priors = {}
    for s in checked.nature_vars:
        if s.target not in profile.priors:
            raise ProfileError(f"missing prior for nature variable {s.target}")
        dom: Domain = checked.domain(s.domain)
        raw = profile.priors[s.target]
        dist = {}
        for key, p in raw.items():
            try:
                dist[dom.lookup(key)] = p
            except KeyError as e:
                raise ProfileError(f"prior for {s.target}: {e.args[0]}") from None
        dist = {v: dist.get(v, 0.0) for v in dom.values}
        if abs(sum(dist.values()) - 1.0) > TOL or min(dist.values()) < 0:
            raise ProfileError(f"prior for {s.target} must be a distribution summing to 1")
        priors[s.target] = check_distribution(dist, f"prior for {s.target}")
    terms = []
    for s in checked.value_terms:
        text = render_expr(s.term)
        fn = profile.utility_terms.get(s.role, {}).get(text)
        if fn is None:
            raise ProfileError(f"missing utility term for {s.role}.values({text})")
        if fn.table is not None:
            dom = _term_domain(s.term, checked)
            if dom is not None:
                missing = [format_value(v) for v in dom.values if format_value(v) not in fn.table]
                if missing:
                    raise ProfileError(
                        f"utility table for {s.role}.values({text}) lacks {', '.join(missing)}")
        terms.append((s.role, s.term, fn))
    params = {}
    for prm in checked.protocol.params:
        if prm.name in profile.params:
            raw = profile.params[prm.name]
            dom = checked.protocol.domain_map.get(prm.type)
            if dom is not None:
                try:
                    params[prm.name] = dom.lookup(raw)
                except KeyError as e:
                    raise ProfileError(f"param {prm.name}: {e.args[0]}") from None
            elif isinstance(raw, (bool, int)):
                params[prm.name] = raw
            else:
                raise ProfileError(f"param {prm.name} needs an integer or boolean value")
        else:
            params[prm.name] = Opaque(prm.name)
    for role in profile.level0:
        if role not in checked.roles:
            raise ProfileError(f"level0 names unknown role {role}")
    return ResolvedBeliefs(profile, priors, terms, params)


def _term_domain(term, checked) -> Domain | None:
    from .ast import Var

    if isinstance(term, Var):
        info = checked.variables.get(term.name)
        if info is not None:
            return info.domain
    return None


def load_beliefs(path) -> BeliefProfile:
    return BeliefProfile.load(Path(path))

"""Finite distributions as ``{outcome: probability}`` dicts.

``check_distribution`` is the one normalization assertion every module
applies to what it emits: priors, policies, posteriors and outcome
distributions.
"""
from __future__ import annotations

import math

TOL = 1e-9


class NormalizationError(AssertionError):
    pass


def check_distribution(dist: dict, what: str = "distribution", tol: float = TOL) -> dict:
    if not dist:
        raise NormalizationError(f"{what} is empty")
    total = 0.0
    for k, p in dist.items():
        if not (p >= -tol) or math.isnan(p):
            raise NormalizationError(f"{what} has negative mass {p!r} at {k!r}")
        total += p
    if abs(total - 1.0) > tol:
        raise NormalizationError(f"{what} sums to {total!r}, not 1")
    return dist


def normalize(weights: dict) -> dict:
    total = sum(weights.values())
    if total <= 0:
        raise ValueError("cannot normalize zero total weight")
    return {k: w / total for k, w in weights.items()}


def uniform(outcomes) -> dict:
    outcomes = list(outcomes)
    return {o: 1.0 / len(outcomes) for o in outcomes}


def softmax(scores: dict, temperature: float) -> dict:
    """``p(k) ∝ exp(score(k) / temperature)``, evaluated stably."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    top = max(scores.values())
    weights = {k: math.exp((s - top) / temperature) for k, s in scores.items()}
    return normalize(weights)


def sample(dist: dict, rng) -> object:
    """Draw from ``dist`` with ``rng.random()``; iteration order is the support order."""
    u = rng.random()
    acc = 0.0
    last = None
    for k, p in dist.items():
        if p <= 0:
            continue
        acc += p
        last = k
        if u < acc:
            return k
    return last

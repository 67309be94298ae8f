"""Pact: choreographic protocols analysed as games."""
from .ast import Domain, Label, Opaque, Protocol, format_value
from .beliefs import BeliefProfile, ProfileError, load_beliefs
from .checker import CheckedProtocol, check_well_formed, knowledge_analysis
from .diagnostics import Diagnostic, SourceSpan
from .dist import NormalizationError, check_distribution
from .game import GameTree, InfoSet, PolicyError, build_game, expected_utility, outcome_distribution
from .parser import parse_protocol, render_protocol
from .projector import LocalProgram, project, project_all
from .simulator import (
    ConformanceError,
    RuntimePolicyError,
    SimulationReport,
    TraceRecord,
    check_trace_conformance,
    explore,
    run_once,
    run_trials,
)
from .solver import SolveResult, level0_policy, posterior, softmax_response, solve_level_k

__all__ = [
    "BeliefProfile",
    "CheckedProtocol",
    "ConformanceError",
    "Diagnostic",
    "Domain",
    "GameTree",
    "InfoSet",
    "Label",
    "LocalProgram",
    "NormalizationError",
    "Opaque",
    "PolicyError",
    "ProfileError",
    "Protocol",
    "RuntimePolicyError",
    "SimulationReport",
    "SolveResult",
    "SourceSpan",
    "TraceRecord",
    "build_game",
    "check_distribution",
    "check_trace_conformance",
    "check_well_formed",
    "expected_utility",
    "explore",
    "format_value",
    "knowledge_analysis",
    "level0_policy",
    "load_beliefs",
    "outcome_distribution",
    "parse_protocol",
    "posterior",
    "project",
    "project_all",
    "render_protocol",
    "run_once",
    "run_trials",
    "softmax_response",
    "solve_level_k",
]

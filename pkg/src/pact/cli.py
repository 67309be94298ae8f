"""``pact`` command line: check, project, game, solve, simulate.

Exit codes: 0 success, 1 check or profile failure, 2 unreadable input.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import diagnostics
from .beliefs import BeliefProfile, ProfileError
from .checker import check_well_formed
from .dist import NormalizationError
from .game import PolicyError, build_game, expected_utility
from .parser import parse_protocol
from .projector import project, project_all
from .simulator import ConformanceError, RuntimePolicyError, run_trials, traces_jsonl
from .solver import dumps, policy_profile_from_json, solve_level_k, summary, to_tsv
from .ast import format_value

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class _Fail(Exception):
    def __init__(self, message: str, code: int = EXIT_FAIL):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise _Fail(f"pact: cannot read {path}: {e.strerror or e}", EXIT_IO) from None


def _checked(path: str, quiet_warnings: bool = False):
    result = parse_protocol(_read(path), path)
    if isinstance(result, list):
        sys.stderr.write(diagnostics.format_all(result))
        raise _Fail("", EXIT_FAIL)
    checked = check_well_formed(result)
    if isinstance(checked, list):
        sys.stderr.write(diagnostics.format_all(checked))
        raise _Fail("", EXIT_FAIL)
    if checked.warnings and not quiet_warnings:
        sys.stderr.write(diagnostics.format_all(checked.warnings))
    return checked


def _profile(args, checked) -> BeliefProfile:
    try:
        if args.beliefs:
            try:
                data = json.loads(_read(args.beliefs))
            except json.JSONDecodeError as e:
                raise ProfileError(f"{args.beliefs}: invalid JSON: {e}") from None
            profile = BeliefProfile.from_dict(data)
        else:
            profile = BeliefProfile.uniform(checked)
        return profile.with_overrides(level=getattr(args, "level", None), noise=getattr(args, "noise", None))
    except ProfileError as e:
        raise _Fail(f"pact: profile error: {e}") from None


def _emit(args, text: str):
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write(text)
        except OSError as e:
            raise _Fail(f"pact: cannot write {args.out}: {e.strerror or e}", EXIT_IO) from None
    else:
        sys.stdout.write(text)


# -- subcommands --------------------------------------------------------------


def cmd_check(args) -> int:
    result = parse_protocol(_read(args.file), args.file)
    if not isinstance(result, list):
        result = check_well_formed(result)
    diags = result if isinstance(result, list) else result.warnings
    if args.format == "json":
        _emit(args, diagnostics.report_json(diags) + "\n")
    else:
        sys.stderr.write(diagnostics.format_all(diags))
        if not isinstance(result, list):
            _emit(args, f"{args.file}: ok ({', '.join(result.roles)})\n")
    return EXIT_FAIL if isinstance(result, list) else EXIT_OK


def cmd_project(args) -> int:
    checked = _checked(args.file)
    if args.role:
        if args.role not in checked.roles:
            raise _Fail(f"pact: {args.role} is not a role of {checked.name}")
        programs = {args.role: project(checked, args.role)}
    else:
        programs = project_all(checked)
    if args.format == "json":
        _emit(args, json.dumps([p.to_dict() for p in programs.values()], indent=2) + "\n")
    else:
        _emit(args, "\n".join(p.listing() for p in programs.values()))
    return EXIT_OK


def cmd_game(args) -> int:
    checked = _checked(args.file)
    g = build_game(checked, _profile(args, checked))
    roles = [r for r in checked.roles if not args.role or r == args.role]
    rows = []
    for t in g.terminals:
        binds = ",".join(f"{k}={format_value(v)}" for k, v in t.bindings.items())
        rows.append((t.id, binds, {r: t.utility[r] for r in roles}))
    if args.format == "json":
        data = {
            "summary": g.summary(),
            "infosets": [str(i) for i in g.infosets if i.role in roles],
            "terminals": [{"id": i, "bindings": b, "utility": u} for i, b, u in rows],
        }
        _emit(args, json.dumps(data, indent=2) + "\n")
        return EXIT_OK
    lines = []
    if args.format == "text":
        lines.append(g.summary())
        lines.extend(f"info set {i}" for i in g.infosets if i.role in roles)
    lines.append("\t".join(["terminal", "bindings", *roles]))
    lines.extend("\t".join([str(i), b, *(f"{u[r]:g}" for r in roles)]) for i, b, u in rows)
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    checked = _checked(args.file)
    profile = _profile(args, checked)
    g = build_game(checked, profile)
    result = solve_level_k(g, profile)
    if args.format == "json":
        _emit(args, dumps(result, args.role))
    elif args.format == "tsv":
        _emit(args, to_tsv(result, args.role))
    else:
        _emit(args, to_tsv(result, args.role) + "\n" + summary(result, g))
    return EXIT_OK


def cmd_simulate(args) -> int:
    checked = _checked(args.file)
    profile = _profile(args, checked)
    g = build_game(checked, profile)
    if args.policies:
        try:
            pp = policy_profile_from_json(g, json.loads(_read(args.policies)))
        except (KeyError, json.JSONDecodeError) as e:
            raise _Fail(f"pact: bad policy file {args.policies}: {e}") from None
    else:
        pp = solve_level_k(g, profile).final()
    report = run_trials(checked, pp, profile, args.trials, args.seed, args.schedule,
                        keep_traces=bool(args.traces))
    if args.traces:
        try:
            with open(args.traces, "w", encoding="utf-8") as f:
                f.write(traces_jsonl(report.traces))
        except OSError as e:
            raise _Fail(f"pact: cannot write {args.traces}: {e.strerror or e}", EXIT_IO) from None
    if args.format == "json":
        data = report.to_dict()
        data["expected_utility"] = {r: expected_utility(g, r, pp) for r in checked.roles}
        _emit(args, json.dumps(data, indent=2) + "\n")
    elif args.format == "tsv":
        _emit(args, report.to_tsv())
    else:
        text = report.to_text()
        text += "".join(f"  {r}: expected utility {expected_utility(g, r, pp):.4f}\n"
                        for r in checked.roles)
        _emit(args, text)
    return EXIT_OK if report.conformance_failures == 0 else EXIT_FAIL


# -- argument parsing -----------------------------------------------------------


def _level(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"level must be an integer, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "tsv", "json"], default="text",
                        help="output format (default: text)")
    common.add_argument("--out", help="write output here instead of standard output")
    common.add_argument("--role", help="restrict output to one role")

    game_opts = argparse.ArgumentParser(add_help=False)
    game_opts.add_argument("--beliefs", help="belief profile (JSON); uniform if omitted")
    game_opts.add_argument("--level", type=_level, help="override the profile's level")
    game_opts.add_argument("--noise", type=float, help="override the profile's noise (> 0)")

    p = argparse.ArgumentParser(prog="pact", description="Check, project and analyse Pact protocols.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="parse and check a protocol")
    s.add_argument("file")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("project", parents=[common], help="print per-role local programs")
    s.add_argument("file")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("game", parents=[common, game_opts], help="summarize the game tree")
    s.add_argument("file")
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("solve", parents=[common, game_opts], help="level-k policies")
    s.add_argument("file")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", parents=[common, game_opts], help="run seeded trials")
    s.add_argument("file")
    s.add_argument("--seed", default="0", help="base seed (default: 0)")
    s.add_argument("--trials", type=int, default=1000, help="number of runs (default: 1000)")
    s.add_argument("--schedule", default="roundrobin", help="roundrobin or random:K")
    s.add_argument("--policies", help="policy file written by 'pact solve --format json'")
    s.add_argument("--traces", help="write every trace here as JSON lines")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        sys.stderr.write("pact: --trials must be at least 1\n")
        return EXIT_FAIL
    try:
        return args.func(args)
    except _Fail as e:
        if str(e):
            sys.stderr.write(str(e) + "\n")
        return e.code
    except ProfileError as e:
        sys.stderr.write(f"pact: profile error: {e}\n")
        return EXIT_FAIL
    except (PolicyError, RuntimePolicyError, ConformanceError, NormalizationError) as e:
        sys.stderr.write(f"pact: {e}\n")
        return EXIT_FAIL
    except ValueError as e:
        sys.stderr.write(f"pact: {e}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

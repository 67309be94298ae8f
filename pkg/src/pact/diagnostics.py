from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    span: SourceSpan | None
    message: str
    code: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def format(self) -> str:
        where = str(self.span) if self.span else "<unknown>:0:0"
        prefix = "" if self.is_error else "warning: "
        return f"{where}: {self.code}: {prefix}{self.message}"

    __str__ = format

    def to_dict(self) -> dict:
        d = asdict(self)
        d["span"] = asdict(self.span) if self.span else None
        return d


def error(code: str, message: str, span: SourceSpan | None) -> Diagnostic:
    return Diagnostic("error", span, message, code)


def warning(code: str, message: str, span: SourceSpan | None) -> Diagnostic:
    return Diagnostic("warning", span, message, code)


def sort_key(d: Diagnostic):
    s = d.span
    return (s.file, s.line, s.column, d.code) if s else ("", 0, 0, d.code)


def format_all(diags) -> str:
    return "".join(d.format() + "\n" for d in sorted(diags, key=sort_key))


def report_json(diags) -> str:
    """Structured diagnostics report."""
    items = [d.to_dict() for d in sorted(diags, key=sort_key)]
    errors = sum(d.is_error for d in diags)
    return json.dumps(
        {"errors": errors, "warnings": len(items) - errors, "diagnostics": items},
        indent=2,
    )

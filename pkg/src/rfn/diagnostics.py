"""Source locations, diagnostics, and the error type raised by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True, order=True)
class SourceLocation:
    file: str = "<input>"
    line: int = 1
    column: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid location {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NOWHERE = SourceLocation("<builtin>", 1, 1)

ERROR = "error"
WARNING = "warning"


@dataclass
class Diagnostic:
    severity: str
    code: str
    message: str
    location: SourceLocation = NOWHERE
    counterexample: Optional[str] = None

    def sort_key(self):
        return (self.location.file, self.location.line, self.location.column, self.code, self.message)

    def render(self) -> str:
        text = f"{self.location}: {self.severity} {self.code}: {self.message}"
        if self.counterexample:
            body = "\n".join("    " + ln for ln in self.counterexample.splitlines())
            text += "\n  counterexample:\n" + body
        return text

    def to_json(self) -> dict:
        out = {
            "code": self.code,
            "severity": self.severity,
            "file": self.location.file,
            "line": self.location.line,
            "column": self.location.column,
            "message": self.message,
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


class RefineError(Exception):
    """A located static error. `code` is the stable diagnostic identifier."""

    code = "ERROR"

    def __init__(self, message: str, loc: SourceLocation = NOWHERE, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.loc = loc
        if code is not None:
            self.code = code

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(ERROR, self.code, self.message, self.loc)

    def __str__(self) -> str:
        return f"{self.loc}: {self.code}: {self.message}"


class LexError(RefineError):
    code = "LEXICAL_ERROR"


class ParseError(RefineError):
    code = "SYNTAX_ERROR"


@dataclass
class DiagnosticBag:
    items: list = field(default_factory=list)

    def add(self, diag: Diagnostic) -> None:
        self.items.append(diag)

    def error(self, code: str, message: str, loc: SourceLocation = NOWHERE) -> None:
        self.items.append(Diagnostic(ERROR, code, message, loc))

    def warning(self, code: str, message: str, loc: SourceLocation = NOWHERE) -> None:
        self.items.append(Diagnostic(WARNING, code, message, loc))

    def extend(self, diags) -> None:
        self.items.extend(diags)

    @property
    def has_errors(self) -> bool:
        return any(d.severity == ERROR for d in self.items)

    def sorted(self) -> list:
        return sorted(self.items, key=Diagnostic.sort_key)

"""Shared paths and small drivers for the test suite."""

from __future__ import annotations

import io
import pathlib

from rfn import cli
from rfn.pipeline import load

ROOT = pathlib.Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
NEGATIVE = CORPUS / "negative"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"

CORE_FILES = ["fig0.rfn", "fig1.rfn", "fig2.rfn", "fig3_4.rfn", "counter.rfn"]
ALL_POSITIVE = [["fig0.rfn"], ["fig1.rfn"], ["fig2.rfn"], ["fig3_4.rfn"], ["imports.rfn"], ["pivot.rfn"],
                ["counter.rfn", "counter_drivers.rfn"]]


def corpus(*names) -> list:
    return [str(CORPUS / n) for n in names]


def negative(name: str) -> str:
    return str(NEGATIVE / name)


def run_cli(*argv) -> tuple:
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def frontend(text: str, filename: str = "t.rfn"):
    return load(text=text, filename=filename)


def codes(fe) -> list:
    return [d.code for d in fe.diagnostics if d.severity == "error"]

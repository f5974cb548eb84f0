"""Command-line entry point: check, expand, vcs, run.

Exit codes: 0 clean, 1 a verification obligation was refuted, 2 static error, 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .diagnostics import ERROR, Diagnostic
from .exec import EraseError, erase_ghost, ghost_dependencies, interpret, parse_arg, unerased
from .pipeline import Frontend, load, sorted_diagnostics
from .semantics import Trap
from .syntax.printer import pretty_print
from .verify.checker import check_module, obligation_json
from .verify.engine import Bounds
from .verify.obligations import generate_obligations
from .verify.smtlib import emit_smtlib, write_scripts

EXIT_OK, EXIT_REFUTED, EXIT_STATIC, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def non_negative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def build_parser() -> Parser:
    p = Parser(prog="rfn", description="Check, expand, verify, and run refinement modules.")
    sub = p.add_subparsers(dest="command", parser_class=Parser)

    def bounds_flags(sp):
        sp.add_argument("--int-range", type=non_negative, default=3, metavar="N",
                        help="enumerate integers in [-N, N] (default 3)")
        sp.add_argument("--max-objects", type=positive, default=3, metavar="N",
                        help="pre-state objects per class (default 3)")
        sp.add_argument("--depth", type=positive, default=2, metavar="N", help="datatype nesting depth (default 2)")
        sp.add_argument("--recheck-inherited", action="store_true", help="also check Inherited obligations")

    c = sub.add_parser("check", help="parse, merge, and verify every module")
    c.add_argument("files", nargs="*")
    bounds_flags(c)
    c.add_argument("--json", action="store_true", help="machine-readable report")
    c.add_argument("--timing", action="store_true", help="include per-module wall-clock time")

    e = sub.add_parser("expand", help="print a merged module")
    e.add_argument("files", nargs="*")
    e.add_argument("--module", "-m", required=True)
    e.add_argument("--provenance", action="store_true", help="prefix lines with = (inherited), + (new), ~ (tightened)")

    v = sub.add_parser("vcs", help="list proof obligations")
    v.add_argument("files", nargs="*")
    v.add_argument("--module", "-m", help="only this module (default: all)")
    v.add_argument("--json", action="store_true")
    v.add_argument("--smt", metavar="DIR", help="write SMT-LIB scripts into DIR")
    v.add_argument("--int-range", type=non_negative, default=3, metavar="N")
    v.add_argument("--unbounded", action="store_true", help="omit enumeration-bound constraints from scripts")

    r = sub.add_parser("run", help="erase ghost code and execute a method")
    r.add_argument("files", nargs="*")
    r.add_argument("--entry", required=True, help="Module.Method or Module.Class.Method")
    r.add_argument("--args", nargs="*", default=[], help="integer/boolean arguments")
    r.add_argument("--runtime-checks", action="store_true",
                   help="execute with ghost state and check asserts and assumes")
    r.add_argument("--trace", action="store_true", help="print branch decisions")
    return p


def _load(files) -> Frontend:
    if not files:
        raise UsageError("no input files")
    for f in files:
        if not os.path.isfile(f):
            raise UsageError(f"cannot read {f}")
    return load(files)


def _emit(diags, as_json: bool, out, extra: Optional[dict] = None):
    diags = sorted_diagnostics(diags)
    if as_json:
        doc = {"diagnostics": [d.to_json() for d in diags]}
        doc.update(extra or {})
        out.write(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    else:
        for d in diags:
            out.write(d.render() + "\n")


def _static_errors(fe: Frontend) -> bool:
    return any(d.severity == ERROR for d in fe.diagnostics)


def _bounds(args) -> Bounds:
    return Bounds(int_low=-args.int_range, int_high=args.int_range,
                  max_objects=getattr(args, "max_objects", 3), datatype_depth=getattr(args, "depth", 2))


def cmd_check(args, out) -> int:
    fe = _load(args.files)
    if _static_errors(fe):
        _emit(fe.diagnostics, args.json, out)
        return EXIT_STATIC
    env = fe.env()
    diags = list(fe.diagnostics)
    for name in fe.order:
        if not fe.merged[name].module.is_abstract:
            diags.extend(ghost_dependencies(fe.env("compile"), name))
    if any(d.severity == ERROR for d in diags):
        _emit(diags, args.json, out)
        return EXIT_STATIC
    bounds = _bounds(args)
    modules = []
    refuted = False
    summary = []
    for name in fe.order:
        rep = check_module(env, fe.merged[name], bounds, args.recheck_inherited)
        diags.extend(rep.diagnostics())
        refuted |= not rep.verifies
        counts = rep.counts()
        entry = {"module": name, "verifies": rep.verifies, "counts": counts,
                 "obligations": [obligation_json(o, v) for o, v in rep.results]}
        line = (f"{name}: {len(rep.results)} obligations, {counts['Valid']} Valid, "
                f"{counts['Refuted']} Refuted, {counts['InheritedSkipped']} InheritedSkipped")
        if args.timing:
            entry["seconds"] = round(rep.seconds, 3)
            line += f" ({rep.seconds:.2f}s)"
        modules.append(entry)
        summary.append(line)
    if args.json:
        _emit(diags, True, out, {"modules": modules})
    else:
        _emit(diags, False, out)
        for line in summary:
            out.write(line + "\n")
    return EXIT_REFUTED if refuted else EXIT_OK


def cmd_expand(args, out) -> int:
    fe = _load(args.files)
    if _static_errors(fe):
        _emit(fe.diagnostics, False, out)
        return EXIT_STATIC
    mm = fe.merged.get(args.module)
    if mm is None:
        raise UsageError(f"no module named {args.module}")
    out.write(pretty_print(mm.module, mm.mark if args.provenance else None))
    return EXIT_OK


def cmd_vcs(args, out) -> int:
    fe = _load(args.files)
    if _static_errors(fe):
        _emit(fe.diagnostics, args.json, out)
        return EXIT_STATIC
    names = fe.order
    if args.module is not None:
        if args.module not in fe.merged:
            raise UsageError(f"no module named {args.module}")
        names = [args.module]
    env = fe.env()
    listing = []
    skipped_lines = []
    for name in names:
        mm = fe.merged[name]
        obs = generate_obligations(mm, env)
        listing.extend(obs)
        if args.smt:
            bounds = Bounds(int_low=-args.int_range, int_high=args.int_range)
            scripts = emit_smtlib(env, mm, obs, bounds, bounded=not args.unbounded)
            for s in write_scripts(scripts, args.smt):
                skipped_lines.append(f"skipped {s.name}: unsupported construct: {s.unsupported}")
    if args.json:
        out.write(json.dumps([obligation_json(o) for o in listing], indent=2) + "\n")
    else:
        for o in listing:
            out.write(f"{o.loc}: {o.origin}#{o.index} {o.kind} {o.status}: {o.formula_text()}\n")
        for line in skipped_lines:
            out.write(line + "\n")
    return EXIT_OK


def cmd_run(args, out) -> int:
    fe = _load(args.files)
    if _static_errors(fe):
        _emit(fe.diagnostics, False, out)
        return EXIT_STATIC
    parts = args.entry.split(".")
    if len(parts) < 2 or parts[0] not in fe.merged:
        raise UsageError(f"entry {args.entry} does not name a module member")
    module, member = parts[0], ".".join(parts[1:])
    try:
        values = [parse_arg(a) for a in args.args]
    except ValueError:
        raise UsageError("arguments must be integers, true, false, or null")
    try:
        program = erase_ghost(fe, module)
    except EraseError as err:
        _emit(err.all, False, out)
        return EXIT_STATIC
    if args.runtime_checks:
        program = unerased(fe, module)
    try:
        result = interpret(program, member, values, runtime_checks=args.runtime_checks)
    except (LookupError, ValueError) as err:
        raise UsageError(str(err))
    except Trap as t:
        out.write(Diagnostic(ERROR, t.code, t.message, t.loc).render() + "\n")
        return EXIT_REFUTED
    if args.trace:
        for line in result.trace:
            out.write(f"trace: {line}\n")
    for line in result.output_lines():
        out.write(line + "\n")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "expand": cmd_expand, "vcs": cmd_vcs, "run": cmd_run}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("expected a command: check, expand, vcs, or run")
        return COMMANDS[args.command](args, out)
    except UsageError as err:
        sys.stderr.write(f"rfn: usage error: {err}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

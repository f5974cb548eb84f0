"""Ghost erasure and the interpreter."""

from __future__ import annotations

import pytest

from helpers import corpus, frontend, negative
from rfn.exec import EraseError, erase_ghost, ghost_dependencies, interpret, parse_arg, unerased
from rfn.pipeline import load
from rfn.semantics import Trap

COUNTER = corpus("counter.rfn", "counter_drivers.rfn")


def erased_codes(fe, module):
    with pytest.raises(EraseError) as e:
        erase_ghost(fe, module)
    return [d.code for d in e.value.all]


def run(text, module, entry, args=(), checks=False):
    fe = frontend(text)
    assert fe.ok, fe.diagnostics
    prog = unerased(fe, module) if checks else erase_ghost(fe, module)
    return interpret(prog, entry, list(args), runtime_checks=checks)


class TestCounterDifferential:
    @pytest.mark.parametrize("driver", ["Driver2", "Driver3", "Driver4"])
    def test_driver_returns_two(self, driver):
        res = interpret(erase_ghost(load(COUNTER), driver), "Main")
        assert res.outputs == [("r", 2)]

    def test_fast_path_in_m3_and_m4_only(self):
        fe = load(COUNTER)
        traces = {d: interpret(erase_ghost(fe, d), "Main").trace for d in ("Driver2", "Driver3", "Driver4")}
        assert traces["Driver2"] == []
        assert traces["Driver3"] == ["M3.Counter.Get: if at line 74: then"]
        assert traces["Driver4"] == ["M4.Counter.Get: if at line 74: then"]  # inherited from M3

    def test_ghost_fields_absent_after_erasure(self):
        res = interpret(erase_ghost(load(COUNTER), "Driver3"), "Main")
        counters = [fields for cls, fields in res.objects.values() if cls == "Counter"]
        assert counters and all(set(f) == {"c", "d"} for f in counters)

    def test_unerased_run_keeps_ghost_state_and_agrees(self):
        fe = load(COUNTER)
        plain = interpret(erase_ghost(fe, "Driver2"), "Main")
        full = interpret(unerased(fe, "Driver2"), "Main", runtime_checks=True)
        assert plain.outputs == full.outputs
        counter = next(f for cls, f in full.objects.values() if cls == "Counter")
        assert counter["N"] == 2 and len(counter["Repr"]) == 3


class TestErasure:
    def test_abstract_module_is_not_compilable(self):
        assert erased_codes(load(COUNTER), "M1") == ["ABSTRACT_MODULE_NOT_COMPILABLE"]

    def test_residual_nondeterminism(self):
        assert erased_codes(load([negative("residual_nondeterminism.rfn")]), "Coin") == ["RESIDUAL_NONDETERMINISM"]

    def test_ghost_dependency(self):
        fe = load([negative("ghost_dependency.rfn")])
        assert [d.code for d in ghost_dependencies(fe.env("compile"), "Leaky")] == ["GHOST_DEPENDENCY"]
        assert erased_codes(fe, "Leaky") == ["GHOST_DEPENDENCY"]

    def test_assume_marked_choice_is_not_compilable(self):
        text = "module A { method F(x: int) returns (y: int) { y :| assume y == x; } }"
        assert erased_codes(frontend(text), "A") == ["NOT_COMPILABLE"]

    def test_specifications_and_ghost_locals_are_dropped(self):
        text = ("module A { method F(x: int) returns (y: int) requires x > 100 ensures y == x "
                "{ ghost var g := x; assert g == x; y := x; } }")
        res = run(text, "A", "F", [1])
        assert res.outputs == [("y", 1)]

    def test_ghost_assignment_inside_compiled_if_is_erased(self):
        text = ("module A { class C { var v: int ghost var shadow: int "
                "constructor () modifies this { v := 0; shadow := 0; } "
                "method Bump() modifies this { if v < 5 { v := v + 1; shadow := shadow + 1; } } } "
                "method Main() returns (r: int) { var c := new C(); c.Bump(); r := c.v; } }")
        res = run(text, "A", "Main")
        assert res.outputs == [("r", 1)]
        assert all("shadow" not in f for _c, f in res.objects.values())


class TestInterpreter:
    def test_loops_and_arithmetic(self):
        text = ("module A { method Sum(n: int) returns (s: int) { s := 0; var i := 0; "
                "while i < n decreases n - i { i := i + 1; s := s + i; } } }")
        assert run(text, "A", "Sum", [10]).outputs == [("s", 55)]

    def test_recursion_and_early_return(self):
        text = ("module A { method Fact(n: int) returns (r: int) decreases n "
                "{ if n <= 0 { return 1; } var k := Fact(n - 1); r := n * k; } }")
        assert run(text, "A", "Fact", [5]).outputs == [("r", 120)]

    def test_euclidean_division(self):
        text = "module A { method D(a: int, b: int) returns (q: int, m: int) { q := a / b; m := a % b; } }"
        assert run(text, "A", "D", [-7, 2]).outputs == [("q", -4), ("m", 1)]

    def test_sequences(self):
        text = "module A { method S() returns (n: int, x: int) { var a := [4, 5, 6]; n := |a|; x := a[1]; } }"
        assert run(text, "A", "S").outputs == [("n", 3), ("x", 5)]

    @pytest.mark.parametrize("body, code", [
        ("y := 1 / x;", "DIVISION_BY_ZERO"),
        ("var a := [1]; y := a[x + 3];", "INDEX_OUT_OF_RANGE"),
    ])
    def test_traps(self, body, code):
        text = f"module A {{ method F(x: int) returns (y: int) {{ {body} }} }}"
        with pytest.raises(Trap) as e:
            run(text, "A", "F", [0])
        assert e.value.code == code

    def test_null_dereference(self):
        text = "module A { class C { var f: int } method F() returns (y: int) { var c: C := null; y := c.f; } }"
        with pytest.raises(Trap) as e:
            run(text, "A", "F")
        assert e.value.code == "NULL_DEREFERENCE"

    def test_call_depth(self):
        text = "module A { method Loop(n: int) returns (r: int) decreases * { r := Loop(n); } }"
        with pytest.raises(Trap) as e:
            run(text, "A", "Loop", [0])
        assert e.value.code == "CALL_DEPTH_EXCEEDED"

    def test_runtime_checks_catch_failed_assert(self):
        text = "module A { method F(x: int) returns (y: int) { y := x; assert y > 0; } }"
        assert run(text, "A", "F", [-1]).outputs == [("y", -1)]
        with pytest.raises(Trap) as e:
            run(text, "A", "F", [-1], checks=True)
        assert e.value.code == "ASSERTION_VIOLATION"

    def test_parse_arg(self):
        assert [parse_arg(a) for a in ("3", "-2", "true", "false", "null")] == [3, -2, True, False, None]
        with pytest.raises(ValueError):
            parse_arg("x")

    def test_unknown_entry(self):
        with pytest.raises(LookupError):
            run("module A { method F() { } }", "A", "G")


def test_default_import_binds_compiled_target():
    fe = load(corpus("imports.rfn"))
    res = interpret(erase_ghost(fe, "SortingClient"), "Pick", [4, 9, False])
    assert res.outputs == [("z", 9)]

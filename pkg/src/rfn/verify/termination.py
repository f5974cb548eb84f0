"""Lexicographic order used by termination obligations."""

from __future__ import annotations


class _Top:
    """Pads the shorter of two tuples; above every integer and boolean."""

    def __repr__(self) -> str:
        return "TOP"


TOP = _Top()


def component_less(new, old) -> bool:
    """Well-founded strict order on one component."""
    if old is TOP:
        return new is not TOP
    if new is TOP:
        return False
    if isinstance(old, bool) and isinstance(new, bool):
        return (not new) and old
    if isinstance(old, bool) or isinstance(new, bool):
        return False
    return new < old and old >= 0


def lex_less(new, old) -> bool:
    """True iff tuple `new` is strictly below `old`: some prefix is equal and the next component decreases."""
    n = max(len(new), len(old))
    a = list(new) + [TOP] * (n - len(new))
    b = list(old) + [TOP] * (n - len(old))
    for x, y in zip(a, b):
        if component_less(x, y):
            return True
        if x is TOP and y is TOP:
            continue
        if x is TOP or y is TOP or type(x) is not type(y) or x != y:
            return False
    return False

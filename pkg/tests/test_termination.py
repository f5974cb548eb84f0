"""Lexicographic order behind termination obligations."""

from __future__ import annotations

import functools

from hypothesis import given
from hypothesis import strategies as st

from rfn.verify.termination import TOP, lex_less

component = st.one_of(st.integers(-4, 6), st.booleans())
tuples = st.lists(component, max_size=3).map(tuple)


def test_examples():
    assert lex_less((1,), (2,))
    assert not lex_less((2,), (2,))
    assert lex_less((-1,), (0,))
    assert not lex_less((0,), (-1,))  # no decrease below a negative bound
    assert lex_less((False, 7), (True, 0))
    assert lex_less((True, 1), (True, 2))
    assert lex_less((1, 5), (1,))  # shorter tuple padded with TOP
    assert not lex_less((1,), (1, 5))


@given(tuples)
def test_irreflexive(t):
    assert not lex_less(t, t)


@given(tuples, tuples)
def test_asymmetric(a, b):
    assert not (lex_less(a, b) and lex_less(b, a))


@given(tuples, tuples, tuples)
def test_transitive(a, b, c):
    if lex_less(a, b) and lex_less(b, c):
        assert lex_less(a, c)


def test_longest_descending_chain_is_bounded():
    # over [-3, 6]^2 each component can step 6, 5, ..., 0 and then once below zero: 8 * 8 links at most
    dom = [(a, b) for a in range(-3, 7) for b in range(-3, 7)]

    @functools.lru_cache(maxsize=None)
    def longest(t):
        return 1 + max((longest(u) for u in dom if lex_less(u, t)), default=0)

    assert max(longest(t) for t in dom) == 64


def test_top_is_above_everything():
    assert lex_less((5,), (TOP,)) and lex_less((True,), (TOP,)) and not lex_less((TOP,), (5,))

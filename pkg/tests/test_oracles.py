import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    BENCHMARK,
    DEAD,
    DFA,
    CorpusError,
    UnknownLanguage,
    bigram_argmax,
    bigram_counts,
    bigram_support,
    legal_next,
    membership,
    oracle,
    oracle_ids,
)


def test_build_adds_dead_sink():
    dfa = DFA.build(("a", "b"), {0: {"a": 0}}, 0, {0})
    assert DEAD in dfa.states
    assert dfa.run("ab") == DEAD
    assert dfa.accepts("aaa")
    assert not dfa.accepts("ab")
    assert dfa.live == frozenset({0})


def test_partial_dfa_is_rejected():
    with pytest.raises(CorpusError):
        DFA(("a",), (0,), 0, frozenset({0}), {0: {}})


@pytest.mark.parametrize(
    "language, word, expected",
    [
        ("tomita1", "111", True),
        ("tomita1", "101", False),
        ("tomita2", "1010", True),
        ("tomita2", "1001", False),
        ("tomita3", "1100", True),
        ("tomita3", "100", True),
        ("tomita3", "10", False),
        ("tomita4", "1001", True),
        ("tomita4", "10001", False),
        ("tomita5", "0110", True),
        ("tomita5", "0100", False),
        ("tomita6", "000", True),
        ("tomita6", "01", True),
        ("tomita6", "00", False),
        ("tomita7", "0101", True),
        ("tomita7", "10101", False),
        ("d2", "aabbab", True),
        ("d2", "aaabbb", False),
        ("parity", "babbab", True),
        ("parity", "ab", False),
        ("aa_star", "", True),
        ("aa_star", "aaa", False),
        ("aaaa_star", "aaaa", True),
        ("abab_star", "abab", True),
        ("abab_star", "ab", False),
        ("abcde", "aabcddde", True),
        ("abcde", "abce", False),
        ("abd_bc", "abadbcb", True),
        ("abd_bc", "abdad", False),
        ("l012", "120", True),
        ("l012", "121", False),
        ("majority", "0110", True),
        ("majority", "100", False),
        ("dyck1", "(())()", True),
        ("dyck1", "())(", False),
        ("anbncn", "aabbcc", True),
        ("anbncn", "abcabc", False),
        ("substring_ab", "bbab", True),
        ("exists_b", "aaa", False),
        ("piecewise_abc", "cabbc", True),
        ("piecewise_abc", "cba", False),
    ],
)
def test_membership(language, word, expected):
    assert membership(oracle(language), tuple(word)) is expected


def test_foreign_symbols_are_not_members():
    assert oracle("majority").accepts("12") is False


def test_unknown_language():
    with pytest.raises(UnknownLanguage):
        oracle("tomita8")


def test_benchmark_is_registered():
    assert set(BENCHMARK) <= set(oracle_ids())


def test_legal_next_regular():
    assert legal_next(oracle("tomita1"), "1") == frozenset("1")
    assert legal_next(oracle("tomita1"), "0") == frozenset()
    assert legal_next(oracle("d2"), "aa") == frozenset("b")


def test_legal_next_counter_languages():
    assert legal_next(oracle("dyck1"), "") == frozenset("(")
    assert legal_next(oracle("dyck1"), "(") == frozenset("()")
    assert legal_next(oracle("dyck1"), ")") == frozenset()
    assert legal_next(oracle("anbncn"), "aab") == frozenset("b")
    assert legal_next(oracle("anbncn"), "abc") == frozenset()


def test_completion_counts():
    table = oracle("d2").dfa.completions(4)
    # aabb, abab
    assert table[4][0] == 2


@pytest.mark.parametrize("language", ["aaaa_star", "d3", "tomita7", "dyck1", "majority", "abcde"])
def test_sampled_members_belong(language):
    o = oracle(language)
    rng = np.random.default_rng(3)
    for n in (8, 12):
        for _ in range(20):
            w = o.sample_member(n, rng)
            if w is not None:
                assert len(w) == n
                assert o.accepts(w)


def test_sampler_reports_empty_lengths():
    rng = np.random.default_rng(0)
    assert oracle("aaaa_star").sample_member(6, rng) is None
    assert oracle("dyck1").sample_member(5, rng) is None
    assert oracle("aaaa_star").sample_member(8, rng) == ("a",) * 8


def test_bigram_oracles():
    assert bigram_counts("abab", 3) == {"b": 1}
    assert bigram_support("aba") == [frozenset(), frozenset(), frozenset("b")]
    assert bigram_argmax("ababa")[4] == frozenset("b")
    assert bigram_argmax("aaba")[3] == frozenset("ab")


def _legal_by_search(o, prefix, horizon):
    """Symbols s with some completion u, |u| <= horizon, making prefix + s + u a member."""
    legal = set()
    for s in o.alphabet:
        for k in range(horizon + 1):
            if any(o.accepts((*prefix, s, *u)) for u in itertools.product(o.alphabet, repeat=k)):
                legal.add(s)
                break
    return frozenset(legal)


SEARCHABLE = (
    "tomita1", "tomita2", "tomita3", "tomita4", "tomita7",
    "parity", "aa_star", "aaaa_star", "abab_star", "d2", "d3",
    "dyck1", "majority",
)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(SEARCHABLE), st.data())
def test_legal_next_matches_completion_search(language, data):
    o = oracle(language)
    prefix = tuple(data.draw(st.lists(st.sampled_from(o.alphabet), max_size=6)))
    # a reachable accepting state is never more than |states| steps away;
    # counter languages here close within len(prefix) + 1 steps
    horizon = len(o.dfa.states) if o.dfa is not None else len(prefix) + 1
    assert horizon <= 9
    assert legal_next(o, prefix) == _legal_by_search(o, prefix, horizon)

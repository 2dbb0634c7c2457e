import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compiler import (
    ChannelOverflow,
    GadgetFactory,
    UnsupportedConstruct,
    check_channels,
    compile_program,
    format_report,
)
from corpus import LANGUAGE_OF, get_program, stdlib
from dsl import Count, Operation, Strict, Token, parse
from interp import accepts, predicted_sets
from runtime import FixedPrecision, accepts_net, forward, predicted_sets_net


def _short_words(alphabet, budget=400):
    n = 0
    while sum(len(alphabet) ** k for k in range(n + 2)) <= budget:
        n += 1
    for k in range(n + 1):
        yield from itertools.product(alphabet, repeat=k)


@pytest.mark.parametrize("name", sorted(LANGUAGE_OF))
def test_compiled_net_agrees_on_short_words(name, compiled):
    program = get_program(name)
    net, _, _ = compiled(name)
    for w in _short_words(program.alphabet):
        assert accepts_net(net, w) == accepts(program, w), (name, w)


def test_majority_report(compiled):
    net, plan, report = compiled("MAJORITY")
    assert report.program == "MAJORITY"
    assert report.layers == net.depth
    assert report.channels == net.width == plan.width
    assert report.radius == 0
    assert report.period == 1
    kinds = dict(report.gadgets)
    assert kinds["C1"] == "count"
    assert kinds["M"] == "leq"
    assert net.metadata["empty_accepts"] is True
    assert "MAJORITY" in format_report(report)


def test_channel_check_within_tolerance(compiled):
    program = get_program("SORT")
    net, plan, _ = compiled("SORT")
    tolerance = 2.0 ** (2 - net.precision.p)
    for word in ("12#", "5314#1", "2222#2"):
        check = check_channels(program, net, plan, tuple(word))
        assert check.bool_error == 0.0
        assert check.count_error <= tolerance
        assert check.max_error == check.count_error


def test_home_channels_vanish_on_start_row(compiled):
    net, plan, _ = compiled("TOMITA4")
    first = forward(net, ("$", *"0010")).layers[-1][0]
    assert all(first[ch] == 0.0 for ch in plan.homes.values())


def test_channel_overflow():
    with pytest.raises(ChannelOverflow) as exc:
        compile_program(get_program("MAJORITY"), max_width=3)
    assert exc.value.cap == 3


def test_sugared_mask_has_no_gadget():
    op = Operation("S", Count(Strict(), Token("a")))
    with pytest.raises(UnsupportedConstruct):
        GadgetFactory.get_gadget(op)


def test_future_offset_counts_are_vacuous():
    program = parse(
        """
        program FUTURE over {a, b} {
          F(i) := count[j<=i, j==i+1] Q_a(j);
          Z(i) := F(i) = 0;
        }
        """
    )
    net, _, report = compile_program(program)
    assert dict(report.gadgets)["F"] == "count-vacuous"
    for w in _short_words(program.alphabet, budget=60):
        assert accepts_net(net, w) == accepts(program, w)


def test_current_offset_count():
    program = parse(
        """
        program HERE over {a, b} {
          H(i) := count[j<=i, j==i] Q_b(j);
          B(i) := H(i) >= 1;
        }
        """
    )
    net, _, report = compile_program(program)
    assert dict(report.gadgets)["H"] == "count-local"
    for w in _short_words(program.alphabet, budget=60):
        assert accepts_net(net, w) == accepts(program, w)


def test_coarser_precision_still_compiles_majority():
    program = get_program("MAJORITY")
    net, _, _ = compile_program(program, fp=FixedPrecision(16))
    assert net.precision.p == 16
    for w in _short_words(program.alphabet, budget=200):
        assert accepts_net(net, w) == accepts(program, w)


_nets = {}


def _net(name):
    if name not in _nets:
        _nets[name] = compile_program(get_program(name))
    return _nets[name]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "#"]), min_size=1, max_size=30))
def test_induction_net_predicts_like_interpreter(word):
    net, _, _ = _net("INDUCTION_ALL")
    assert predicted_sets_net(net, word) == predicted_sets(get_program("INDUCTION_ALL"), word)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["1", "2", "3", "4", "5", "#"]), min_size=1, max_size=20))
def test_sort_net_predicts_like_interpreter(word):
    net, _, _ = _net("SORT")
    assert predicted_sets_net(net, word) == predicted_sets(get_program("SORT"), word)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["0", "1", "#"]), min_size=1, max_size=40))
def test_interleave_net_uses_periodic_and_local_features(word):
    net, _, report = _net("BINARY_MAJORITY_INTERLEAVE")
    assert report.period == 3
    program = get_program("BINARY_MAJORITY_INTERLEAVE")
    assert predicted_sets_net(net, word) == predicted_sets(program, word)


def test_substring_ab_looks_one_row_back(compiled):
    net, _, report = compiled("SUBSTRING_AB")
    assert report.radius == 1
    tables = [head.phi.table for layer in net.layers for head in layer.heads]
    assert {d for table in tables for d, _ in table} == {1}


@pytest.mark.parametrize("name", sorted(stdlib()))
def test_positional_logits_vanish_beyond_radius(name, compiled):
    net, _, report = compiled(name)
    n = report.radius + 6
    rows, cols = np.indices((n, n))
    for layer in net.layers:
        for head in layer.heads:
            assert head.phi.radius <= report.radius
            m = head.phi.matrix(n)
            assert np.all(m[(rows - cols > report.radius) | (cols > rows)] == 0.0)


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(["AA_STAR", "ABAB_STAR", "BINARY_MAJORITY_INTERLEAVE"]),
    st.integers(0, 12),
    st.data(),
)
def test_shifting_offset_by_a_period_changes_nothing(name, offset, data):
    net, _, _ = _net(name)
    symbols = [s for s in net.alphabet if s != "$"]
    word = data.draw(st.lists(st.sampled_from(symbols), min_size=1, max_size=20))
    delta = net.encoding.period
    x = ("$", *word)
    a = forward(net, x, offset=offset)
    b = forward(net, x, offset=offset + delta)
    assert all(np.array_equal(p, q) for p, q in zip(a.layers, b.layers))
    assert np.array_equal(a.logits, b.logits)

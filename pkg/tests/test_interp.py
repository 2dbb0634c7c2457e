import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import get_program, stdlib
from interp import (
    InterpError,
    NoPredictDeclaration,
    Stepper,
    SymbolNotInAlphabet,
    accepts,
    evaluate,
    format_trace,
    generate,
    predicted_set,
    predicted_sets,
    split_word,
)


def test_majority_trace():
    trace = evaluate(get_program("MAJORITY"), "110")
    assert trace.column("C1") == (1, 2, 2)
    assert trace.column("C0") == (0, 0, 1)
    assert trace.column("M") == (True, True, True)


def test_substring_ab_trace():
    trace = evaluate(get_program("SUBSTRING_AB"), "bab")
    assert trace.column("CaPrev") == (0, 0, 1)
    assert trace.column("PaPrev") == (False, False, True)
    assert trace.column("Qab") == (False, False, True)
    assert trace.column("Cab") == (0, 0, 1)
    assert trace.column("L") == (False, False, True)


def test_single_position_counts_equal_predicate():
    trace = evaluate(get_program("MAJORITY"), "0")
    assert trace.column("C0") == (1,)
    assert trace.column("C1") == (0,)


@pytest.mark.parametrize(
    "name, word, expected",
    [
        ("MAJORITY", "110", True),
        ("MAJORITY", "100", False),
        ("MAJORITY", "", True),
        ("DYCK1", "()", True),
        ("DYCK1", ")(", False),
        ("ANBNCN", "abc", True),
        ("ANBNCN", "acb", False),
        ("SUBSTRING_AB", "bab", True),
        ("SUBSTRING_AB", "ba", False),
    ],
)
def test_accepts(name, word, expected):
    assert accepts(get_program(name), tuple(word)) is expected


def test_symbol_outside_alphabet():
    with pytest.raises(SymbolNotInAlphabet) as exc:
        evaluate(get_program("MAJORITY"), "1x0")
    assert exc.value.position == 2
    assert exc.value.symbol == "x"


def test_evaluate_needs_a_word():
    with pytest.raises(InterpError):
        evaluate(get_program("MAJORITY"), "")


def test_induction_predicted_sets():
    program = get_program("INDUCTION_ALL")
    assert predicted_set(program, tuple("aba"), 3) == frozenset("b")
    assert predicted_set(program, tuple("aba"), 1) == frozenset()


def test_argmax_predicted_set():
    program = get_program("INDUCTION_ARGMAX")
    assert predicted_set(program, tuple("ababa"), 5) == frozenset("b")


def test_predicted_set_requires_predict_family():
    with pytest.raises(NoPredictDeclaration):
        predicted_sets(get_program("MAJORITY"), "10")


def test_generate_copies_unique_symbols():
    program = get_program("INDUCTION_ALL")
    out = generate(program, tuple("#acb#"), max_steps=10, stop="#")
    assert "".join(out) == "#acb#acb#"


def test_generate_halts_on_empty_set_and_zero_steps():
    program = get_program("INDUCTION_ALL")
    assert generate(program, tuple("abc"), max_steps=5) == tuple("abc")
    assert generate(program, tuple("#ab#"), max_steps=0) == tuple("#ab#")


def test_split_word():
    assert split_word("110", ("0", "1")) == ("1", "1", "0")
    assert split_word("12 3,4", ("12", "3", "4")) == ("12", "3", "4")


def test_format_trace_has_one_row_per_operation():
    text = format_trace(evaluate(get_program("MAJORITY"), "110"))
    lines = text.splitlines()
    assert len(lines) == 4
    assert lines[3].split() == ["M", "B", "T", "T", "T"]


bits = st.lists(st.sampled_from(["0", "1"]), min_size=1, max_size=20)


@settings(max_examples=50, deadline=None)
@given(bits, st.data())
def test_causality(word, data):
    program = get_program("MAJORITY")
    t = data.draw(st.integers(1, len(word)))
    full, prefix = evaluate(program, word), evaluate(program, word[:t])
    for op in program.ops:
        assert full.column(op.name)[:t] == prefix.column(op.name)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a", "b"]), min_size=1, max_size=20))
def test_positional_values_ignore_content(word):
    program = get_program("AA_STAR")
    flipped = ["b" if s == "a" else "a" for s in word]
    positional = [op.name for op in program.ops if type(op.body).__name__ == "Positional"]
    assert positional
    for name in positional:
        assert evaluate(program, word).column(name) == evaluate(program, flipped).column(name)


@settings(max_examples=50, deadline=None)
@given(bits)
def test_top_counts_bounded_by_position(word):
    trace = evaluate(get_program("MAJORITY"), word)
    for name in ("C0", "C1"):
        assert all(0 <= c <= t for t, c in enumerate(trace.column(name), start=1))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(stdlib())), st.data())
def test_stepper_matches_evaluate(name, data):
    program = get_program(name)
    word = data.draw(st.lists(st.sampled_from(program.alphabet), min_size=1, max_size=25))
    trace = evaluate(program, word)
    stepper = Stepper(program)
    for t, symbol in enumerate(word, start=1):
        stepper.push(symbol)
        for op in program.ops:
            assert stepper.value(op.name) == trace.value(op.name, t), (name, op.name, t)


def test_stepper_rejects_foreign_symbols():
    stepper = Stepper(get_program("MAJORITY"))
    stepper.push("1")
    with pytest.raises(SymbolNotInAlphabet) as exc:
        stepper.push("2")
    assert exc.value.position == 2

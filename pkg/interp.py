"""Exact reference semantics for C-RASP programs.

Positions are 1-based over the word itself; the start-of-sequence marker only
exists on the network side. Counts are exact int64 prefix sums, Booleans are
numpy bool arrays, one entry per position.
"""

import collections
import dataclasses
import logging
import operator
from typing import Mapping, Optional, Sequence

import numpy as np

from dsl import (
    Add,
    And,
    Compare,
    Conditional,
    Count,
    Initial,
    Leq,
    LocalRelation,
    Not,
    OneConst,
    Positional,
    Program,
    Sort,
    Strict,
    Sub,
    Token,
    Top,
    TrueConst,
)

logger = logging.getLogger(__name__)


class InterpError(ValueError):
    pass


class SymbolNotInAlphabet(InterpError):
    def __init__(self, position: int, symbol: str):
        self.position = position
        self.symbol = symbol
        super().__init__(f"position {position}: symbol {symbol!r} not in alphabet")


class NoPredictDeclaration(InterpError):
    def __init__(self, program: str):
        self.program = program
        super().__init__(f"program {program} declares no predict family")


_COMPARE = {
    "<=": np.less_equal,
    ">=": np.greater_equal,
    "=": np.equal,
    "<": np.less,
    ">": np.greater,
}


_SCALAR_COMPARE = {
    "<=": operator.le,
    ">=": operator.ge,
    "=": operator.eq,
    "<": operator.lt,
    ">": operator.gt,
}


@dataclasses.dataclass(frozen=True, eq=False)
class Trace:
    program: Program
    word: tuple
    values: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.word)

    def value(self, name: str, t: int):
        v = self.values[name][t - 1]
        return bool(v) if self.values[name].dtype == bool else int(v)

    def column(self, name: str) -> tuple:
        return tuple(self.value(name, t) for t in range(1, len(self.word) + 1))


def split_word(text: str, alphabet: Sequence[str]) -> tuple:
    """Split CLI word text into symbols.

    Whitespace- or comma-separated text is split on the separators; otherwise
    every character is one symbol (fine for single-character alphabets).
    """
    if "," in text or any(ch.isspace() for ch in text):
        return tuple(s for s in text.replace(",", " ").split() if s)
    return tuple(text)


def check_word(program: Program, word: Sequence[str]) -> tuple:
    alphabet = set(program.alphabet)
    for t, symbol in enumerate(word, start=1):
        if symbol not in alphabet:
            raise SymbolNotInAlphabet(t, symbol)
    return tuple(word)


def _frozen(arr: np.ndarray) -> np.ndarray:
    if arr.flags.writeable:
        arr.setflags(write=False)
    return arr


def _count(mask, pred: np.ndarray) -> np.ndarray:
    ones = pred.astype(np.int64)
    if isinstance(mask, Top):
        return np.cumsum(ones)
    if isinstance(mask, Strict):
        return np.cumsum(ones) - ones
    n = len(ones)
    total = np.zeros(n, dtype=np.int64)
    for c in mask.offsets:
        # j = i + c; positive offsets never satisfy j <= i
        if c > 0:
            continue
        shift = -c
        if shift == 0:
            total += ones
        elif shift < n:
            total[shift:] += ones[:-shift]
    return total


def evaluate(program: Program, word: Sequence[str]) -> Trace:
    """Evaluate every operation at every position of a non-empty word."""
    word = check_word(program, word)
    n = len(word)
    if n == 0:
        raise InterpError("evaluate needs a non-empty word")
    positions = np.arange(1, n + 1)
    tokens = {
        s: _frozen(np.array([x == s for x in word], dtype=bool))
        for s in program.alphabet
    }
    values = {}

    def ref(r):
        return tokens[r.symbol] if isinstance(r, Token) else values[r]

    def operand(x):
        return np.int64(x) if isinstance(x, int) else values[x]

    for op in program.ops:
        body = op.body
        if isinstance(body, Initial):
            out = tokens[body.symbol]
        elif isinstance(body, Not):
            out = ~ref(body.arg)
        elif isinstance(body, And):
            out = ref(body.left) & ref(body.right)
        elif isinstance(body, TrueConst):
            out = np.ones(n, dtype=bool)
        elif isinstance(body, Positional):
            out = positions % body.relation.modulus == body.relation.residue
        elif isinstance(body, Leq):
            out = values[body.left] <= values[body.right]
        elif isinstance(body, Compare):
            out = _COMPARE[body.op](operand(body.left), operand(body.right))
            out = np.broadcast_to(out, (n,)).copy()
        elif isinstance(body, Count):
            out = _count(body.mask, ref(body.pred))
        elif isinstance(body, Conditional):
            out = np.where(ref(body.cond), values[body.then], values[body.orelse])
        elif isinstance(body, Add):
            out = values[body.left] + values[body.right]
        elif isinstance(body, Sub):
            out = values[body.left] - values[body.right]
        elif isinstance(body, OneConst):
            out = np.ones(n, dtype=np.int64)
        else:
            raise InterpError(f"{op.name}: cannot evaluate {body!r}")
        out = np.asarray(out, dtype=bool if op.sort is Sort.BOOLEAN else np.int64)
        values[op.name] = _frozen(out)
    return Trace(program=program, word=word, values=values)


def _key(ref):
    return ("Q", ref.symbol) if isinstance(ref, Token) else ref


class Stepper:
    """Evaluates a program one position at a time.

    Counts keep running sums and local masks keep a window of the last few
    predicate values, so each push costs O(ops) whatever the prefix length.
    Values agree with `evaluate` at every position.
    """

    def __init__(self, program: Program):
        self.program = program
        self.t = 0
        self.current = {}
        self._alphabet = frozenset(program.alphabet)
        self._sums = {}
        lags = {}
        for op in program.ops:
            body = op.body
            if isinstance(body, Count) and isinstance(body.mask, LocalRelation):
                lag = max((-c for c in body.mask.offsets if c < 0), default=0)
                if lag:
                    key = _key(body.pred)
                    lags[key] = max(lags.get(key, 0), lag)
        # last `lag` values of each predicate read through a local mask
        self._history = {key: collections.deque(maxlen=lag) for key, lag in lags.items()}
        self._steps = [(op.name, self._compile(op)) for op in program.ops]

    def _compile(self, op):
        body = op.body
        if isinstance(body, Initial):
            key = ("Q", body.symbol)
            return lambda cur: cur[key]
        if isinstance(body, Not):
            arg = _key(body.arg)
            return lambda cur: not cur[arg]
        if isinstance(body, And):
            left, right = _key(body.left), _key(body.right)
            return lambda cur: cur[left] and cur[right]
        if isinstance(body, TrueConst):
            return lambda cur: True
        if isinstance(body, Positional):
            modulus, residue = body.relation.modulus, body.relation.residue
            return lambda cur: self.t % modulus == residue
        if isinstance(body, Leq):
            left, right = body.left, body.right
            return lambda cur: cur[left] <= cur[right]
        if isinstance(body, Compare):
            compare = _SCALAR_COMPARE[body.op]
            left, right = body.left, body.right
            if isinstance(left, int) and isinstance(right, int):
                return lambda cur: compare(left, right)
            if isinstance(left, int):
                return lambda cur: compare(left, cur[right])
            if isinstance(right, int):
                return lambda cur: compare(cur[left], right)
            return lambda cur: compare(cur[left], cur[right])
        if isinstance(body, Count):
            return self._compile_count(op.name, body)
        if isinstance(body, Conditional):
            cond, then, orelse = _key(body.cond), body.then, body.orelse
            return lambda cur: cur[then] if cur[cond] else cur[orelse]
        if isinstance(body, Add):
            left, right = body.left, body.right
            return lambda cur: cur[left] + cur[right]
        if isinstance(body, Sub):
            left, right = body.left, body.right
            return lambda cur: cur[left] - cur[right]
        if isinstance(body, OneConst):
            return lambda cur: 1
        raise InterpError(f"{op.name}: cannot evaluate {body!r}")

    def _compile_count(self, name: str, body: Count):
        pred, sums = _key(body.pred), self._sums
        sums[name] = 0
        if isinstance(body.mask, Top):

            def top(cur):
                sums[name] += int(cur[pred])
                return sums[name]

            return top
        if isinstance(body.mask, Strict):

            def strict(cur):
                before = sums[name]
                sums[name] += int(cur[pred])
                return before

            return strict
        offsets = tuple(c for c in body.mask.offsets if c <= 0)
        history = self._history.get(pred, ())

        def local(cur):
            total = 0
            for c in offsets:
                if c == 0:
                    total += int(cur[pred])
                elif len(history) >= -c:
                    total += int(history[c])
            return total

        return local

    def push(self, symbol: str) -> dict:
        """Extend the word by `symbol`; returns every value at the new position."""
        if symbol not in self._alphabet:
            raise SymbolNotInAlphabet(self.t + 1, symbol)
        self.t += 1
        cur = {("Q", s): s == symbol for s in self.program.alphabet}
        for name, step in self._steps:
            cur[name] = step(cur)
        for key, history in self._history.items():
            history.append(cur[key])
        self.current = cur
        return cur

    def value(self, name: str):
        return self.current[name]

    def predicted(self) -> frozenset:
        if not self.program.predict:
            raise NoPredictDeclaration(self.program.name)
        if not self.t:
            raise InterpError("nothing pushed yet")
        return frozenset(s for s, n in self.program.predict if self.current[n])


def accepts(program: Program, word: Sequence[str]) -> bool:
    word = check_word(program, word)
    if not word:
        return program.empty_accepts
    return evaluate(program, word).value(program.accept, len(word))


def predicted_sets(program: Program, word: Sequence[str]) -> list:
    """Predicted-symbol set at every position 1..|word|."""
    if not program.predict:
        raise NoPredictDeclaration(program.name)
    trace = evaluate(program, word)
    targets = [(s, trace.values[n]) for s, n in program.predict]
    return [
        frozenset(s for s, column in targets if column[t]) for t in range(len(word))
    ]


def predicted_set(program: Program, word: Sequence[str], t: int) -> frozenset:
    if not program.predict:
        raise NoPredictDeclaration(program.name)
    if not 1 <= t <= len(word):
        raise InterpError(f"position {t} outside 1..{len(word)}")
    return predicted_sets(program, word[:t])[t - 1]


def generate(
    program: Program,
    prefix: Sequence[str],
    max_steps: int,
    stop: Optional[str] = None,
) -> tuple:
    """Greedy generation: append the first predicted symbol in alphabet order."""
    if not program.predict:
        raise NoPredictDeclaration(program.name)
    seq = list(prefix)
    if not seq:
        raise InterpError("generation needs a non-empty prefix")
    rank = {s: k for k, s in enumerate(program.alphabet)}
    stepper = Stepper(program)
    for symbol in seq:
        stepper.push(symbol)
    for _ in range(max_steps):
        options = stepper.predicted()
        if not options:
            break
        nxt = min(options, key=rank.__getitem__)
        seq.append(nxt)
        stepper.push(nxt)
        if stop is not None and nxt == stop:
            break
    logger.debug(f"generated {len(seq) - len(prefix)} symbols with {program.name}")
    return tuple(seq)


def format_trace(trace: Trace) -> str:
    """Operation x position table for debugging."""
    header = ["op", "sort", *trace.word]
    table = [header]
    for op in trace.program.ops:
        cells = []
        for v in trace.column(op.name):
            cells.append(("T" if v else "F") if isinstance(v, bool) else str(v))
        table.append([op.name, op.sort.value[0], *cells])
    widths = [max(len(row[k]) for row in table) for k in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in table]
    return "\n".join(line.rstrip() for line in lines) + "\n"

"""Generators for the algorithmic length-generalisation tasks.

Every instance is SOS <input> SEP <answer> EOS (addition uses + and =
instead of SEP); the model is supervised on <answer> EOS. LEN is the
length of <input> as each task defines it.
"""

import dataclasses
import logging
import string
from typing import Optional

import numpy as np

from oracles import CorpusError

logger = logging.getLogger(__name__)

SOS_TOKEN = "SOS"
SEP_TOKEN = "SEP"
EOS_TOKEN = "EOS"
PROGRAM_SEP = "#"


class UnknownTask(CorpusError):
    def __init__(self, task: str):
        self.task = task
        super().__init__(f"unknown task {task!r}")


class LenBelowMinimum(CorpusError):
    def __init__(self, task: str, length: int, minimum: int):
        self.task = task
        self.length = length
        self.minimum = minimum
        super().__init__(f"{task}: LEN {length} is below the minimum {minimum}")


class InvalidLength(CorpusError):
    def __init__(self, task: str, length: int, reason: str):
        self.task = task
        self.length = length
        super().__init__(f"{task}: LEN {length} {reason}")


@dataclasses.dataclass(frozen=True)
class TaskInstance:
    task: str
    length: int
    tokens: tuple
    supervised_from: int

    @property
    def prompt(self) -> tuple:
        return self.tokens[: self.supervised_from]

    @property
    def target(self) -> tuple:
        return self.tokens[self.supervised_from :]

    def to_lines(self) -> str:
        return "\n".join(self.tokens) + "\n"

    def program_word(self) -> tuple:
        """Tokens without SOS/EOS, SEP written as the program separator."""
        body = self.tokens[1:-1] if self.tokens[-1] == EOS_TOKEN else self.tokens[1:]
        return tuple(PROGRAM_SEP if tok == SEP_TOKEN else tok for tok in body)


def _framed(task: str, length: int, inputs, answer) -> TaskInstance:
    tokens = (SOS_TOKEN, *inputs, SEP_TOKEN, *answer, EOS_TOKEN)
    return TaskInstance(task, length, tokens, supervised_from=len(inputs) + 2)


def _bits_without_tie(length: int, rng: np.random.Generator) -> list:
    while True:
        bits = rng.integers(0, 2, size=length).tolist()
        if 2 * sum(bits) != length:
            return [str(b) for b in bits]


def _binary_majority(length, rng, vocab_size):
    bits = _bits_without_tie(length, rng)
    label = "1" if bits.count("1") > bits.count("0") else "0"
    return _framed("binary_majority", length, bits, [label])


def _binary_majority_interleave(length, rng, vocab_size):
    if length % 3:
        raise InvalidLength("binary_majority_interleave", length, "is not a multiple of 3")
    n = length // 3
    streams = [_bits_without_tie(n, rng) for _ in range(3)]
    inputs = [streams[s][k] for k in range(n) for s in range(3)]
    labels = ["1" if st.count("1") > st.count("0") else "0" for st in streams]
    return _framed("binary_majority_interleave", length, inputs, labels)


def _majority(length, rng, vocab_size):
    alphabet = list(string.ascii_lowercase[: vocab_size or 26])
    while True:
        picks = rng.integers(0, len(alphabet), size=length)
        counts = np.bincount(picks, minlength=len(alphabet))
        if np.sum(counts == counts.max()) == 1:
            break
    inputs = [alphabet[k] for k in picks]
    return _framed("majority", length, inputs, [alphabet[int(np.argmax(counts))]])


def _unique_numbers(task, length, rng, vocab_size):
    vocab = vocab_size or 150
    if length > vocab:
        raise InvalidLength(task, length, f"exceeds the vocabulary of {vocab} numbers")
    return [int(v) for v in rng.choice(np.arange(1, vocab + 1), size=length, replace=False)]


def _sort(length, rng, vocab_size):
    numbers = _unique_numbers("sort", length, rng, vocab_size)
    return _framed("sort", length, [str(v) for v in numbers], [str(v) for v in sorted(numbers)])


def _copy_unique(length, rng, vocab_size):
    numbers = [str(v) for v in _unique_numbers("copy_unique", length, rng, vocab_size)]
    return _framed("copy_unique", length, numbers, numbers)


def _copy_repeat(length, rng, vocab_size):
    alphabet = list(string.ascii_lowercase[: vocab_size or 2])
    symbols = [alphabet[k] for k in rng.integers(0, len(alphabet), size=length)]
    return _framed("copy_repeat", length, symbols, symbols)


def _parity(length, rng, vocab_size):
    ones = int(rng.integers(0, length + 1))
    bits = np.zeros(length, dtype=int)
    if ones:
        bits[rng.choice(length, size=ones, replace=False)] = 1
    label = "e" if ones % 2 == 0 else "o"
    return _framed("parity", length, [str(b) for b in bits], [label])


def _operand(n: int, rng: np.random.Generator) -> str:
    """n uniform bits; leading zeros are kept."""
    return "".join(str(b) for b in rng.integers(0, 2, size=n))


def _addition(length, rng, vocab_size):
    # LEN counts both operands plus "+" and "="
    first = int(rng.integers(1, length - 2))
    second = length - 2 - first
    a, b = _operand(first, rng), _operand(second, rng)
    total = format(int(a, 2) + int(b, 2), "b")
    tokens = (SOS_TOKEN, *a, "+", *b, "=", *total, EOS_TOKEN)
    return TaskInstance("addition", length, tokens, supervised_from=length + 1)


TASK_GENERATORS = {
    "binary_majority": (1, _binary_majority),
    "binary_majority_interleave": (3, _binary_majority_interleave),
    "majority": (1, _majority),
    "sort": (1, _sort),
    "copy_unique": (1, _copy_unique),
    "copy_repeat": (1, _copy_repeat),
    "parity": (0, _parity),
    "addition": (4, _addition),
}


def min_length(task: str) -> int:
    if task not in TASK_GENERATORS:
        raise UnknownTask(task)
    return TASK_GENERATORS[task][0]


def gen_task(task: str, length: int, seed: int, vocab_size: Optional[int] = None) -> TaskInstance:
    """Deterministic instance of `task` with input length `length`."""
    minimum = min_length(task)
    if length < minimum:
        raise LenBelowMinimum(task, length, minimum)
    rng = np.random.default_rng(seed)
    instance = TASK_GENERATORS[task][1](length, rng, vocab_size)
    logger.debug(f"generated {task} instance of LEN {length} with seed {seed}")
    return instance

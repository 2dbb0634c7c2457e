"""The standard library of C-RASP programs and the expressiveness manifest.

Hand-written programs live in programs/*.crasp. Families that are tedious
to write out (depth-bounded Dyck, induction heads, the task predictors) are
built here with make_program.
"""

import dataclasses
import functools
import itertools
import logging
from pathlib import Path
from typing import Optional

from dsl import (
    Add,
    And,
    Compare,
    Conditional,
    Count,
    LocalRelation,
    Not,
    OneConst,
    Operation,
    Positional,
    PeriodicRelation,
    Program,
    Sub,
    Token,
    Top,
    make_program,
    parse,
)
from oracles import CorpusError, oracle, oracle_ids

logger = logging.getLogger(__name__)

PROGRAM_DIR = Path(__file__).resolve().parent / "programs"
SEP = "#"


class UnknownProgram(CorpusError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown program {name!r}")


def load_program(path) -> Program:
    return parse(Path(path).read_text(encoding="utf-8"))


# -------------------- Builders --------------------
class _Ops:
    """Accumulates operations; helpers return the name they defined."""

    def __init__(self):
        self.ops = []

    def add(self, name: str, body) -> str:
        self.ops.append(Operation(name, body))
        return name

    def any_of(self, name: str, refs: list) -> str:
        """Disjunction through not/and."""
        acc = refs[0]
        for k, ref in enumerate(refs[1:], start=1):
            left = self.add(f"{name}_nl{k}", Not(acc))
            right = self.add(f"{name}_nr{k}", Not(ref))
            both = self.add(f"{name}_nb{k}", And(left, right))
            acc = self.add(f"{name}_or{k}" if k < len(refs) - 1 else name, Not(both))
        if len(refs) == 1:
            acc = self.add(name, And(refs[0], refs[0]))
        return acc

    def all_of(self, name: str, refs: list) -> str:
        if len(refs) == 1:
            return self.add(name, And(refs[0], refs[0]))
        acc = refs[0]
        for k, ref in enumerate(refs[1:], start=1):
            acc = self.add(f"{name}_and{k}" if k < len(refs) - 1 else name, And(acc, ref))
        return acc


def dyck_depth(n: int) -> Program:
    """D_n = (a D_{n-1} b)*: the height never leaves [0, n] and ends at 0."""
    b = _Ops()
    b.add("Ca", Count(Top(), Token("a")))
    b.add("Cb", Count(Top(), Token("b")))
    b.add("H", Sub("Ca", "Cb"))
    b.add("Low", Compare("<", "H", 0))
    b.add("High", Compare(">", "H", n))
    b.add("CLow", Count(Top(), "Low"))
    b.add("CHigh", Count(Top(), "High"))
    b.add("Bad", Add("CLow", "CHigh"))
    b.add("Ok", Compare("=", "Bad", 0))
    b.add("Zero", Compare("=", "H", 0))
    b.add("L", And("Ok", "Zero"))
    return make_program(f"D{n}", ("a", "b"), b.ops, empty_accepts=True)


def _predecessors(b: _Ops, alphabet) -> None:
    for k, symbol in enumerate(alphabet):
        b.add(f"CP_{k}", Count(LocalRelation((-1,)), Token(symbol)))
        b.add(f"PRED_{k}", Compare(">=", f"CP_{k}", 1))


def _bigram_counts(b: _Ops, alphabet) -> None:
    for (x, _), (y, sy) in itertools.product(enumerate(alphabet), enumerate(alphabet)):
        b.add(f"QB_{x}_{y}", And(Token(sy), f"PRED_{x}"))
        b.add(f"CB_{x}_{y}", Count(Top(), f"QB_{x}_{y}"))


def induction_all(alphabet=("a", "b", "c", SEP)) -> Program:
    """NEXT_s holds when the current symbol was followed by s earlier on."""
    alphabet = tuple(alphabet)
    b = _Ops()
    _predecessors(b, alphabet)
    _bigram_counts(b, alphabet)
    for x, y in itertools.product(range(len(alphabet)), repeat=2):
        b.add(f"EX_{x}_{y}", Compare(">=", f"CB_{x}_{y}", 1))
    predict = []
    for y, symbol in enumerate(alphabet):
        terms = [
            b.add(f"T_{x}_{y}", And(Token(sx), f"EX_{x}_{y}"))
            for x, sx in enumerate(alphabet)
        ]
        predict.append((symbol, b.any_of(f"NEXT_{y}", terms)))
    return make_program("INDUCTION_ALL", alphabet, b.ops, predict=predict)


def induction_argmax(alphabet=("a", "b", "c")) -> Program:
    """NEXT_s holds when s is a most frequent successor of the current symbol."""
    alphabet = tuple(alphabet)
    b = _Ops()
    _predecessors(b, alphabet)
    _bigram_counts(b, alphabet)
    predict = []
    for y, symbol in enumerate(alphabet):
        terms = []
        for x, sx in enumerate(alphabet):
            checks = [b.add(f"SEEN_{x}_{y}", Compare(">=", f"CB_{x}_{y}", 1))]
            for z in range(len(alphabet)):
                if z != y:
                    checks.append(
                        b.add(f"MORE_{x}_{y}_{z}", Compare(">=", f"CB_{x}_{y}", f"CB_{x}_{z}"))
                    )
            best = b.all_of(f"BEST_{x}_{y}", checks)
            terms.append(b.add(f"T_{x}_{y}", And(Token(sx), best)))
        predict.append((symbol, b.any_of(f"NEXT_{y}", terms)))
    return make_program("INDUCTION_ARGMAX", alphabet, b.ops, predict=predict)


def binary_majority() -> Program:
    """At the separator, predict the more frequent bit."""
    b = _Ops()
    b.add("C0", Count(Top(), Token("0")))
    b.add("C1", Count(Top(), Token("1")))
    b.add("More1", Compare(">", "C1", "C0"))
    b.add("More0", Compare(">", "C0", "C1"))
    b.add("NEXT_0", And(Token(SEP), "More0"))
    b.add("NEXT_1", And(Token(SEP), "More1"))
    return make_program(
        "BINARY_MAJORITY", ("0", "1", SEP), b.ops, predict=[("0", "NEXT_0"), ("1", "NEXT_1")]
    )


def majority_task(symbols=("a", "b", "c")) -> Program:
    """At the separator, predict the unique most frequent symbol."""
    symbols = tuple(symbols)
    b = _Ops()
    for k, s in enumerate(symbols):
        b.add(f"C_{k}", Count(Top(), Token(s)))
    predict = []
    for k, s in enumerate(symbols):
        wins = [
            b.add(f"BEATS_{k}_{m}", Compare(">", f"C_{k}", f"C_{m}"))
            for m in range(len(symbols))
            if m != k
        ]
        top = b.all_of(f"TOP_{k}", wins)
        predict.append((s, b.add(f"NEXT_{k}", And(Token(SEP), top))))
    return make_program("MAJORITY_TASK", (*symbols, SEP), b.ops, predict=predict)


def sort_program(k: int = 5) -> Program:
    """Predict the smallest present number above the current symbol.

    Numbers are "1".."k"; the separator ranks below every number.
    """
    numbers = tuple(str(v) for v in range(1, k + 1))
    b = _Ops()
    b.add("One", OneConst())
    b.add("Zero", Sub("One", "One"))
    for v, s in enumerate(numbers):
        b.add(f"C_{v}", Count(Top(), Token(s)))
        b.add(f"HAS_{v}", Compare(">=", f"C_{v}", 1))
        b.add(f"IND_{v}", Conditional(f"HAS_{v}", "One", "Zero"))
    # RANK_v: present numbers below v; LE_v: present numbers up to v
    rank = "Zero"
    for v in range(len(numbers)):
        b.add(f"RANK_{v}", Add(rank, "Zero"))
        rank = b.add(f"LE_{v}", Add(f"RANK_{v}", f"IND_{v}"))
    current = "Zero"
    for v, s in enumerate(numbers):
        current = b.add(f"CUR_{v}", Conditional(Token(s), f"LE_{v}", current))
    predict = []
    for v, s in enumerate(numbers):
        b.add(f"AT_{v}", Compare("=", f"CUR_{len(numbers) - 1}", f"RANK_{v}"))
        predict.append((s, b.add(f"NEXT_{v}", And(f"HAS_{v}", f"AT_{v}"))))
    return make_program("SORT", (*numbers, SEP), b.ops, predict=predict)


def binary_majority_interleave(streams: int = 3) -> Program:
    """Three interleaved bit streams; after the separator predict each majority.

    Stream s (1-based) holds positions t with t = s mod 3 before the first
    separator; the label of stream s is due s - 1 positions after it.
    """
    b = _Ops()
    b.add("CSep", Count(Top(), Token(SEP)))
    b.add("Before", Compare("=", "CSep", 0))
    for s in range(1, streams + 1):
        b.add(f"IN_{s}", Positional(PeriodicRelation(streams, s % streams)))
        b.add(f"LIVE_{s}", And(f"IN_{s}", "Before"))
        for bit in ("0", "1"):
            b.add(f"Q{bit}_{s}", And(Token(bit), f"LIVE_{s}"))
            b.add(f"C{bit}_{s}", Count(Top(), f"Q{bit}_{s}"))
        b.add(f"MORE1_{s}", Compare(">", f"C1_{s}", f"C0_{s}"))
        b.add(f"MORE0_{s}", Compare(">", f"C0_{s}", f"C1_{s}"))
        if s == 1:
            b.add("DUE_1", And(Token(SEP), Token(SEP)))
        else:
            b.add(f"BACK_{s}", Count(LocalRelation((1 - s,)), Token(SEP)))
            b.add(f"DUE_{s}", Compare(">=", f"BACK_{s}", 1))
    predict = []
    for bit in ("0", "1"):
        terms = [
            b.add(f"SAY{bit}_{s}", And(f"DUE_{s}", f"MORE{bit}_{s}"))
            for s in range(1, streams + 1)
        ]
        predict.append((bit, b.any_of(f"NEXT_{bit}", terms)))
    return make_program(
        "BINARY_MAJORITY_INTERLEAVE", ("0", "1", SEP), b.ops, predict=predict
    )


_BUILDERS = {
    "D2": lambda: dyck_depth(2),
    "D3": lambda: dyck_depth(3),
    "D4": lambda: dyck_depth(4),
    "D12": lambda: dyck_depth(12),
    "INDUCTION_ALL": induction_all,
    "INDUCTION_ARGMAX": induction_argmax,
    "BINARY_MAJORITY": binary_majority,
    "MAJORITY_TASK": majority_task,
    "SORT": sort_program,
    "BINARY_MAJORITY_INTERLEAVE": binary_majority_interleave,
}


@functools.cache
def _stdlib() -> dict:
    programs = {}
    for path in sorted(PROGRAM_DIR.glob("*.crasp")):
        program = load_program(path)
        programs[program.name] = program
    for name, build in _BUILDERS.items():
        programs[name] = build()
    logger.debug(f"loaded {len(programs)} stdlib programs")
    return programs


def stdlib() -> dict:
    return dict(_stdlib())


def get_program(name: str) -> Program:
    try:
        return _stdlib()[name]
    except KeyError:
        raise UnknownProgram(name) from None


# -------------------- Manifest --------------------
# program -> language it recognises
LANGUAGE_OF = {
    "MAJORITY": "majority",
    "DYCK1": "dyck1",
    "ANBNCN": "anbncn",
    "EXISTS_B": "exists_b",
    "PIECEWISE_ABC": "piecewise_abc",
    "SUBSTRING_AB": "substring_ab",
    "AA_STAR": "aa_star",
    "AAAA_STAR": "aaaa_star",
    "ABAB_STAR": "abab_star",
    "TOMITA1": "tomita1",
    "TOMITA2": "tomita2",
    "TOMITA4": "tomita4",
    "TOMITA7": "tomita7",
    "D2": "d2",
    "D3": "d3",
    "D4": "d4",
    "D12": "d12",
    "ABCDE": "abcde",
    "ABD_BC": "abd_bc",
}

# task -> (program, tier-[] flag, tier-[periodic, local] flag); None = no claim
TASKS = {
    "binary_majority": ("BINARY_MAJORITY", True, True),
    "binary_majority_interleave": ("BINARY_MAJORITY_INTERLEAVE", None, True),
    "majority": ("MAJORITY_TASK", True, True),
    "sort": ("SORT", True, True),
    "copy_unique": ("INDUCTION_ALL", False, True),
    "copy_repeat": (None, False, False),
    "parity": (None, False, False),
    "addition": (None, False, False),
}


@dataclasses.dataclass(frozen=True)
class ManifestRow:
    kind: str
    id: str
    description: str
    program: Optional[str]
    empty_tier: Optional[bool]
    local_tier: Optional[bool]
    note: str = ""


def manifest() -> list:
    programs = {lang: name for name, lang in LANGUAGE_OF.items()}
    rows = []
    for language_id in oracle_ids():
        o = oracle(language_id)
        rows.append(
            ManifestRow(
                kind="language",
                id=language_id,
                description=o.description,
                program=programs.get(language_id),
                empty_tier=o.empty_tier,
                local_tier=o.local_tier,
                note=o.note,
            )
        )
    for task_id, (program, empty_tier, local_tier) in TASKS.items():
        rows.append(
            ManifestRow(
                kind="task",
                id=task_id,
                description=task_id.replace("_", " "),
                program=program,
                empty_tier=empty_tier,
                local_tier=local_tier,
            )
        )
    return rows


def _flag(value: Optional[bool]) -> str:
    return {True: "yes", False: "no", None: "-"}[value]


def format_manifest(rows) -> str:
    header = ("kind", "id", "program", "[]", "[pl]", "description")
    table = [header] + [
        (r.kind, r.id, r.program or "-", _flag(r.empty_tier), _flag(r.local_tier), r.description)
        for r in rows
    ]
    widths = [max(len(row[k]) for row in table) for k in range(len(header) - 1)]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row[:-1], widths)) + "  " + row[-1]
        for row in table
    ]
    return "\n".join(lines) + "\n"

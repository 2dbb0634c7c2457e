"""Equivalence checks between the interpreter and compiled nets.

check_equivalence compares acceptance (and predicted sets, for predict
programs) on every word up to a length bound plus sampled long words;
bin_report scores a compiled net against a language or next-symbol oracle
over the length bins [lmin, 50], [51, 100], [101, 150].
"""

import abc
import dataclasses
import itertools
import logging
import os
import time
from typing import List, Optional

import numpy as np

import metrics
from compiler import check_channels, compile_program
from corpus import LANGUAGE_OF, get_program, manifest
from dsl import Program
from oracles import bigram_argmax, bigram_support, legal_next, oracle
from runtime import (
    HEAVISIDE,
    RELU,
    Layer,
    LimitTransformer,
    MLPBlock,
    accepts_net,
    predicted_sets_net,
)
from worker import compare_words

logger = logging.getLogger(__name__)

EXHAUSTIVE_CAP = int(os.getenv("CRASP_EXHAUSTIVE_CAP", "200000"))
BINS = ((1, 50), (51, 100), (101, 150))
MAX_WITNESSES = 10

# next-symbol oracles: word -> per-position symbol sets
NEXT_SYMBOL_ORACLES = {
    "bigram_support": bigram_support,
    "bigram_argmax": bigram_argmax,
}


class HarnessError(ValueError):
    pass


class CapExceeded(HarnessError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"exhaustive check needs {count} strings, cap is {cap}")


def word_text(word) -> str:
    word = tuple(word)
    if all(len(s) == 1 for s in word):
        return "".join(word)
    return " ".join(word)


def word_rng(seed: int, length: int, stream: int) -> np.random.Generator:
    """Independent generator per (seed, length, stream); order-free replay."""
    return np.random.default_rng([seed, length, stream])


# -------------------- Strategy Pattern (sampling) --------------------
class SampleStrategy(abc.ABC):
    stream = 0

    @abc.abstractmethod
    def draw(self, program: Program, length: int, count: int, seed: int) -> list:
        pass


class UniformSampler(SampleStrategy):
    """i.i.d. uniform symbols from the program's alphabet."""

    stream = 0

    def draw(self, program, length, count, seed):
        rng = word_rng(seed, length, self.stream)
        alphabet = program.alphabet
        picks = rng.integers(0, len(alphabet), size=(count, length))
        return [tuple(alphabet[k] for k in row) for row in picks]


class PositiveSampler(SampleStrategy):
    """Uniform members of the program's language; empty when it has none."""

    stream = 1

    def draw(self, program, length, count, seed):
        language = LANGUAGE_OF.get(program.name)
        if language is None or count <= 0:
            return []
        o = oracle(language)
        rng = word_rng(seed, length, self.stream)
        words = []
        for _ in range(count):
            w = o.sample_member(length, rng)
            if w is None:
                break
            words.append(w)
        return words


class SamplerFactory:
    @staticmethod
    def get_sampler(kind: str = "uniform") -> SampleStrategy:
        if kind == "uniform":
            return UniformSampler()
        if kind == "positive":
            return PositiveSampler()
        raise HarnessError(f"Unknown sampler type: {kind}")


# -------------------- Observer Pattern (mismatches) --------------------
class MismatchObserver(abc.ABC):
    @abc.abstractmethod
    def update(self, program: str, witness: dict):
        pass


class LogMismatchObserver(MismatchObserver):
    def update(self, program: str, witness: dict):
        logger.warning(
            f"❌ {program}: interpreter says {witness['interp']}, net says "
            f"{witness['net']} on {witness['word']!r} ({witness['source']})"
        )


class MismatchSubject:
    def __init__(self):
        self._observers: List[MismatchObserver] = []

    def attach(self, observer: MismatchObserver):
        self._observers.append(observer)

    def detach(self, observer: MismatchObserver):
        self._observers.remove(observer)

    def notify(self, program: str, witness: dict):
        for observer in self._observers:
            observer.update(program, witness)


mismatch_alerts = MismatchSubject()
mismatch_alerts.attach(LogMismatchObserver())


# -------------------- Reports --------------------
@dataclasses.dataclass
class EquivalenceReport:
    program: str
    exhaustive_len: int
    exhaustive_count: int
    sampled: dict
    mismatches: int
    witnesses: list
    max_bool_error: float
    max_count_error: float
    bins: dict
    predict_mismatches: int
    seed: int
    runtime_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.mismatches == 0 and self.predict_mismatches == 0

    @property
    def checked(self) -> int:
        return self.exhaustive_count + sum(self.sampled.values())

    def as_dict(self, include_runtime: bool = False) -> dict:
        out = dataclasses.asdict(self)
        out["sampled"] = {str(k): v for k, v in self.sampled.items()}
        if not include_runtime:
            del out["runtime_s"]
        return out


def all_words(alphabet, max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


def exhaustive_count(alphabet_size: int, max_len: int) -> int:
    return sum(alphabet_size**n for n in range(max_len + 1))


def default_exhaustive_len(program: Program, cap: int = EXHAUSTIVE_CAP) -> int:
    """Largest N (at most 12 for two symbols, 10 otherwise) within the cap."""
    size = len(program.alphabet)
    ceiling = 12 if size <= 2 else 10
    n = 0
    while n < ceiling and exhaustive_count(size, n + 1) <= cap:
        n += 1
    return n


def _bin_of(length: int, bins) -> Optional[str]:
    for lo, hi in bins:
        if lo <= length <= hi:
            return f"{lo}-{hi}"
    return None


def check_equivalence(
    program: Program,
    exhaustive_len: Optional[int] = None,
    lengths=(),
    count: int = 0,
    seed: int = 0,
    positives: Optional[int] = None,
    channel_samples: int = 20,
    workers: Optional[int] = None,
    net: Optional[LimitTransformer] = None,
    plan=None,
    cap: int = EXHAUSTIVE_CAP,
    alerts: MismatchSubject = mismatch_alerts,
) -> EquivalenceReport:
    """Compare interpreter and compiled net on exhaustive and sampled words."""
    started = time.perf_counter()
    if exhaustive_len is None:
        exhaustive_len = default_exhaustive_len(program, cap)
    total = exhaustive_count(len(program.alphabet), exhaustive_len)
    if total > cap:
        raise CapExceeded(total, cap)
    if net is None:
        net, plan, _ = compile_program(program)
    elif plan is None:
        _, plan, _ = compile_program(program)
    positives = count // 5 if positives is None else positives

    words = list(all_words(program.alphabet, exhaustive_len))
    sources = ["exhaustive"] * len(words)
    sampled = {}
    for length in sorted(set(lengths)):
        drawn = SamplerFactory.get_sampler("uniform").draw(program, length, count, seed)
        drawn += SamplerFactory.get_sampler("positive").draw(program, length, positives, seed)
        sampled[length] = len(drawn)
        words += drawn
        sources += [f"sampled@{length}"] * len(drawn)

    logger.info(f"🔍 {program.name}: checking {len(words)} strings")
    results = compare_words(program, net, words, workers=workers)

    mismatches = predict_mismatches = 0
    witnesses = []
    per_bin = {}
    for result, source in zip(results, sources):
        if result.interp_accepts != result.net_accepts:
            mismatches += 1
        if not result.sets_agree:
            predict_mismatches += 1
        if source != "exhaustive":
            label = _bin_of(len(result.word), BINS)
            if label is not None:
                hits, seen = per_bin.get(label, (0, 0))
                per_bin[label] = (hits + result.agrees, seen + 1)
        if not result.agrees:
            witness = {
                "word": word_text(result.word),
                "source": source,
                "interp": result.interp_accepts,
                "net": result.net_accepts,
                "sets_agree": result.sets_agree,
            }
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append(witness)
            alerts.notify(program.name, witness)

    # channel check on a deterministic subsample of non-empty words
    candidates = [w for w in words if w]
    bool_error = count_error = 0.0
    if candidates and channel_samples > 0:
        rng = word_rng(seed, 0, 2)
        picks = rng.choice(len(candidates), size=min(channel_samples, len(candidates)), replace=False)
        for k in sorted(int(p) for p in picks):
            check = check_channels(program, net, plan, candidates[k])
            bool_error = max(bool_error, check.bool_error)
            count_error = max(count_error, check.count_error)

    bins = {}
    for lo, hi in BINS:
        label = f"{lo}-{hi}"
        hits, seen = per_bin.get(label, (0, 0))
        bins[label] = hits / seen if seen else None

    elapsed = time.perf_counter() - started
    report = EquivalenceReport(
        program=program.name,
        exhaustive_len=exhaustive_len,
        exhaustive_count=total,
        sampled=sampled,
        mismatches=mismatches,
        witnesses=witnesses,
        max_bool_error=bool_error,
        max_count_error=count_error,
        bins=bins,
        predict_mismatches=predict_mismatches,
        seed=seed,
        runtime_s=elapsed,
    )
    metrics.record_run(program.name, report.checked, mismatches + predict_mismatches, elapsed)
    if report.ok:
        logger.info(f"✅ {program.name}: {report.checked} strings agree")
    else:
        logger.error(
            f"❌ {program.name}: {mismatches} acceptance and "
            f"{predict_mismatches} predicted-set mismatches"
        )
    return report


# -------------------- Bin reports --------------------
@dataclasses.dataclass(frozen=True)
class BinScore:
    low: int
    high: int
    samples: int
    accuracy: Optional[float]


@dataclasses.dataclass(frozen=True)
class BinReport:
    program: str
    oracle: str
    per_step: bool
    scores: tuple

    def as_dict(self) -> dict:
        return {
            "program": self.program,
            "oracle": self.oracle,
            "per_step": self.per_step,
            "bins": {f"{s.low}-{s.high}": s.accuracy for s in self.scores},
        }


def _bin_words(program, lo, hi, count, seed, positive_share):
    if hi < lo or count <= 0:
        return []
    rng = word_rng(seed, lo, 3)
    lengths = rng.integers(lo, hi + 1, size=count)
    words = []
    positives = int(count * positive_share)
    uniform, positive = UniformSampler(), PositiveSampler()
    for k, n in enumerate(lengths):
        n = int(n)
        drawn = positive.draw(program, n, 1, seed + k) if k < positives else []
        words.extend(drawn or uniform.draw(program, n, 1, seed + k))
    return words


def bin_report(
    program: Program,
    oracle_id: str,
    count: int = 100,
    seed: int = 0,
    lmin: int = 1,
    net: Optional[LimitTransformer] = None,
    bins=BINS,
    positive_share: float = 0.5,
) -> BinReport:
    """Per-bin accuracy of the compiled net against an oracle.

    For predict programs a word counts as correct only when the predicted set
    is right at every position.
    """
    next_symbols = NEXT_SYMBOL_ORACLES.get(oracle_id)
    language = None if next_symbols else oracle(oracle_id)
    if net is None:
        net, _, _ = compile_program(program)
    per_step = bool(program.predict)

    scores = []
    for lo, hi in bins:
        lo = max(lo, lmin)
        words = _bin_words(program, lo, hi, count, seed, positive_share)
        correct = 0
        for w in words:
            if per_step:
                got = predicted_sets_net(net, w)
                if next_symbols is not None:
                    expected = next_symbols(w)
                else:
                    expected = [legal_next(language, w[:t]) for t in range(1, len(w) + 1)]
                correct += got == list(expected)
            else:
                correct += accepts_net(net, w) == language.accepts(w)
        accuracy = correct / len(words) if words else None
        scores.append(BinScore(lo, hi, len(words), accuracy))
    logger.info(
        f"📊 {program.name} vs {oracle_id}: "
        + ", ".join(f"[{s.low},{s.high}]={s.accuracy}" for s in scores)
    )
    return BinReport(program.name, oracle_id, per_step, tuple(scores))


# -------------------- Expressiveness audit --------------------
@dataclasses.dataclass(frozen=True)
class AuditRow:
    kind: str
    id: str
    program: Optional[str]
    passed: bool
    reason: str


def _audit_row(row) -> AuditRow:
    def verdict(passed, reason):
        return AuditRow(row.kind, row.id, row.program, passed, reason)

    if row.local_tier is False and row.program is not None:
        return verdict(False, "program present for a language outside the tier")
    if row.local_tier is True and row.program is None:
        return verdict(False, "no program for a language inside the tier")
    if row.program is None:
        return verdict(True, "no program, as expected")
    try:
        program = get_program(row.program)
    except ValueError as e:
        return verdict(False, str(e))
    positional = program.uses_positional
    if row.empty_tier is True and positional:
        return verdict(False, "tier-[] claim but the program uses positional constructs")
    if row.empty_tier is False and row.local_tier is True and not positional:
        return verdict(False, "needs positional constructs but the program uses none")
    return verdict(True, "positional" if positional else "no positional constructs")


def audit_expressiveness(rows=None) -> list:
    rows = manifest() if rows is None else rows
    audit = [_audit_row(row) for row in rows]
    failed = [r.id for r in audit if not r.passed]
    if failed:
        logger.warning(f"⚠️ expressiveness audit failed for {', '.join(failed)}")
    else:
        logger.info(f"✅ expressiveness audit: {len(audit)} rows pass")
    return audit


def format_audit(rows) -> str:
    table = [("kind", "id", "program", "result", "reason")] + [
        (r.kind, r.id, r.program or "-", "pass" if r.passed else "FAIL", r.reason)
        for r in rows
    ]
    widths = [max(len(row[k]) for row in table) for k in range(4)]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row[:4], widths)) + "  " + row[4]
        for row in table
    ]
    return "\n".join(lines) + "\n"


# -------------------- Negative control --------------------
def corrupt_heaviside(net: LimitTransformer) -> LimitTransformer:
    """Copy of `net` with one constant Heaviside unit switched to ReLU.

    A constant unit computes hs(0) = 1 and relu(0) = 0, so the switch moves a
    Boolean channel by 1/2 and the net starts rejecting accepted words.
    """
    for l in range(net.depth - 1, -1, -1):
        mlp = net.layers[l].mlp
        for k, tag in enumerate(mlp.activations):
            if tag == HEAVISIDE and not np.any(mlp.A[k]) and mlp.b[k] == 0.0 and np.any(mlp.B[:, k]):
                activations = mlp.activations[:k] + RELU + mlp.activations[k + 1 :]
                layers = list(net.layers)
                layers[l] = Layer(
                    heads=net.layers[l].heads,
                    mlp=MLPBlock(mlp.A, mlp.B, mlp.b, activations),
                )
                logger.info(f"🧪 switched layer {l} unit {k} from Heaviside to ReLU")
                return dataclasses.replace(net, layers=tuple(layers))
    raise HarnessError("net has no constant Heaviside unit to corrupt")

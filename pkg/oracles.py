"""Ground-truth recognisers for the benchmark languages.

Regular languages are total DFAs; counter languages (MAJORITY, DYCK-1,
a^n b^n c^n) use closed-form predicates. Every oracle can answer membership,
compute the set of legal next symbols, and draw members of a given length.
"""

import dataclasses
import functools
import logging
from typing import Callable, Mapping, Optional

import numpy as np

logger = logging.getLogger(__name__)

DEAD = "dead"


class CorpusError(ValueError):
    pass


class UnknownLanguage(CorpusError):
    def __init__(self, language_id: str):
        self.language_id = language_id
        super().__init__(f"unknown language {language_id!r}")


# -------------------- DFA --------------------
@dataclasses.dataclass(frozen=True, eq=False)
class DFA:
    alphabet: tuple
    states: tuple
    initial: object
    finals: frozenset
    delta: Mapping

    def __post_init__(self):
        if self.initial not in self.states:
            raise CorpusError(f"initial state {self.initial!r} not in {self.states}")
        if not set(self.finals) <= set(self.states):
            raise CorpusError(f"final states {set(self.finals)} not in {self.states}")
        for state in self.states:
            for symbol in self.alphabet:
                if self.delta.get(state, {}).get(symbol) not in self.states:
                    raise CorpusError(f"no transition from {state!r} on {symbol!r}")

    @classmethod
    def build(cls, alphabet, transitions: dict, initial, finals) -> "DFA":
        """Complete a partial transition table with a dead sink state."""
        states = list(transitions)
        delta = {}
        needs_sink = False
        for state, edges in transitions.items():
            row = {}
            for symbol in alphabet:
                if symbol in edges:
                    row[symbol] = edges[symbol]
                else:
                    row[symbol] = DEAD
                    needs_sink = True
            delta[state] = row
        if needs_sink and DEAD not in delta:
            states.append(DEAD)
            delta[DEAD] = {symbol: DEAD for symbol in alphabet}
        return cls(tuple(alphabet), tuple(states), initial, frozenset(finals), delta)

    def run(self, word, state=None):
        state = self.initial if state is None else state
        for symbol in word:
            state = self.delta[state][symbol]
        return state

    def accepts(self, word) -> bool:
        return self.run(word) in self.finals

    @functools.cached_property
    def live(self) -> frozenset:
        """States from which some final state is reachable."""
        live = set(self.finals)
        changed = True
        while changed:
            changed = False
            for state in self.states:
                if state not in live and any(
                    self.delta[state][s] in live for s in self.alphabet
                ):
                    live.add(state)
                    changed = True
        return frozenset(live)

    def completions(self, n: int) -> list:
        """completions(n)[k][q]: accepted words of length k read from state q."""
        table = [{q: int(q in self.finals) for q in self.states}]
        for _ in range(n):
            prev = table[-1]
            table.append(
                {q: sum(prev[self.delta[q][s]] for s in self.alphabet) for q in self.states}
            )
        return table

    def sample(self, n: int, rng: np.random.Generator) -> Optional[tuple]:
        """A uniformly random accepted word of length n, or None."""
        table = self.completions(n)
        if table[n][self.initial] == 0:
            return None
        state, out = self.initial, []
        for k in range(n, 0, -1):
            weights = np.array(
                [float(table[k - 1][self.delta[state][s]]) for s in self.alphabet]
            )
            symbol = self.alphabet[rng.choice(len(self.alphabet), p=weights / weights.sum())]
            out.append(symbol)
            state = self.delta[state][symbol]
        return tuple(out)


# -------------------- Oracles --------------------
@dataclasses.dataclass(frozen=True, eq=False)
class LanguageOracle:
    id: str
    alphabet: tuple
    description: str
    dfa: Optional[DFA] = None
    predicate: Optional[Callable] = None
    extendable: Optional[Callable] = None
    sampler: Optional[Callable] = None
    empty_tier: Optional[bool] = None
    local_tier: Optional[bool] = None
    note: str = ""

    def accepts(self, word) -> bool:
        word = tuple(word)
        if any(s not in self.alphabet for s in word):
            return False
        if self.dfa is not None:
            return self.dfa.accepts(word)
        return bool(self.predicate(word))

    def sample_member(self, n: int, rng: np.random.Generator) -> Optional[tuple]:
        if self.dfa is not None:
            return self.dfa.sample(n, rng)
        return self.sampler(n, rng)


def membership(oracle: LanguageOracle, w) -> bool:
    return oracle.accepts(w)


def legal_next(oracle: LanguageOracle, prefix) -> frozenset:
    """Symbols s such that prefix + s is a prefix of some member."""
    prefix = tuple(prefix)
    if oracle.dfa is not None:
        dfa = oracle.dfa
        state = dfa.run(prefix)
        if state not in dfa.live:
            return frozenset()
        return frozenset(s for s in dfa.alphabet if dfa.delta[state][s] in dfa.live)
    if not oracle.extendable(prefix):
        return frozenset()
    return frozenset(s for s in oracle.alphabet if oracle.extendable(prefix + (s,)))


# -------------------- Regular languages --------------------
def _tomita1():
    return DFA.build(("0", "1"), {"ok": {"1": "ok"}}, "ok", {"ok"})


def _tomita2():
    return DFA.build(("0", "1"), {"even": {"1": "odd"}, "odd": {"0": "even"}}, "even", {"even"})


def _tomita3():
    # "A": no pending odd run of ones, "B": inside an odd run of ones,
    # "C"/"D": odd/even run of zeros right after an odd run of ones
    transitions = {
        "A": {"0": "A", "1": "B"},
        "B": {"0": "C", "1": "A"},
        "C": {"0": "D"},
        "D": {"0": "C", "1": "B"},
    }
    return DFA.build(("0", "1"), transitions, "A", {"A", "B", "D"})


def _tomita4():
    transitions = {0: {"0": 1, "1": 0}, 1: {"0": 2, "1": 0}, 2: {"1": 0}}
    return DFA.build(("0", "1"), transitions, 0, {0, 1, 2})


def _tomita5():
    transitions = {
        (n, k): {"0": ((n + 1) % 2, k), "1": ((n + 1) % 2, (k + 1) % 2)}
        for n in (0, 1)
        for k in (0, 1)
    }
    return DFA.build(("0", "1"), transitions, (0, 0), {(0, 0)})


def _tomita6():
    transitions = {r: {"0": (r + 1) % 3, "1": (r - 1) % 3} for r in range(3)}
    return DFA.build(("0", "1"), transitions, 0, {0})


def _tomita7():
    transitions = {
        0: {"0": 0, "1": 1},
        1: {"1": 1, "0": 2},
        2: {"0": 2, "1": 3},
        3: {"1": 3},
    }
    return DFA.build(("0", "1"), transitions, 0, {0, 1, 2, 3})


def _dyck_depth(n: int):
    transitions = {}
    for depth in range(n + 1):
        edges = {}
        if depth < n:
            edges["a"] = depth + 1
        if depth > 0:
            edges["b"] = depth - 1
        transitions[depth] = edges
    return DFA.build(("a", "b"), transitions, 0, {0})


def _parity():
    return DFA.build(("a", "b"), {0: {"a": 1, "b": 0}, 1: {"a": 0, "b": 1}}, 0, {0})


def _cycle(word: str, alphabet=("a", "b")):
    transitions = {k: {word[k]: (k + 1) % len(word)} for k in range(len(word))}
    return DFA.build(alphabet, transitions, 0, {0})


def _abcde():
    letters = "abcde"
    transitions = {"start": {"a": "a"}}
    for k, ch in enumerate(letters):
        edges = {ch: ch}
        if k + 1 < len(letters):
            edges[letters[k + 1]] = letters[k + 1]
        transitions[ch] = edges
    return DFA.build(tuple(letters), transitions, "start", {"e"})


def _abd_bc():
    transitions = {"left": {"a": "left", "b": "left", "d": "right"}, "right": {"b": "right", "c": "right"}}
    return DFA.build(("a", "b", "c", "d"), transitions, "left", {"right"})


def _l012():
    transitions = {
        "out": {"0": "in", "1": "out", "2": "out"},
        "in": {"0": "in", "1": "out", "2": "in"},
    }
    return DFA.build(("0", "1", "2"), transitions, "out", {"in"})


def _substring_ab():
    transitions = {
        "none": {"a": "a", "b": "none"},
        "a": {"a": "a", "b": "found"},
        "found": {"a": "found", "b": "found"},
    }
    return DFA.build(("a", "b"), transitions, "none", {"found"})


def _exists_b():
    transitions = {"no": {"a": "no", "b": "yes"}, "yes": {"a": "yes", "b": "yes"}}
    return DFA.build(("a", "b"), transitions, "no", {"yes"})


def _subsequence(pattern: tuple, alphabet: tuple):
    transitions = {}
    for k in range(len(pattern) + 1):
        transitions[k] = {
            s: (k + 1 if k < len(pattern) and s == pattern[k] else k) for s in alphabet
        }
    return DFA.build(alphabet, transitions, 0, {len(pattern)})


# -------------------- Counter languages --------------------
def _majority(word) -> bool:
    return word.count("1") >= word.count("0")


def _majority_extendable(prefix) -> bool:
    return True


def _majority_sample(n: int, rng: np.random.Generator) -> tuple:
    ones = int(rng.integers((n + 1) // 2, n + 1))
    word = np.array(["1"] * ones + ["0"] * (n - ones))
    return tuple(rng.permutation(word).tolist()) if n else ()


def _dyck_heights(word):
    height = 0
    for s in word:
        height += 1 if s == "(" else -1
        if height < 0:
            return None
    return height


def _dyck1(word) -> bool:
    return _dyck_heights(word) == 0


def _dyck1_extendable(prefix) -> bool:
    return _dyck_heights(prefix) is not None


def _dyck1_sample(n: int, rng: np.random.Generator) -> Optional[tuple]:
    if n % 2:
        return None
    # ways[k][h]: balanced completions of length k from height h
    ways = [[0] * (n + 2) for _ in range(n + 1)]
    ways[0][0] = 1
    for k in range(1, n + 1):
        for h in range(n + 1):
            ways[k][h] = ways[k - 1][h + 1] + (ways[k - 1][h - 1] if h > 0 else 0)
    out, h = [], 0
    for k in range(n, 0, -1):
        up = ways[k - 1][h + 1]
        down = ways[k - 1][h - 1] if h > 0 else 0
        if rng.random() * (up + down) < up:
            out.append("(")
            h += 1
        else:
            out.append(")")
            h -= 1
    return tuple(out)


def _anbncn_blocks(word):
    """(i, j, k) when word = a^i b^j c^k, else None."""
    counts = {"a": 0, "b": 0, "c": 0}
    order = "abc"
    stage = 0
    for s in word:
        while stage < 3 and order[stage] != s:
            stage += 1
        if stage == 3:
            return None
        counts[s] += 1
    return counts["a"], counts["b"], counts["c"]


def _anbncn(word) -> bool:
    blocks = _anbncn_blocks(word)
    return blocks is not None and blocks[0] == blocks[1] == blocks[2]


def _anbncn_extendable(prefix) -> bool:
    blocks = _anbncn_blocks(prefix)
    if blocks is None:
        return False
    i, j, k = blocks
    return j <= i and k <= j and (k == 0 or j == i)


def _anbncn_sample(n: int, rng: np.random.Generator) -> Optional[tuple]:
    if n % 3:
        return None
    k = n // 3
    return ("a",) * k + ("b",) * k + ("c",) * k


# -------------------- Registry --------------------
_REGULAR = {
    "tomita1": (_tomita1, "1*", True, True),
    "tomita2": (_tomita2, "(10)*", True, True),
    "tomita3": (
        _tomita3,
        "no odd run of 1s followed by an odd run of 0s",
        False,
        False,
    ),
    "tomita4": (_tomita4, "no 000 substring", False, True),
    "tomita5": (_tomita5, "even length and an even number of 1s", False, False),
    "tomita6": (_tomita6, "#0 - #1 divisible by 3", False, False),
    "tomita7": (_tomita7, "0*1*0*1*", True, True),
    "d2": (lambda: _dyck_depth(2), "D_2 = (a D_1 b)*", True, True),
    "d3": (lambda: _dyck_depth(3), "D_3 = (a D_2 b)*", True, True),
    "d4": (lambda: _dyck_depth(4), "D_4 = (a D_3 b)*", True, True),
    "d12": (lambda: _dyck_depth(12), "D_12 = (a D_11 b)*", True, True),
    "parity": (_parity, "b*(ab*ab*)*", False, False),
    "aa_star": (lambda: _cycle("aa"), "(aa)*", False, True),
    "aaaa_star": (lambda: _cycle("aaaa"), "(aaaa)*", False, True),
    "abab_star": (lambda: _cycle("abab"), "(abab)*", False, True),
    "abcde": (_abcde, "aa*bb*cc*dd*ee*", True, True),
    "abd_bc": (_abd_bc, "{a,b}*d{b,c}*", True, True),
    "l012": (_l012, "{0,1,2}*02*", False, False),
    "substring_ab": (_substring_ab, "(a|b)*ab(a|b)*", None, True),
    "exists_b": (_exists_b, "(a|b)*b(a|b)*", True, True),
    "piecewise_abc": (
        lambda: _subsequence(("a", "b", "c"), ("a", "b", "c")),
        "(a|b|c)*a(a|b|c)*b(a|b|c)*c(a|b|c)*",
        True,
        True,
    ),
}

_NOTES = {
    "tomita3": "end of string closes a pending run of 0s",
    "substring_ab": "the stock program uses a local count; no tier-[] claim is made",
}

BENCHMARK = (
    "tomita1", "tomita2", "tomita3", "tomita4", "tomita5", "tomita6", "tomita7",
    "d2", "d3", "d4", "d12", "parity", "aa_star", "aaaa_star", "abab_star",
    "abcde", "abd_bc", "l012",
)


@functools.cache
def _registry() -> dict:
    oracles = {}
    for key, (make, description, empty_tier, local_tier) in _REGULAR.items():
        dfa = make()
        oracles[key] = LanguageOracle(
            id=key,
            alphabet=dfa.alphabet,
            description=description,
            dfa=dfa,
            empty_tier=empty_tier,
            local_tier=local_tier,
            note=_NOTES.get(key, ""),
        )
    oracles["majority"] = LanguageOracle(
        id="majority",
        alphabet=("0", "1"),
        description="#1 >= #0",
        predicate=_majority,
        extendable=_majority_extendable,
        sampler=_majority_sample,
        empty_tier=True,
        local_tier=True,
    )
    oracles["dyck1"] = LanguageOracle(
        id="dyck1",
        alphabet=("(", ")"),
        description="balanced parentheses",
        predicate=_dyck1,
        extendable=_dyck1_extendable,
        sampler=_dyck1_sample,
        empty_tier=True,
        local_tier=True,
    )
    oracles["anbncn"] = LanguageOracle(
        id="anbncn",
        alphabet=("a", "b", "c"),
        description="a^n b^n c^n",
        predicate=_anbncn,
        extendable=_anbncn_extendable,
        sampler=_anbncn_sample,
        empty_tier=True,
        local_tier=True,
    )
    return oracles


def oracle(language_id: str) -> LanguageOracle:
    try:
        return _registry()[language_id]
    except KeyError:
        raise UnknownLanguage(language_id) from None


def oracle_ids() -> tuple:
    return tuple(_registry())


# -------------------- Next-symbol oracles --------------------
def bigram_counts(word, t: int) -> dict:
    """Counts of x_k x_{k+1} = (x_t, s) over k < t (1-based t)."""
    word = tuple(word)
    current = word[t - 1]
    counts = {}
    for k in range(1, t):
        if word[k - 1] == current:
            nxt = word[k]
            counts[nxt] = counts.get(nxt, 0) + 1
    return counts


def bigram_support(word) -> list:
    """Per position: symbols that followed an earlier copy of the current one."""
    return [frozenset(bigram_counts(word, t)) for t in range(1, len(word) + 1)]


def bigram_argmax(word) -> list:
    """Per position: most frequent successors of the current symbol so far."""
    out = []
    for t in range(1, len(word) + 1):
        counts = bigram_counts(word, t)
        best = max(counts.values(), default=0)
        out.append(frozenset(s for s, c in counts.items() if c == best))
    return out

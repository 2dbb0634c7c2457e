"""Process-pool side of the equivalence harness.

Each worker process loads the program and the compiled net once (the net is
shipped as its text serialisation and rebuilt bit-exactly), then compares
chunks of words. Chunks come back in submission order, so the reduction in
the harness does not depend on the pool size.
"""

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from dsl import Program
from interp import accepts, predicted_sets
from netfile import deserialize, serialize
from runtime import LimitTransformer, accepts_net, predicted_sets_net

logger = logging.getLogger(__name__)

WORKERS = int(os.getenv("CRASP_WORKERS", "0")) or os.cpu_count() or 1
CHUNK_SIZE = 64

_program: Optional[Program] = None
_net: Optional[LimitTransformer] = None


@dataclasses.dataclass(frozen=True)
class WordResult:
    word: tuple
    interp_accepts: bool
    net_accepts: bool
    sets_agree: bool = True

    @property
    def agrees(self) -> bool:
        return self.interp_accepts == self.net_accepts and self.sets_agree


def compare_word(program: Program, net: LimitTransformer, word) -> WordResult:
    word = tuple(word)
    expected = accepts(program, word)
    got = accepts_net(net, word)
    sets_agree = True
    if program.predict and word:
        sets_agree = predicted_sets(program, word) == predicted_sets_net(net, word)
    return WordResult(word, expected, got, sets_agree)


def _init_worker(program: Program, net_text: str) -> None:
    global _program, _net
    _program = program
    _net = deserialize(net_text)
    logger.debug(f"worker {os.getpid()} loaded {program.name}")


def _compare_chunk(words: list) -> list:
    return [compare_word(_program, _net, w) for w in words]


def _chunks(words: list, size: int):
    for start in range(0, len(words), size):
        yield words[start : start + size]


def compare_words(
    program: Program,
    net: LimitTransformer,
    words,
    workers: Optional[int] = None,
    chunk_size: int = CHUNK_SIZE,
) -> list:
    """WordResult for every word, in input order."""
    words = [tuple(w) for w in words]
    workers = workers or WORKERS
    if workers == 1 or len(words) <= chunk_size:
        return [compare_word(program, net, w) for w in words]

    results = []
    with ProcessPoolExecutor(
        max_workers=workers,
        initializer=_init_worker,
        initargs=(program, serialize(net)),
    ) as executor:
        for chunk in executor.map(_compare_chunk, _chunks(words, chunk_size)):
            results.extend(chunk)
    return results

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from compiler import compile_program  # noqa: E402
from corpus import get_program  # noqa: E402

MAJORITY_SOURCE = """\
# Strings over {0, 1} with at least as many 1s as 0s.
program MAJORITY over {0, 1} {
  C1(i) := count[j<=i] Q_1(j);
  C0(i) := count[j<=i] Q_0(j);
  M(i) := C1(i) >= C0(i);
  empty accepts;
}
"""


@pytest.fixture
def majority_source():
    return MAJORITY_SOURCE


@pytest.fixture
def majority_file(tmp_path):
    path = tmp_path / "majority.crasp"
    path.write_text(MAJORITY_SOURCE)
    return path


@pytest.fixture(scope="session")
def compiled():
    """Compile stdlib programs once per session."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = compile_program(get_program(name))
        return cache[name]

    return get


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setattr("worker.WORKERS", 1)

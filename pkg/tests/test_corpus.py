import itertools

import pytest

from corpus import (
    LANGUAGE_OF,
    PROGRAM_DIR,
    TASKS,
    UnknownProgram,
    dyck_depth,
    format_manifest,
    get_program,
    load_program,
    manifest,
    stdlib,
)
from interp import accepts
from oracles import CorpusError, oracle


def test_stdlib_size_and_copy():
    programs = stdlib()
    assert len(programs) >= 14
    programs.pop("MAJORITY")
    assert "MAJORITY" in stdlib()


def test_unknown_program():
    with pytest.raises(UnknownProgram):
        get_program("NOPE")
    with pytest.raises(CorpusError):
        get_program("NOPE")


def test_program_files_load():
    for path in PROGRAM_DIR.glob("*.crasp"):
        program = load_program(path)
        assert get_program(program.name) == program


def test_dyck_builder_is_parametric():
    assert dyck_depth(2) == get_program("D2")
    assert dyck_depth(5).name == "D5"


def _words(alphabet, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


@pytest.mark.parametrize("name", sorted(LANGUAGE_OF))
def test_programs_agree_with_their_oracles(name):
    program = get_program(name)
    o = oracle(LANGUAGE_OF[name])
    assert set(program.alphabet) == set(o.alphabet)
    max_len = {2: 10, 3: 6, 4: 5}.get(len(program.alphabet), 4)
    for w in _words(program.alphabet, max_len):
        assert accepts(program, w) == o.accepts(w), (name, w)


def test_task_programs_exist():
    for task, (program, _, _) in TASKS.items():
        if program is not None:
            assert get_program(program).predict, task


def test_manifest_rows():
    rows = {row.id: row for row in manifest()}
    assert rows["parity"].program is None
    assert (rows["parity"].empty_tier, rows["parity"].local_tier) == (False, False)
    assert rows["aa_star"].program == "AA_STAR"
    assert (rows["aa_star"].empty_tier, rows["aa_star"].local_tier) == (False, True)
    assert rows["majority"].kind == "task"
    assert rows["addition"].program is None
    for missing in ("tomita3", "tomita5", "tomita6", "l012", "copy_repeat"):
        assert rows[missing].program is None


def test_format_manifest():
    text = format_manifest(manifest())
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["kind", "id", "program"]
    assert any(line.startswith("language") and " aa_star " in line for line in lines)

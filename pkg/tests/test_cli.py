import json

import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

import models  # noqa: F401
from cli import EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main, parse_samples
from db import Base
from harness import EquivalenceReport


@pytest.fixture
def memory_db(mocker):
    engine = create_engine(
        "sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool
    )
    Base.metadata.create_all(bind=engine)
    session = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    mocker.patch("cli.SessionLocal", session)
    mocker.patch("cli.init_db")
    return session


def _report(program="MAJORITY", mismatches=0, bins=None):
    return EquivalenceReport(
        program=program,
        exhaustive_len=4,
        exhaustive_count=31,
        sampled={20: 5},
        mismatches=mismatches,
        witnesses=[],
        max_bool_error=0.0,
        max_count_error=1e-7,
        bins=bins or {"1-50": 1.0, "51-100": None, "101-150": None},
        predict_mismatches=0,
        seed=0,
        runtime_s=0.5,
    )


def test_parse_samples():
    assert parse_samples("25,50:1000:200") == ((25, 50), 1000, 200)
    assert parse_samples("10:4") == ((10,), 4, None)
    for bad in ("25", "a:1", "0:5", "5:-1", "1:2:3:4"):
        with pytest.raises(Exception):
            parse_samples(bad)


def test_check_ok(majority_file, capsys):
    assert main(["check", str(majority_file)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok MAJORITY:")


def test_check_broken_program(tmp_path, capsys):
    path = tmp_path / "broken.crasp"
    path.write_text("program X over {a} { A(i) := ; }")
    assert main(["check", str(path)]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_check_reports_sort_error_location(tmp_path, capsys):
    path = tmp_path / "broken.crasp"
    path.write_text(
        "program X over {a} {\n"
        "  C(i) := count[j<=i] Q_a(j);\n"
        "  B(i) := not C(i);\n"
        "}\n"
    )
    assert main(["check", str(path)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "B (line 3)" in err and "Boolean" in err


def test_missing_file_is_io_error(tmp_path):
    assert main(["check", str(tmp_path / "nope.crasp")]) == EXIT_IO


def test_usage_error():
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["verify", "MAJORITY", "--samples", "oops"]) == EXIT_USAGE


def test_run_accepts_and_traces(majority_file, capsys):
    assert main(["run", str(majority_file), "110"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "accept"
    assert main(["run", str(majority_file), "100", "--trace"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "C1" in out and out.strip().endswith("reject")


def test_run_rejects_foreign_symbols(majority_file):
    assert main(["run", str(majority_file), "1x0"]) == EXIT_USAGE


def test_compile_exec_reg(majority_file, tmp_path, capsys):
    net_path = tmp_path / "majority.json"
    assert main(["compile", str(majority_file), "-o", str(net_path)]) == EXIT_OK
    assert "MAJORITY" in capsys.readouterr().out
    assert json.loads(net_path.read_text())["metadata"]["program"] == "MAJORITY"

    assert main(["exec", str(net_path), "0110"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "accept"
    assert main(["exec", str(net_path), "001"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "reject"

    assert main(["reg", str(net_path)]) == EXIT_OK
    reg = json.loads(capsys.readouterr().out)
    assert reg["phi_energy"] == 0.0 and reg["delta"] == 1


@pytest.mark.parametrize(
    "command", [["check"], ["run", "--trace"], ["exec"], ["reg"]]
)
def test_undecodable_file_is_io_error(tmp_path, capsys, command):
    path = tmp_path / "garbage.bin"
    path.write_bytes(b"\xff\xfe\x00garbage")
    word = ["01"] if command[0] in ("run", "exec") else []
    assert main([command[0], str(path), *word, *command[1:]]) == EXIT_IO
    assert "error:" in capsys.readouterr().err


def test_exec_rejects_bad_net_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 99}')
    assert main(["exec", str(path), "01"]) == EXIT_IO


def test_verify_majority(capsys):
    code = main(
        [
            "verify",
            "MAJORITY",
            "--exhaustive",
            "5",
            "--samples",
            "20:10:2",
            "--channels",
            "2",
            "--seed",
            "7",
            "--no-store",
        ]
    )
    assert code == EXIT_OK
    row = json.loads(capsys.readouterr().out)
    assert row["program"] == "MAJORITY"
    assert row["mismatches"] == 0
    assert row["exhaustive_count"] == 2**6 - 1
    assert row["sampled"] == {"20": 12}
    assert row["seed"] == 7


def test_verify_cap_is_a_harness_error():
    assert main(["verify", "MAJORITY", "--exhaustive", "30", "--no-store"]) == EXIT_USAGE


def test_verify_mismatch_exit_code(mocker, memory_db, capsys):
    mocker.patch("cli.check_equivalence", return_value=_report(mismatches=3))
    assert main(["verify", "MAJORITY"]) == EXIT_MISMATCH
    assert json.loads(capsys.readouterr().out)["mismatches"] == 3
    db = memory_db()
    try:
        assert db.query(models.VerificationRun).count() == 1
    finally:
        db.close()


def test_corpus_list_and_audit(capsys):
    assert main(["corpus", "list"]) == EXIT_OK
    assert "aa_star" in capsys.readouterr().out
    assert main(["corpus", "audit"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_report_keeps_latest_run(mocker, memory_db, capsys):
    mocker.patch(
        "cli.check_equivalence",
        side_effect=[_report(mismatches=2), _report(bins={"1-50": 0.5, "51-100": 1.0})],
    )
    main(["verify", "MAJORITY"])
    main(["verify", "MAJORITY"])
    capsys.readouterr()

    assert main(["report"]) == EXIT_OK
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 1
    assert rows[0]["mismatches"] == 0
    assert "runtime_s" not in rows[0]

    assert main(["report", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "program,bin1,bin2,bin3,mismatches,max_count_err"
    assert lines[1] == "MAJORITY,0.5,1.0,,0,1e-07"

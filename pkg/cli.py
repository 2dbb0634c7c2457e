import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from compiler import CompileError, compile_program, format_report
from corpus import format_manifest, get_program, load_program, manifest, stdlib
from db import SessionLocal, init_db
from dsl import SOS, DslError
from harness import (
    HarnessError,
    audit_expressiveness,
    check_equivalence,
    format_audit,
)
from interp import (
    InterpError,
    accepts,
    evaluate,
    format_trace,
    predicted_sets,
    split_word,
)
from logging_config import setup_logging
from metrics import export_metrics
from models import VerificationRun
from netfile import SchemaError, deserialize, serialize
from oracles import CorpusError
from runtime import RuntimeModelError, accepts_net, predicted_sets_net, reg_infinity

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_IO = 3

DEFAULT_SAMPLES = "25,50,100,150:1000:200"


def parse_samples(text: str):
    """'LENGTHS:COUNT[:POSITIVES]', e.g. '25,50:1000:200' -> ((25, 50), 1000, 200)."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"bad sample value {text!r}")
    try:
        lengths = tuple(int(x) for x in parts[0].split(",") if x.strip())
        count = int(parts[1])
        positives = int(parts[2]) if len(parts) == 3 else None
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sample value {text!r}") from None
    if any(n < 1 for n in lengths) or count < 0 or (positives is not None and positives < 0):
        raise argparse.ArgumentTypeError(f"bad sample value {text!r}")
    return lengths, count, positives


def _show_set(symbols, alphabet) -> str:
    return "{" + ",".join(s for s in alphabet if s in symbols) + "}"


def _resolve_program(name: str):
    if name.endswith(".crasp") or Path(name).is_file():
        return load_program(name)
    return get_program(name)


# -------------------- Commands --------------------
def check_cmd(args) -> int:
    program = load_program(args.file)
    print(
        f"ok {program.name}: {len(program.ops)} operations over "
        f"{{{', '.join(program.alphabet)}}}, accept {program.accept}"
    )
    return EXIT_OK


def run_cmd(args) -> int:
    program = load_program(args.file)
    word = split_word(args.word, program.alphabet)
    if args.trace and word:
        print(format_trace(evaluate(program, word)), end="")
    print("accept" if accepts(program, word) else "reject")
    if program.predict and word:
        sets = predicted_sets(program, word)
        print(" ".join(_show_set(s, program.alphabet) for s in sets))
    return EXIT_OK


def compile_cmd(args) -> int:
    program = load_program(args.file)
    net, _, report = compile_program(program)
    Path(args.output).write_text(serialize(net), encoding="utf-8")
    print(format_report(report), end="")
    return EXIT_OK


def exec_cmd(args) -> int:
    net = deserialize(Path(args.net).read_text(encoding="utf-8"))
    alphabet = tuple(s for s in net.alphabet if s != SOS)
    word = split_word(args.word, alphabet)
    print("accept" if accepts_net(net, word) else "reject")
    if net.metadata.get("predict") and word:
        sets = predicted_sets_net(net, word)
        print(" ".join(_show_set(s, alphabet) for s in sets))
    return EXIT_OK


def _store(report) -> None:
    init_db()
    db = SessionLocal()
    try:
        db.add(VerificationRun.from_report(report))
        db.commit()
    finally:
        db.close()


def verify_cmd(args) -> int:
    if args.program == "all":
        programs = list(stdlib().values())
    else:
        programs = [_resolve_program(args.program)]
    lengths, count, positives = args.samples

    failed = 0
    for program in programs:
        report = check_equivalence(
            program,
            exhaustive_len=args.exhaustive,
            lengths=lengths,
            count=count,
            seed=args.seed,
            positives=positives,
            channel_samples=args.channels,
            workers=args.workers,
        )
        print(json.dumps(report.as_dict(), sort_keys=True))
        sys.stdout.flush()
        if args.store:
            _store(report)
        failed += not report.ok
    export_metrics()
    if failed:
        logger.error(f"❌ {failed} of {len(programs)} programs disagree with their nets")
        return EXIT_MISMATCH
    logger.info(f"✅ {len(programs)} programs verified")
    return EXIT_OK


def corpus_cmd(args) -> int:
    rows = manifest()
    if args.action == "list":
        print(format_manifest(rows), end="")
        return EXIT_OK
    audit = audit_expressiveness(rows)
    print(format_audit(audit), end="")
    return EXIT_OK if all(r.passed for r in audit) else EXIT_MISMATCH


def _latest_runs() -> list:
    init_db()
    db = SessionLocal()
    try:
        latest = {}
        for run in db.query(VerificationRun).order_by(VerificationRun.id).all():
            latest[run.program] = run
        return [latest[name] for name in sorted(latest)]
    finally:
        db.close()


def report_cmd(args) -> int:
    runs = _latest_runs()
    if args.format == "json":
        for run in runs:
            print(json.dumps(run.as_dict(), sort_keys=True))
        return EXIT_OK
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["program", "bin1", "bin2", "bin3", "mismatches", "max_count_err"])
    for run in runs:
        bins = list((run.bins or {}).values())[:3]
        bins += [None] * (3 - len(bins))
        writer.writerow(
            [
                run.program,
                *("" if b is None else b for b in bins),
                run.mismatches + (run.predict_mismatches or 0),
                run.max_count_error,
            ]
        )
    return EXIT_OK


def reg_cmd(args) -> int:
    net = deserialize(Path(args.net).read_text(encoding="utf-8"))
    print(json.dumps(reg_infinity(net).as_dict(), sort_keys=True))
    return EXIT_OK


# -------------------- Parser --------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crasp", description="C-RASP compiler toolchain")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Commands")

    # Check
    check_parser = subparsers.add_parser("check", help="Parse and validate a program")
    check_parser.add_argument("file")
    check_parser.set_defaults(handler=check_cmd)

    # Run
    run_parser = subparsers.add_parser("run", help="Interpret a program on a word")
    run_parser.add_argument("file")
    run_parser.add_argument("word")
    run_parser.add_argument("--trace", action="store_true", help="Print the value table")
    run_parser.set_defaults(handler=run_cmd)

    # Compile
    compile_parser = subparsers.add_parser("compile", help="Compile a program to a net file")
    compile_parser.add_argument("file")
    compile_parser.add_argument("-o", "--output", required=True)
    compile_parser.set_defaults(handler=compile_cmd)

    # Exec
    exec_parser = subparsers.add_parser("exec", help="Run a net file on a word")
    exec_parser.add_argument("net")
    exec_parser.add_argument("word")
    exec_parser.set_defaults(handler=exec_cmd)

    # Verify
    verify_parser = subparsers.add_parser("verify", help="Check interpreter/net equivalence")
    verify_parser.add_argument("program", help="stdlib name, .crasp file, or 'all'")
    verify_parser.add_argument("--exhaustive", type=int, default=None)
    verify_parser.add_argument("--samples", type=parse_samples, default=DEFAULT_SAMPLES)
    verify_parser.add_argument("--seed", type=int, default=0)
    verify_parser.add_argument("--channels", type=int, default=100)
    verify_parser.add_argument("--workers", type=int, default=None)
    verify_parser.add_argument("--no-store", dest="store", action="store_false")
    verify_parser.set_defaults(handler=verify_cmd)

    # Corpus
    corpus_parser = subparsers.add_parser("corpus", help="Corpus manifest and audit")
    corpus_parser.add_argument("action", choices=["list", "audit"])
    corpus_parser.set_defaults(handler=corpus_cmd)

    # Report
    report_parser = subparsers.add_parser("report", help="Print stored verification runs")
    report_parser.add_argument("--format", choices=["json", "csv"], default="json")
    report_parser.set_defaults(handler=report_cmd)

    # Reg
    reg_parser = subparsers.add_parser("reg", help="Print the R-infinity complexity of a net")
    reg_parser.add_argument("net")
    reg_parser.set_defaults(handler=reg_cmd)

    return parser


def main(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        return args.handler(args)
    except (SchemaError, OSError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (DslError, CorpusError, InterpError, CompileError, HarnessError, RuntimeModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

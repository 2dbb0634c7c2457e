import logging
import os

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

METRICS_FILE = os.getenv("CRASP_METRICS_FILE")

registry = CollectorRegistry()

STRINGS_CHECKED = Counter(
    "crasp_strings_checked_total",
    "Strings compared between interpreter and compiled net",
    ["program"],
    registry=registry,
)
MISMATCHES = Counter(
    "crasp_mismatches_total",
    "Acceptance or predicted-set disagreements",
    ["program"],
    registry=registry,
)
VERIFY_SECONDS = Histogram(
    "crasp_verify_seconds",
    "Wall time of one equivalence check",
    ["program"],
    buckets=(0.1, 0.5, 1, 5, 15, 60, 300, 900),
    registry=registry,
)


def record_run(program: str, checked: int, mismatches: int, seconds: float) -> None:
    STRINGS_CHECKED.labels(program=program).inc(checked)
    MISMATCHES.labels(program=program).inc(mismatches)
    VERIFY_SECONDS.labels(program=program).observe(seconds)


def export_metrics(path=None) -> bool:
    """Write the registry in textfile-collector format; no-op without a path."""
    path = path or METRICS_FILE
    if not path:
        return False
    write_to_textfile(str(path), registry)
    logger.info(f"📈 metrics written to {path}")
    return True

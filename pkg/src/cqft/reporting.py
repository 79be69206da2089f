"""Machine-readable check reports: JSON documents and CSV tables.

Every numeric claim carries its tolerance and a provenance tag naming the
oracle it was checked against; a report set maps to a process exit status
(nonzero iff any check failed) and serializes deterministically.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

SCHEMA = "cqft-report/1"


@dataclass
class Check:
    """One verified claim: measured value against an expectation."""

    name: str
    passed: bool
    measured: object
    expected: str
    tolerance: str
    provenance: str
    duration_s: float = 0.0
    criterion: int | None = None
    details: dict = field(default_factory=dict)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    return str(value)


def report_document(checks, seed=None, meta=None):
    doc = {
        "schema": SCHEMA,
        "seed": seed,
        "passed": all(c.passed for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c.passed for c in checks),
        "checks": [_jsonable(asdict(c)) for c in checks],
    }
    if meta:
        doc["meta"] = _jsonable(meta)
    return doc


def write_json(path, document):
    with open(path, "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dumps(document):
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def checks_csv_rows(checks):
    rows = []
    for c in checks:
        rows.append([c.criterion if c.criterion is not None else "",
                     c.name, "pass" if c.passed else "FAIL",
                     c.measured, c.expected, c.tolerance, c.provenance,
                     f"{c.duration_s:.3f}"])
    return rows


CHECKS_CSV_HEADER = ["criterion", "name", "status", "measured", "expected",
                     "tolerance", "provenance", "duration_s"]


def summary_lines(checks):
    lines = []
    for c in checks:
        tag = "PASS" if c.passed else "FAIL"
        crit = f"criterion {c.criterion}: " if c.criterion is not None else ""
        lines.append(f"[{tag}] {crit}{c.name}: measured={c.measured} "
                     f"expected={c.expected} ({c.tolerance})")
    return lines

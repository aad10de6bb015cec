"""Evaluation reports and their CSV / JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

CSV_HEADER = ["metric", "N", "value", "users", "skipped"]


@dataclass(frozen=True)
class MetricRow:
    name: str
    n: int | None
    value: float
    users: int
    skipped: int


@dataclass
class EvalReport:
    metrics: list
    runtime_seconds: float = 0.0
    config: dict = field(default_factory=dict)

    def get(self, name: str, n: int | None = None) -> MetricRow:
        for row in self.metrics:
            if row.name == name and row.n == n:
                return row
        raise KeyError((name, n))

    def check(self) -> None:
        for row in self.metrics:
            if row.users < 0 or row.skipped < 0:
                raise DataError(f"{row.name}: negative user counts")
            if math.isnan(row.value):
                continue
            lo = -1.0 if row.name.startswith("kendall") else 0.0
            if not lo <= row.value <= 1.0:
                raise DataError(f"{row.name}@{row.n} = {row.value} outside [{lo}, 1]")


def _fmt(value: float) -> str:
    return repr(float(value))


def report_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in report.metrics:
        w.writerow([row.name, "" if row.n is None else row.n, _fmt(row.value), row.users, row.skipped])
    return buf.getvalue()


def report_to_json(report: EvalReport) -> str:
    doc = {
        "metrics": [
            {"metric": r.name, "N": r.n, "value": r.value, "users": r.users, "skipped": r.skipped}
            for r in report.metrics
        ],
        "runtime_seconds": report.runtime_seconds,
        "config": report.config,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_report(report: EvalReport, path, fmt: str = "csv") -> Path:
    """Write ``report``; deterministic field order.

    The CSV body holds metric rows only so that identical runs give identical
    bytes; wall-clock runtime goes to a ``<path>.runtime`` sidecar. JSON
    carries runtime and configuration inline.
    """
    report.check()
    path = Path(path)
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text, encoding="utf-8")
    if fmt == "csv":
        Path(str(path) + ".runtime").write_text(f"{report.runtime_seconds:.6f}\n", encoding="utf-8")
    return path


def read_report(path) -> EvalReport:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = [MetricRow(m["metric"], m["N"], float(m["value"]), int(m["users"]), int(m["skipped"]))
                for m in doc["metrics"]]
        return EvalReport(rows, float(doc.get("runtime_seconds", 0.0)), doc.get("config", {}))
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise DataError(f"{path}: unexpected report header {header}")
    rows = [MetricRow(name, int(n) if n else None, float(v), int(u), int(s)) for name, n, v, u, s in reader]
    runtime = 0.0
    side = Path(str(path) + ".runtime")
    if side.exists():
        runtime = float(side.read_text().strip())
    return EvalReport(rows, runtime)

"""CSV and JSON reports for calibration, bootstrap and simulation results.

CSV reports open with ``# key=value`` comment lines (values JSON-encoded) that
echo the full configuration, followed by an ordinary header and data rows.
Floats are written with ``repr`` so re-reading reproduces them exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

_COLUMNS = {
    "calibration": ["ratio", "risk", "n_defined", "pvalue", "rejected"],
    "selective": ["threshold", "ratio", "risk", "n_defined", "abstention", "budget", "pvalue", "rejected"],
    "bootstrap": ["resample", "risk"],
    "simulation": ["trial", "selected", "violation"],
    "superuniform": ["u", "cdf", "bound"],
}


def _rows(payload: dict) -> list[dict]:
    if payload["kind"] == "bootstrap":
        return [{"resample": k, "risk": r} for k, r in enumerate(payload["risks"])]
    return payload["rows"]


def _meta(payload: dict) -> dict:
    meta = {"kind": payload["kind"], **payload.get("config", {})}
    for key in ("selected", "rejected", "guarantee", "ratio", "seed", "B", "point_risk",
                "trials", "violation_rate"):
        if key in payload:
            meta[key] = payload[key]
    return meta


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return json.dumps(list(value))
    return str(value)


def write_report(result, path, fmt: str | None = None) -> None:
    """Serialise any result object exposing ``to_dict()``.  Format from ``fmt`` or the suffix."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    payload = result.to_dict()
    if fmt == "json":
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    columns = _COLUMNS[payload["kind"]]
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key, value in _meta(payload).items():
            fh.write(f"# {key}={json.dumps(value)}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in _rows(payload):
            writer.writerow([_cell(row.get(c)) for c in columns])


def _parse(value: str):
    if value == "":
        return None
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def read_report_csv(path) -> tuple[dict, list[dict]]:
    """Return ``(meta, rows)`` from a CSV report."""
    meta: dict = {}
    lines = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                meta[key] = json.loads(value)
            else:
                lines.append(line)
    reader = csv.DictReader(lines)
    rows = [{k: _parse(v) for k, v in row.items()} for row in reader]
    return meta, rows


def write_summary(entries, path) -> None:
    """Table of ``(loss, pvalue, alpha, delta, selected ratio)``, one line per calibration."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss", "pvalue", "alpha", "delta", "lambda"])
        for result in entries:
            cfg = result.config
            writer.writerow([cfg.get("loss"), cfg.get("pvalue"), repr(cfg["alpha"]), repr(cfg["delta"]),
                             "" if result.selected is None else repr(result.selected)])

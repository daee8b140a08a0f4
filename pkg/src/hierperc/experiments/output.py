"""Write-once CSV and JSONL artifacts with a config header block."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

SCHEMA_VERSION = "1"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def header_lines(meta: dict) -> list:
    return [f"# {k}={v}" for k, v in meta.items()]


def write_csv(path, rows: list, meta: dict, columns: list | None = None) -> Path:
    """Rows of dicts under ``# key=value`` header lines; fails if ``path`` exists."""
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO(newline="")
    for line in header_lines({"schema_version": SCHEMA_VERSION, **meta}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    with open(path, "x", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_jsonl(path, records: list, meta: dict) -> Path:
    """First line is ``{"header": ...}``; one JSON object per following line."""
    path = Path(path)
    lines = [json.dumps({"header": {"schema_version": SCHEMA_VERSION, **meta}}, sort_keys=True)]
    lines.extend(json.dumps(rec, sort_keys=True) for rec in records)
    with open(path, "x", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple:
    """``(meta, rows)`` from a file produced by :func:`write_csv`; values stay strings."""
    meta = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def read_jsonl(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        recs = [json.loads(line) for line in fh if line.strip()]
    if recs and "header" in recs[0]:
        return recs[0]["header"], recs[1:]
    return {}, recs

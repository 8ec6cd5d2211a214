"""Line-delimited record persistence.

Every row carries a ``schema`` tag so files stay self-describing and
append-safe: appending rows never invalidates earlier ones, and readers can
check they are consuming the format they expect.  Row field order is fixed by
the writers, which keeps files byte-identical across repeated runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Mapping

__all__ = [
    "SCHEMAS",
    "write_jsonl",
    "append_jsonl",
    "read_jsonl",
    "write_json",
    "write_text",
]

SCHEMAS = {
    "trials": "trial/1",
    "profiles": "profile/1",
    "outcomes": "outcome/1",
    "report": "report/1",
    "budget_plan": "budget-plan/1",
    "tuning": "tuning/1",
    "verify": "verify/1",
}


def _dump(row: Mapping, schema: str) -> str:
    return json.dumps({"schema": schema, **row})


def write_jsonl(path: str | Path, rows: Iterable[Mapping], schema: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_dump(row, schema))
            fh.write("\n")
    return path


def append_jsonl(path: str | Path, rows: Iterable[Mapping], schema: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for row in rows:
            fh.write(_dump(row, schema))
            fh.write("\n")
    return path


def read_jsonl(path: str | Path, expect_schema: str | None = None) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            schema = row.pop("schema", None)
            if expect_schema is not None and schema != expect_schema:
                raise ValueError(
                    f"{path}:{line_no}: schema {schema!r}, expected {expect_schema!r}"
                )
            yield row


def write_json(path: str | Path, obj: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    return path


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path

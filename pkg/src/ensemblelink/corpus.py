"""Record ingestion and deterministic text normalization.

Datasets arrive as CSV (RFC 4180, UTF-8, header row) or JSONL (one object
per line). Every row becomes a Record with a stable 0-based id matching its
row position. Duplicate strings stay distinct records; records that are
empty after normalization are kept but flagged so retrieval can skip them.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError, SchemaError


def normalize_text(raw: str) -> str:
    """NFC-normalize, case fold, and collapse whitespace runs.

    Diacritics and non-Latin scripts are preserved. Iterates to a fixed
    point because case folding can denormalize certain composed
    characters; this makes the function idempotent for all inputs.
    """
    s = raw
    prev = None
    while s != prev:
        prev = s
        s = unicodedata.normalize("NFC", s).casefold()
        s = " ".join(s.split())
    return s


@dataclass(frozen=True)
class Record:
    id: int
    raw: str
    norm: str
    block_key: str | None = None
    extras: dict[str, str] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        """True when the record is blank after normalization (never retrievable)."""
        return self.norm == ""


@dataclass(frozen=True)
class RecordSet:
    records: list[Record]
    source_path: str
    role: str  # "query" | "reference"

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> Record:
        return self.records[i]

    @property
    def norms(self) -> list[str]:
        return [r.norm for r in self.records]


def make_record(idx: int, raw: str, block_key: str | None = None,
                extras: dict[str, str] | None = None) -> Record:
    return Record(id=idx, raw=raw, norm=normalize_text(raw),
                  block_key=block_key, extras=extras or {})


def record_set_from_strings(strings: list[str], role: str = "reference",
                            block_keys: list[str | None] | None = None) -> RecordSet:
    """Build an in-memory RecordSet; used by tests and synthetic tasks."""
    records = []
    for i, s in enumerate(strings):
        bk = block_keys[i] if block_keys is not None else None
        records.append(make_record(i, s, bk))
    return RecordSet(records=records, source_path="<memory>", role=role)


def load_records(path: str | Path, format: str, text_column: str,
                 block_column: str | None = None,
                 role: str = "reference") -> RecordSet:
    """Load one Record per data row, ids contiguous from 0 in file order."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    if format == "csv":
        records = _load_csv(path, text_column, block_column)
    elif format == "jsonl":
        records = _load_jsonl(path, text_column, block_column)
    else:
        raise InputError(f"unknown format {format!r} (expected csv or jsonl)")
    return RecordSet(records=records, source_path=str(path), role=role)


def _load_csv(path: Path, text_column: str, block_column: str | None) -> list[Record]:
    records: list[Record] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            return records
        if text_column not in header:
            raise SchemaError(f"column {text_column!r} not in header of {path}")
        if block_column is not None and block_column not in header:
            raise SchemaError(f"column {block_column!r} not in header of {path}")
        for rownum, row in enumerate(reader, start=2):  # row 1 is the header
            raw = row.get(text_column)
            if raw is None:
                raise InputError(f"{path}: malformed row {rownum - 1}")
            block = row.get(block_column) if block_column else None
            extras = {k: (v if v is not None else "")
                      for k, v in row.items() if k != text_column}
            records.append(make_record(len(records), raw, block, extras))
    return records


def _load_jsonl(path: Path, text_column: str, block_column: str | None) -> list[Record]:
    records: list[Record] = []
    with open(path, encoding="utf-8") as fh:
        for rownum, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: malformed row {rownum}: {exc}") from exc
            if not isinstance(obj, dict) or text_column not in obj:
                raise SchemaError(f"{path}: row {rownum} missing key {text_column!r}")
            raw = str(obj[text_column])
            block = obj.get(block_column) if block_column else None
            block = str(block) if block is not None else None
            extras = {k: str(v) for k, v in obj.items() if k != text_column}
            records.append(make_record(len(records), raw, block, extras))
    return records

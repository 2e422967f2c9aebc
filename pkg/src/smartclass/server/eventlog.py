"""Append-only event log with deterministic replay support.

On-disk format: a JSON header line {"format": "smartclass-eventlog",
"version": 1}, then one JSON record per line. Each record carries a dense
seq starting at 1 and a sha256 checksum over its canonical serialization, so
a single flipped byte is detected as CorruptRecord at that seq. Appends are
flushed and fsynced before the call returns.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

LOG_FORMAT = "smartclass-eventlog"
LOG_VERSION = 1


class EventLogError(Exception):
    pass


class StorageFailure(EventLogError):
    pass


class CorruptRecord(EventLogError):
    def __init__(self, seq: int, detail: str = ""):
        self.seq = seq
        super().__init__(f"corrupt record at seq {seq}: {detail}")


@dataclass(frozen=True)
class EventLogRecord:
    seq: int
    timestamp: int
    category: str
    kind: str
    payload: dict


def _canonical(record: EventLogRecord) -> bytes:
    return json.dumps(
        {
            "seq": record.seq,
            "timestamp": record.timestamp,
            "category": record.category,
            "kind": record.kind,
            "payload": record.payload,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")


def _checksum(record: EventLogRecord) -> str:
    return hashlib.sha256(_canonical(record)).hexdigest()


def _record_line(record: EventLogRecord) -> str:
    return json.dumps(
        {
            "seq": record.seq,
            "timestamp": record.timestamp,
            "category": record.category,
            "kind": record.kind,
            "payload": record.payload,
            "checksum": _checksum(record),
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def _parse_record(line: str, expected_seq: int) -> EventLogRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptRecord(expected_seq, f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CorruptRecord(expected_seq, "record is not an object")
    try:
        record = EventLogRecord(
            seq=obj["seq"],
            timestamp=obj["timestamp"],
            category=obj["category"],
            kind=obj["kind"],
            payload=obj["payload"],
        )
        stored_checksum = obj["checksum"]
    except KeyError as exc:
        raise CorruptRecord(expected_seq, f"missing field {exc}") from exc
    if record.seq != expected_seq:
        raise CorruptRecord(expected_seq, f"seq gap: found {record.seq}")
    if stored_checksum != _checksum(record):
        raise CorruptRecord(expected_seq, "checksum mismatch")
    return record


def read_log(path: str | Path) -> list[EventLogRecord]:
    """Read and verify a log file; raises CorruptRecord at the first bad seq."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EventLogError(f"{path}: missing header")
    header = json.loads(lines[0])
    if header.get("format") != LOG_FORMAT or header.get("version") != LOG_VERSION:
        raise EventLogError(f"{path}: unrecognized header {lines[0][:80]!r}")
    return [_parse_record(line, i) for i, line in enumerate(lines[1:], 1)]


class EventLog:
    """Single-writer append-only log; in-memory when no path is given."""

    def __init__(self, path: Optional[str | Path] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[EventLogRecord] = []
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            if self.path.exists() and self.path.stat().st_size > 0:
                self._records = read_log(self.path)
                self._fh = open(self.path, "a", encoding="utf-8")
            else:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self.path, "w", encoding="utf-8")
                self._fh.write(
                    json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION}, sort_keys=True) + "\n"
                )
                self._flush()

    def _flush(self) -> None:
        assert self._fh is not None
        try:
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    @property
    def records(self) -> list[EventLogRecord]:
        with self._lock:
            return list(self._records)

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._records[-1].seq if self._records else 0

    def append(self, category: str, kind: str, payload: dict, timestamp: int) -> EventLogRecord:
        """Assign the next dense seq and make the record durable before returning."""
        with self._lock:
            seq = (self._records[-1].seq if self._records else 0) + 1
            record = EventLogRecord(seq, int(timestamp), category, kind, payload)
            if self._fh is not None:
                try:
                    self._fh.write(_record_line(record) + "\n")
                except (OSError, ValueError) as exc:
                    raise StorageFailure(str(exc)) from exc
                self._flush()
            self._records.append(record)
            return record

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

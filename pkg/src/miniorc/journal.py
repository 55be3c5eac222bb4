"""Append-only command journal with checksummed records and state snapshots.

Every mutation record is one JSON line: sequence number, logical timestamp,
entity, operation, payload, and a sha256 over the canonical encoding of the
rest. Replaying the line sequence from empty reconstructs the exact state;
snapshots written every ``snapshot_every`` records only shortcut restarts.

Recovery distinguishes two kinds of damage. A torn tail (the last line is
truncated or fails its checksum, with nothing valid after it) is the expected
result of a crash mid-write and is silently dropped. A bad record with valid
records after it cannot come from a crash and raises JournalCorrupt naming
the damaged sequence number.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from miniorc.errors import MiniorcError

ENTITIES = (
    "deployment",
    "sla",
    "account",
    "dataset",
    "transfer",
    "site",
    "rules",
    "clock",
)


class JournalCorrupt(MiniorcError):
    code = "JOURNAL_CORRUPT"

    def __init__(self, sequence: int, message: str | None = None):
        self.sequence = sequence
        super().__init__(message or f"journal record {sequence} is corrupt")


def canonical(obj) -> str:
    """Deterministic JSON encoding: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def checksum(record: dict) -> str:
    body = {k: v for k, v in record.items() if k != "check"}
    return hashlib.sha256(canonical(body).encode("utf-8")).hexdigest()


class Journal:
    def __init__(self, directory: str | os.PathLike, snapshot_every: int = 1000):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / "journal.jsonl"
        self.snapshot_every = int(snapshot_every)
        self.sequence = 0  # last appended

    # -- writing ---------------------------------------------------------

    def append(self, entity: str, operation: str, payload: dict, at: float) -> dict:
        if entity not in ENTITIES:
            raise MiniorcError(f"unknown journal entity {entity!r}", code="BAD_ENTITY")
        record = {
            "seq": self.sequence + 1,
            "at": at,
            "entity": entity,
            "op": operation,
            "payload": payload,
            "request": f"req-{self.sequence + 1:06d}",
        }
        record["check"] = checksum(record)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(canonical(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.sequence = record["seq"]
        return record

    def write_snapshot(self, state: dict) -> Path:
        body = {"sequence": self.sequence, "state": state}
        body["check"] = checksum(body)
        path = self.dir / f"snapshot-{self.sequence:08d}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(canonical(body) + "\n", encoding="utf-8")
        tmp.replace(path)
        return path

    # -- reading ---------------------------------------------------------

    def records(self) -> list[dict]:
        """Load and verify every record, repairing a torn tail in place."""
        if not self.path.exists():
            self.sequence = 0
            return []
        raw = self.path.read_bytes()
        lines = raw.split(b"\n")
        good: list[dict] = []
        good_bytes = 0
        bad_at: int | None = None  # sequence number to blame
        for index, line in enumerate(lines):
            if not line:
                continue
            record = self._verify_line(line, expected=None)
            expected = len(good) + 1
            if record is not None and record["seq"] != expected:
                # An intact record out of sequence means lost lines, not a
                # torn write; nothing downstream can be trusted.
                raise JournalCorrupt(expected)
            if record is None:
                bad_at = expected
                # Damage is only tolerable at the very end of the file.
                for later in lines[index + 1 :]:
                    if later and self._verify_line(later, expected=None) is not None:
                        raise JournalCorrupt(bad_at)
                break
            good.append(record)
            good_bytes += len(line) + 1
        if bad_at is not None:
            with self.path.open("r+b") as fh:
                fh.truncate(good_bytes)
        self.sequence = good[-1]["seq"] if good else 0
        return good

    def _verify_line(self, line: bytes, expected: int | None) -> dict | None:
        try:
            record = json.loads(line.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return None
        if not isinstance(record, dict) or "check" not in record:
            return None
        if record.get("check") != checksum(record):
            return None
        if expected is not None and record.get("seq") != expected:
            return None
        return record

    def latest_snapshot(self) -> tuple[int, dict] | None:
        """Newest usable snapshot, or None when replay must start from empty.

        A snapshot ahead of the surviving journal tail is stale and skipped;
        an unreadable snapshot file is skipped the same way since the journal
        itself can always rebuild the state.
        """
        best: tuple[int, dict] | None = None
        for path in sorted(self.dir.glob("snapshot-*.json")):
            try:
                body = json.loads(path.read_text(encoding="utf-8"))
            except (ValueError, OSError):
                continue
            if not isinstance(body, dict) or body.get("check") != checksum(body):
                continue
            seq = body.get("sequence", -1)
            if not isinstance(seq, int) or seq > self.sequence:
                continue
            if best is None or seq > best[0]:
                best = (seq, body["state"])
        return best

    def raw_bytes(self) -> bytes:
        return self.path.read_bytes() if self.path.exists() else b""

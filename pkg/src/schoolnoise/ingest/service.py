from __future__ import annotations

import base64
import json
import logging
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..readings import NoiseReading
from ..rollup import Rollup
from .store import ReadingStore, StoredReading
from .validate import Rejected, validate_reading

log = logging.getLogger(__name__)

#: readings whose window closed this long before receipt count as late
LATE_AFTER_SECONDS = 300


@dataclass
class IngestStats:
    accepted: int = 0
    duplicates: int = 0
    rejected: int = 0
    late: int = 0

    @property
    def received(self) -> int:
        return self.accepted + self.duplicates + self.rejected


@dataclass
class IngestResult:
    accepted: int = 0
    duplicates: int = 0
    rejected: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"accepted": self.accepted, "duplicates": self.duplicates, "rejected": self.rejected}


def encode_cursor(key: tuple[int, str, int]) -> str:
    return base64.urlsafe_b64encode(json.dumps(list(key)).encode()).decode()


def decode_cursor(cursor: str) -> tuple[int, str, int]:
    try:
        ws, node, wsec = json.loads(base64.urlsafe_b64decode(cursor.encode()))
        return int(ws), str(node), int(wsec)
    except Exception as exc:
        raise ValueError("malformed cursor") from exc


class IngestService:
    """Validation, dedup, persistence and rollup behind one writer lock.

    Every write batch is committed before the lock is released, so readers
    always see the state as of the last completed batch.
    """

    def __init__(self, data_dir: str | Path | None = None, clock=time.time):
        self.store = ReadingStore(data_dir)
        self.rollup = Rollup(self.store)
        self.stats = IngestStats()
        self.clock = clock
        self.lock = threading.RLock()
        if data_dir is not None:
            Path(data_dir).mkdir(parents=True, exist_ok=True)
            self.rollup.apply_batch(self.store.load())

    def ingest(self, records: list) -> IngestResult:
        """Ingest one decoded POST body (a list of wire objects)."""
        now = self.clock()
        res = IngestResult()
        valid: list[tuple[int, NoiseReading]] = []
        for i, obj in enumerate(records):
            try:
                valid.append((i, validate_reading(obj, now)))
            except Rejected as exc:
                res.rejected.append({"index": i, "code": exc.code})
        inserted = []
        with self.lock:
            add = self.store.add
            late = 0
            for _, r in valid:
                if add(r, now):
                    inserted.append(r)
                    if r.window_start + r.window_seconds < now - LATE_AFTER_SECONDS:
                        late += 1
            self.store.commit()
            self.rollup.apply_batch(inserted)
            res.accepted = len(inserted)
            res.duplicates = len(valid) - len(inserted)
            self.stats.accepted += res.accepted
            self.stats.duplicates += res.duplicates
            self.stats.rejected += len(res.rejected)
            self.stats.late += late
        return res

    def ingest_readings(self, readings: list[NoiseReading]) -> IngestResult:
        """In-process path for already-typed readings (skips wire decoding)."""
        return self.ingest([r.to_wire() for r in readings])

    def query_readings(
        self,
        school_id: str,
        room_id: str | None,
        start: int,
        end: int,
        cursor: str | None = None,
        limit: int | None = None,
    ) -> tuple[list[StoredReading], str | None]:
        with self.lock:
            rows = self.store.query(school_id, room_id, start, end)
        if cursor is not None:
            after = decode_cursor(cursor)
            lo, hi = 0, len(rows)
            while lo < hi:
                mid = (lo + hi) // 2
                if rows[mid].sort_key() <= after:
                    lo = mid + 1
                else:
                    hi = mid
            rows = rows[lo:]
        next_cursor = None
        if limit is not None and len(rows) > limit:
            rows = rows[:limit]
            next_cursor = encode_cursor(rows[-1].sort_key())
        return rows, next_cursor

    def stats_json(self) -> dict:
        with self.lock:
            return asdict(self.stats) | {"stored": self.store.count}

    def close(self) -> None:
        with self.lock:
            self.store.commit()

"""
Time-partitioned reading storage.

One partition per (school, UTC day). Each partition is an append-only JSON
Lines file on disk and a set of packed columns in memory. A global key index
enforces uniqueness on (node_id, metric, window_start, window_seconds); the
metric is fixed, so it drops out of the packed key.
"""

from __future__ import annotations

import json
import logging
import os
from array import array
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Iterator
from urllib.parse import quote, unquote

import numpy as np

from ..readings import DAY, METRIC, NoiseReading, format_rfc3339

log = logging.getLogger(__name__)

_EPOCH = date(1970, 1, 1)


@dataclass(frozen=True)
class StoredReading:
    node_id: str
    school_id: str
    room_id: str
    window_start: int
    window_seconds: int
    value: float
    sample_count: int
    received_at: float
    metric: str = METRIC

    def sort_key(self) -> tuple[int, str, int]:
        return (self.window_start, self.node_id, self.window_seconds)

    def to_wire(self) -> dict:
        return {
            "node_id": self.node_id,
            "school_id": self.school_id,
            "room_id": self.room_id,
            "window_start": format_rfc3339(self.window_start),
            "window_seconds": self.window_seconds,
            "metric": self.metric,
            "value": self.value,
            "sample_count": self.sample_count,
            "received_at": format_rfc3339(int(self.received_at)),
        }


class Partition:
    """Packed columns for one school-day."""

    __slots__ = ("school_id", "day", "window_start", "window_seconds", "value", "sample_count", "node", "room", "received_at")

    def __init__(self, school_id: str, day: int):
        self.school_id = school_id
        self.day = day
        self.window_start = array("q")
        self.window_seconds = array("l")
        self.value = array("d")
        self.sample_count = array("l")
        self.node = array("l")
        self.room = array("l")
        self.received_at = array("d")

    def __len__(self):
        return len(self.window_start)

    def columns(self) -> dict[str, np.ndarray]:
        """Numpy copies of the columns (copies, so appends stay legal)."""
        return {
            "window_start": np.array(self.window_start, dtype=np.int64),
            "window_seconds": np.array(self.window_seconds, dtype=np.int64),
            "value": np.array(self.value, dtype=float),
            "sample_count": np.array(self.sample_count, dtype=np.int64),
            "node": np.array(self.node, dtype=np.int64),
            "room": np.array(self.room, dtype=np.int64),
        }


class ReadingStore:
    """Deduplicating, day-partitioned reading store.

    With ``data_dir=None`` nothing touches the disk. Writes are buffered per
    partition until :meth:`commit`.
    """

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self._strings: list[str] = []
        self._string_ids: dict[str, int] = {}
        self._partitions: dict[tuple[str, int], Partition] = {}
        self._by_school: dict[str, dict[int, Partition]] = defaultdict(dict)
        self._rooms: dict[str, set[str]] = defaultdict(set)
        # day -> packed key -> first-written value
        self._seen: dict[int, dict[int, float]] = defaultdict(dict)
        self._pending: dict[tuple[str, int], list[str]] = defaultdict(list)
        self.count = 0

    def intern(self, s: str) -> int:
        i = self._string_ids.get(s)
        if i is None:
            i = self._string_ids[s] = len(self._strings)
            self._strings.append(s)
        return i

    def string(self, i: int) -> str:
        return self._strings[i]

    def string_id(self, s: str) -> int | None:
        return self._string_ids.get(s)

    def _partition(self, school_id: str, day: int) -> Partition:
        p = self._partitions.get((school_id, day))
        if p is None:
            p = self._partitions[(school_id, day)] = Partition(school_id, day)
            self._by_school[school_id][day] = p
        return p

    def add(self, r: NoiseReading, received_at: float, persist: bool = True) -> bool:
        """Insert ``r``; False when its key already exists (first write wins)."""
        day, offset = divmod(r.window_start, DAY)
        node = self.intern(r.node_id)
        key = (node << 36) | (r.window_seconds << 18) | offset
        seen = self._seen[day]
        prior = seen.get(key)
        if prior is not None:
            if prior != r.value:
                log.info("conflicting duplicate for %s at %s: kept %r, ignored %r",
                         r.node_id, format_rfc3339(r.window_start), prior, r.value)
            return False
        seen[key] = r.value
        p = self._partition(r.school_id, day)
        p.window_start.append(r.window_start)
        p.window_seconds.append(r.window_seconds)
        p.value.append(r.value)
        p.sample_count.append(r.sample_count)
        p.node.append(node)
        p.room.append(self.intern(r.room_id))
        p.received_at.append(received_at)
        self._rooms[r.school_id].add(r.room_id)
        self.count += 1
        if persist and self.data_dir is not None:
            self._pending[(r.school_id, day)].append(
                json.dumps([r.node_id, r.room_id, r.window_start, r.window_seconds, r.value, r.sample_count, received_at],
                           separators=(",", ":"))
            )
        return True

    def _path(self, school_id: str, day: int) -> Path:
        d = _EPOCH + timedelta(days=day)
        return self.data_dir / quote(school_id, safe="") / f"{d.isoformat()}.jsonl"

    def commit(self) -> None:
        """Append buffered rows to their partition files and fsync."""
        if self.data_dir is None:
            return
        for (school, day), lines in self._pending.items():
            path = self._path(school, day)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write("\n".join(lines))
                fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())
        self._pending.clear()

    def load(self) -> Iterator[NoiseReading]:
        """Re-read every partition file, yielding the readings inserted."""
        if self.data_dir is None or not self.data_dir.exists():
            return
        for school_dir in sorted(p for p in self.data_dir.iterdir() if p.is_dir()):
            school = unquote(school_dir.name)
            for f in sorted(school_dir.glob("*.jsonl")):
                with open(f, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        node, room, ws, wsec, value, sc, recv = json.loads(line)
                        r = NoiseReading(node, school, room, ws, wsec, value, sc)
                        if self.add(r, recv, persist=False):
                            yield r

    # -- reads ---------------------------------------------------------------

    def schools(self) -> list[str]:
        return sorted(self._by_school)

    def rooms(self, school_id: str) -> list[str]:
        return sorted(self._rooms.get(school_id, ()))

    def partitions(self, school_id: str, start: int, end: int) -> list[Partition]:
        """Partitions of ``school_id`` that can hold window_start in [start, end)."""
        days = self._by_school.get(school_id)
        if not days:
            return []
        lo, hi = start // DAY, (end - 1) // DAY
        if hi - lo < len(days):
            return [days[d] for d in range(lo, hi + 1) if d in days]
        return [days[d] for d in sorted(days) if lo <= d <= hi]

    def all_partitions(self) -> Iterable[Partition]:
        return self._partitions.values()

    def rows(self, p: Partition, idx: Iterable[int] | None = None) -> Iterator[StoredReading]:
        s = self._strings
        for i in (range(len(p)) if idx is None else idx):
            yield StoredReading(
                node_id=s[p.node[i]],
                school_id=p.school_id,
                room_id=s[p.room[i]],
                window_start=p.window_start[i],
                window_seconds=p.window_seconds[i],
                value=p.value[i],
                sample_count=p.sample_count[i],
                received_at=p.received_at[i],
            )

    def query(self, school_id: str, room_id: str | None, start: int, end: int) -> list[StoredReading]:
        """Readings with window_start in [start, end), sorted by (start, node, window)."""
        if not start < end:
            raise ValueError("range start must precede range end")
        room = None
        if room_id is not None:
            room = self.string_id(room_id)
            if room is None:
                return []
        out: list[StoredReading] = []
        for p in self.partitions(school_id, start, end):
            ws = p.window_start
            idx = [i for i in range(len(p)) if start <= ws[i] < end and (room is None or p.room[i] == room)]
            out.extend(self.rows(p, idx))
        out.sort(key=StoredReading.sort_key)
        return out


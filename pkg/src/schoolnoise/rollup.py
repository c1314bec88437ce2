"""
Multi-granularity energetic aggregates (5-minute, hour, day).

Buckets keep the linear-domain energy sum so that combining is exact and
order-free; the level is derived on demand. Incremental state lives in
per-(scope, UTC day) numpy blocks; :meth:`Rollup.rebuild_bucket` recomputes
a single bucket from raw storage with plain Python as an independent check.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

import numpy as np

from .readings import DAY, NoiseReading, format_rfc3339

ALL_ROOMS = "ALL"


class Granularity(str, enum.Enum):
    FIVE_MIN = "five_min"
    HOUR = "hour"
    DAY = "day"

    @property
    def seconds(self) -> int:
        return _SECONDS[self]

    @property
    def per_day(self) -> int:
        return DAY // _SECONDS[self]

    def floor(self, epoch: int) -> int:
        s = _SECONDS[self]
        return epoch - epoch % s


_SECONDS = {Granularity.FIVE_MIN: 300, Granularity.HOUR: 3600, Granularity.DAY: DAY}

Scope = tuple[str, str]


@dataclass(frozen=True)
class AggregateBucket:
    scope: Scope
    granularity: Granularity
    bucket_start: int
    sample_count: int = 0
    energy_sum: float = 0.0
    min_db: float = math.inf
    max_db: float = -math.inf

    @property
    def leq(self) -> float | None:
        if self.sample_count == 0:
            return None
        return 10.0 * math.log10(self.energy_sum / self.sample_count)

    @property
    def is_empty(self) -> bool:
        return self.sample_count == 0

    @classmethod
    def empty(cls, scope: Scope, granularity: Granularity, bucket_start: int) -> "AggregateBucket":
        return cls(scope, Granularity(granularity), bucket_start)

    @classmethod
    def from_reading(cls, r: NoiseReading, scope: Scope, granularity: Granularity) -> "AggregateBucket":
        g = Granularity(granularity)
        return cls(scope, g, g.floor(r.window_start), r.sample_count,
                   r.sample_count * 10.0 ** (r.value / 10.0), r.value, r.value)

    def lift(self, granularity: Granularity) -> "AggregateBucket":
        """Same contents, re-keyed to the covering bucket of a coarser grain."""
        g = Granularity(granularity)
        return replace(self, granularity=g, bucket_start=g.floor(self.bucket_start))

    def to_json(self) -> dict:
        return {
            "bucket_start": format_rfc3339(self.bucket_start),
            "granularity": self.granularity.value,
            "sample_count": self.sample_count,
            "leq": self.leq,
            "min_db": self.min_db,
            "max_db": self.max_db,
        }


def combine(a: AggregateBucket, b: AggregateBucket) -> AggregateBucket:
    if a.scope != b.scope or a.granularity != b.granularity or a.bucket_start != b.bucket_start:
        raise ValueError("combine needs buckets with the same scope, granularity and start")
    return AggregateBucket(
        a.scope, a.granularity, a.bucket_start,
        a.sample_count + b.sample_count,
        a.energy_sum + b.energy_sum,
        min(a.min_db, b.min_db),
        max(a.max_db, b.max_db),
    )


def fold(buckets: Iterable[AggregateBucket], scope: Scope, granularity: Granularity, bucket_start: int) -> AggregateBucket:
    acc = AggregateBucket.empty(scope, granularity, bucket_start)
    for b in buckets:
        acc = combine(acc, b.lift(granularity))
    return acc


class _DayBlock:
    """Incremental accumulators for one scope over one UTC day."""

    __slots__ = ("count", "energy", "lo", "hi")

    def __init__(self):
        self.count = {g: np.zeros(g.per_day, dtype=np.int64) for g in Granularity}
        self.energy = {g: np.zeros(g.per_day) for g in Granularity}
        self.lo = {g: np.full(g.per_day, np.inf) for g in Granularity}
        self.hi = {g: np.full(g.per_day, -np.inf) for g in Granularity}

    def add(self, offset: np.ndarray, value: np.ndarray, count: np.ndarray, energy: np.ndarray):
        for g in Granularity:
            slot = offset // g.seconds
            np.add.at(self.count[g], slot, count)
            np.add.at(self.energy[g], slot, energy)
            np.minimum.at(self.lo[g], slot, value)
            np.maximum.at(self.hi[g], slot, value)


class Rollup:
    """Incrementally maintained buckets for room scopes and the school-wide scope.

    ``store`` is only needed for :meth:`rebuild_bucket`.
    """

    def __init__(self, store=None):
        self.store = store
        self._blocks: dict[tuple[str, str, int], _DayBlock] = {}
        self._scope_days: dict[Scope, set[int]] = defaultdict(set)

    def apply_reading(self, r: NoiseReading) -> set[tuple[Scope, Granularity, int]]:
        """Fold one newly inserted reading into its six covering buckets."""
        self.apply_batch([r])
        keys = set()
        for scope in ((r.school_id, r.room_id), (r.school_id, ALL_ROOMS)):
            for g in Granularity:
                keys.add((scope, g, g.floor(r.window_start)))
        return keys

    def apply_batch(self, readings: Iterable[NoiseReading]) -> int:
        groups: dict[tuple[str, str, int], list] = defaultdict(list)
        n = 0
        for r in readings:
            day, off = divmod(r.window_start, DAY)
            groups[(r.school_id, r.room_id, day)].append((off, r.value, r.sample_count))
            n += 1
        for (school, room, day), rows in groups.items():
            arr = np.array(rows, dtype=float)
            off = arr[:, 0].astype(np.int64)
            value = arr[:, 1]
            count = arr[:, 2].astype(np.int64)
            energy = count * 10.0 ** (value / 10.0)
            for scope_room in (room, ALL_ROOMS):
                key = (school, scope_room, day)
                block = self._blocks.get(key)
                if block is None:
                    block = self._blocks[key] = _DayBlock()
                    self._scope_days[(school, scope_room)].add(day)
                block.add(off, value, count, energy)
        return n

    def get_bucket(self, scope: Scope, granularity: Granularity, bucket_start: int) -> AggregateBucket | None:
        g = Granularity(granularity)
        day, off = divmod(bucket_start, DAY)
        block = self._blocks.get((scope[0], scope[1], day))
        if block is None:
            return None
        i = off // g.seconds
        return self._bucket(block, scope, g, day, i)

    def _bucket(self, block: _DayBlock, scope: Scope, g: Granularity, day: int, i: int) -> AggregateBucket | None:
        c = int(block.count[g][i])
        if c == 0:
            return None
        return AggregateBucket(scope, g, day * DAY + i * g.seconds, c, float(block.energy[g][i]),
                               float(block.lo[g][i]), float(block.hi[g][i]))

    def query_buckets(self, scope: Scope, granularity: Granularity, start: int, end: int) -> list[AggregateBucket]:
        """Non-empty buckets with bucket_start in [start, end), ascending."""
        if not start < end:
            raise ValueError("range start must precede range end")
        g = Granularity(granularity)
        out = []
        for day in sorted(d for d in self._scope_days.get(tuple(scope), ()) if start // DAY <= d <= (end - 1) // DAY):
            block = self._blocks[(scope[0], scope[1], day)]
            for i in np.flatnonzero(block.count[g]):
                b = self._bucket(block, tuple(scope), g, day, int(i))
                if start <= b.bucket_start < end:
                    out.append(b)
        return out

    def bucket_keys(self) -> Iterator[tuple[Scope, Granularity, int]]:
        for (school, room, day), block in self._blocks.items():
            for g in Granularity:
                for i in np.flatnonzero(block.count[g]):
                    yield (school, room), g, day * DAY + int(i) * g.seconds

    def rebuild_bucket(self, scope: Scope, granularity: Granularity, bucket_start: int) -> AggregateBucket | None:
        """Recompute one bucket from raw storage, reading by reading."""
        if self.store is None:
            raise RuntimeError("rebuild needs a backing store")
        g = Granularity(granularity)
        school, room = scope
        start, end = bucket_start, bucket_start + g.seconds
        acc = AggregateBucket.empty(tuple(scope), g, bucket_start)
        for p in self.store.partitions(school, start, end):
            for row in self.store.rows(p):
                if not start <= row.window_start < end:
                    continue
                if room != ALL_ROOMS and row.room_id != room:
                    continue
                e = row.sample_count * 10.0 ** (row.value / 10.0)
                acc = combine(acc, AggregateBucket(acc.scope, g, bucket_start, row.sample_count, e, row.value, row.value))
        return None if acc.is_empty else acc

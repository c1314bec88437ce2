"""The window aggregate that nodes send upstream, plus its wire encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from typing import Iterable
from zoneinfo import ZoneInfo

METRIC = "noise_leq_dba"
PRIVACY_FLOOR_SECONDS = 30
DAY = 86400

WIRE_FIELDS = (
    "node_id",
    "school_id",
    "room_id",
    "window_start",
    "window_seconds",
    "metric",
    "value",
    "sample_count",
)


def format_rfc3339(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_rfc3339(text: str) -> int:
    """Whole-second epoch from an RFC 3339 timestamp; offsets are honoured."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    ts = dt.timestamp()
    if ts != int(ts):
        raise ValueError("timestamps must be whole seconds")
    return int(ts)


def parse_instant(text: str) -> int:
    """RFC 3339 instant, or a bare ``YYYY-MM-DD`` taken as UTC midnight."""
    if len(text) == 10:
        d = date.fromisoformat(text)
        return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())
    return parse_rfc3339(text)


def local_to_epoch(day: date, tod: time | timedelta, tz: ZoneInfo) -> int:
    """Epoch of a local wall-clock time; ``timedelta`` may run past midnight."""
    if isinstance(tod, time):
        tod = timedelta(hours=tod.hour, minutes=tod.minute, seconds=tod.second)
    days, rem = divmod(int(tod.total_seconds()), DAY)
    d = day + timedelta(days=days)
    # aware + timedelta is wall-clock arithmetic; the offset follows the result
    wall = datetime(d.year, d.month, d.day, tzinfo=tz) + timedelta(seconds=rem)
    return int(wall.timestamp())


def parse_tod(text: str) -> time:
    return time.fromisoformat(text)


@dataclass(frozen=True, slots=True)
class NoiseReading:
    """One on-node window aggregate; the only thing a node ever transmits.

    ``window_start`` is integer seconds since the Unix epoch (UTC).
    """

    node_id: str
    school_id: str
    room_id: str
    window_start: int
    window_seconds: int
    value: float
    sample_count: int
    metric: str = METRIC

    def __post_init__(self):
        if self.window_seconds < PRIVACY_FLOOR_SECONDS:
            raise ValueError(f"window_seconds below privacy floor: {self.window_seconds}")
        if (self.window_start % DAY) % self.window_seconds:
            raise ValueError("window_start is not aligned to window_seconds")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if not math.isfinite(self.value):
            raise ValueError("value must be finite")

    @property
    def start_time(self) -> datetime:
        return datetime.fromtimestamp(self.window_start, timezone.utc)

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.node_id, self.metric, self.window_start, self.window_seconds)

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
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "NoiseReading":
        return cls(
            node_id=obj["node_id"],
            school_id=obj["school_id"],
            room_id=obj["room_id"],
            window_start=parse_rfc3339(obj["window_start"]),
            window_seconds=int(obj["window_seconds"]),
            metric=obj["metric"],
            value=float(obj["value"]),
            sample_count=int(obj["sample_count"]),
        )


def encode_batch(readings: Iterable[NoiseReading]) -> bytes:
    return json.dumps([r.to_wire() for r in readings], separators=(",", ":")).encode()


def dumps_line(reading: NoiseReading) -> str:
    return json.dumps(reading.to_wire(), separators=(",", ":"))

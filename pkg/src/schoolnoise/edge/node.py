"""Emulated classroom node: sample, calibrate, window, and hand off aggregates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from ..calib import SensorModel, apply_calibration, encode_raw
from ..readings import PRIVACY_FLOOR_SECONDS, NoiseReading
from .scenario import DEFAULT_TZ, ScenarioProfile, scenario_generate

MODES = ("energetic", "arithmetic")


def window_aggregate(samples: Sequence[float], mode: str = "energetic") -> float | None:
    """Average dBA over one window; ``None`` for an empty window.

    Energetic mode is the Leq, the level of the mean acoustic energy;
    arithmetic mode is the plain mean of the dB values.
    """
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if len(samples) == 0:
        return None
    if mode == "arithmetic":
        return math.fsum(samples) / len(samples)
    return 10.0 * math.log10(math.fsum(10.0 ** (s / 10.0) for s in samples) / len(samples))


def _windowed(t: np.ndarray, db: np.ndarray, window_seconds: int, mode: str):
    """Vectorised per-window aggregation; windows align to UTC midnight."""
    idx = np.floor(t / window_seconds).astype(np.int64)
    starts, first = np.unique(idx, return_index=True)
    counts = np.diff(np.append(first, idx.size))
    if mode == "arithmetic":
        vals = np.add.reduceat(db, first) / counts
    else:
        vals = 10.0 * np.log10(np.add.reduceat(10.0 ** (db / 10.0), first) / counts)
    return starts * window_seconds, vals, counts


@dataclass
class EdgeNode:
    node_id: str
    school_id: str
    room_id: str
    model: SensorModel
    profile: ScenarioProfile
    window_seconds: int = 300
    sample_hz: float = 1.0
    mode: str = "energetic"
    tz: str = DEFAULT_TZ

    def __post_init__(self):
        if self.window_seconds < PRIVACY_FLOOR_SECONDS:
            raise ValueError(f"window must be at least {PRIVACY_FLOOR_SECONDS} s")
        if self.mode not in MODES:
            raise ValueError(f"unknown aggregation mode {self.mode!r}")

    def raw_samples(self, day: date) -> tuple[np.ndarray, np.ndarray]:
        """Sensor output over a day. Stays on the node; never transmitted."""
        t, true_db = scenario_generate(self.profile, day, self.sample_hz, self.tz)
        # the transducer saturates at its range limits
        true_db = np.clip(true_db, self.model.range_min, self.model.range_max)
        return t, np.asarray(encode_raw(true_db, self.model))

    def readings_for_day(self, day: date) -> list[NoiseReading]:
        t, raw = self.raw_samples(day)
        db = np.asarray(apply_calibration(self.model, raw), dtype=float)
        starts, vals, counts = _windowed(t, db, self.window_seconds, self.mode)
        return [
            NoiseReading(
                node_id=self.node_id,
                school_id=self.school_id,
                room_id=self.room_id,
                window_start=int(s),
                window_seconds=self.window_seconds,
                value=float(v),
                sample_count=int(c),
            )
            for s, v, c in zip(starts, vals, counts)
        ]

    def readings(self, days: Iterable[date]) -> Iterable[NoiseReading]:
        for d in days:
            yield from self.readings_for_day(d)

"""Parametric school-day acoustic timeline used to drive emulated nodes."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, time, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from ..readings import local_to_epoch

DEFAULT_TZ = "Europe/Athens"

WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


def parse_weekdays(days) -> frozenset[int]:
    out = set()
    for d in days:
        if isinstance(d, int):
            if not 0 <= d <= 6:
                raise ValueError(f"weekday index out of range: {d}")
            out.add(d)
        else:
            out.add(WEEKDAYS.index(str(d).strip().lower()[:3]))
    return frozenset(out)


@dataclass(frozen=True)
class PeakEvent:
    """A burst that overrides the base level for ``seconds``.

    ``days`` restricts the event to some weekdays (0 = Monday); ``None``
    means every day. A ``dba`` of ``None`` takes the profile's peak level.
    """

    at: time
    seconds: int
    dba: float | None = None
    days: frozenset[int] | None = None

    def applies_on(self, day: date) -> bool:
        return self.days is None or day.weekday() in self.days


@dataclass(frozen=True)
class EveningActivity:
    start: time
    end: time
    dba: float


@dataclass(frozen=True)
class ScenarioProfile:
    night_baseline: float = 38.0
    staff_arrival: time = time(7, 0)
    student_arrival: time = time(8, 0)
    class_start: time = time(8, 10)
    class_end: time = time(14, 5)
    building_close: time = time(16, 0)
    class_level: float = 65.0
    peak_level: float = 72.0
    peak_events: tuple[PeakEvent, ...] = ()
    evening_activity: EveningActivity | None = None
    noise_jitter_sd: float = 1.5
    seed: int = 0
    # intermediate segments; None derives them from the night/class spread
    staff_level: float | None = None
    arrival_level: float | None = None
    after_class_level: float | None = None

    def __post_init__(self):
        if not self.night_baseline < self.class_level <= self.peak_level:
            raise ValueError("need night_baseline < class_level <= peak_level")
        order = (self.staff_arrival, self.student_arrival, self.class_start, self.class_end)
        if not all(a < b for a, b in zip(order, order[1:])) or not self.class_end <= self.building_close:
            raise ValueError("school-day times must be strictly ordered")
        if self.noise_jitter_sd < 0:
            raise ValueError("noise_jitter_sd must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "peak_events", tuple(self.peak_events))

    def _spread(self, frac: float) -> float:
        return self.night_baseline + frac * (self.class_level - self.night_baseline)

    @property
    def levels(self) -> dict[str, float]:
        return {
            "staff": self.staff_level if self.staff_level is not None else self._spread(0.2),
            "arrival": self.arrival_level if self.arrival_level is not None else self._spread(0.8),
            "after_class": self.after_class_level if self.after_class_level is not None else self._spread(0.25),
        }

    def segments(self, day: date, tz: ZoneInfo) -> list[tuple[int, int, float]]:
        """(start epoch, end epoch, dBA) overrides in application order."""
        def at(t):
            return local_to_epoch(day, t, tz)

        lv = self.levels
        segs = [
            (at(self.staff_arrival), at(self.student_arrival), lv["staff"]),
            (at(self.student_arrival), at(self.class_start), lv["arrival"]),
            (at(self.class_start), at(self.class_end), self.class_level),
            (at(self.class_end), at(self.building_close), lv["after_class"]),
        ]
        if self.evening_activity is not None:
            ev = self.evening_activity
            segs.append((at(ev.start), at(ev.end), ev.dba))
        for ev in self.peak_events:
            if ev.applies_on(day):
                t0 = at(ev.at)
                segs.append((t0, t0 + ev.seconds, ev.dba if ev.dba is not None else self.peak_level))
        return segs


def day_bounds(day: date, tz: ZoneInfo) -> tuple[int, int]:
    return local_to_epoch(day, time(0), tz), local_to_epoch(day + timedelta(days=1), time(0), tz)


def scenario_generate(
    profile: ScenarioProfile,
    day: date,
    sample_hz: float = 1.0,
    tz: str | ZoneInfo = DEFAULT_TZ,
) -> tuple[np.ndarray, np.ndarray]:
    """True sound level over one local day.

    Returns ``(t, level)``: sample instants in epoch seconds and the dBA the
    room actually produced at each. The draw depends only on the profile
    seed and the date, so reruns are identical.
    """
    if sample_hz < 0.2:
        raise ValueError("sample rate must be at least one sample per 5 s")
    tz = ZoneInfo(tz) if isinstance(tz, str) else tz
    start, end = day_bounds(day, tz)
    n = int(round((end - start) * sample_hz))
    t = start + np.arange(n, dtype=float) / sample_hz
    level = np.full(n, float(profile.night_baseline))
    for s0, s1, db in profile.segments(day, tz):
        i0, i1 = np.searchsorted(t, [s0, s1], side="left")
        level[i0:i1] = db
    if profile.noise_jitter_sd > 0:
        rng = np.random.default_rng([profile.seed, day.toordinal()])
        level += rng.normal(0.0, profile.noise_jitter_sd, n)
    return t, level

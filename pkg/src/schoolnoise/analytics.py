"""
School-hours exceedance reports, daily profiles, activity detection and
guideline findings.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from functools import cached_property
from statistics import median
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .edge.scenario import WEEKDAYS, parse_weekdays
from .readings import DAY, local_to_epoch
from .rollup import ALL_ROOMS, Granularity, Rollup

TABLE_THRESHOLDS = (40.0, 50.0, 60.0, 70.0, 80.0, 85.0)
SLOTS_PER_DAY = 288
SLOT_SECONDS = 300


class InsufficientBaseline(ValueError):
    """Too little night-time data to estimate the quiet baseline."""


@dataclass(frozen=True)
class SchoolHours:
    school_id: str = ""
    time_zone: str = "Europe/Athens"
    open: time = time(8, 0)
    close: time = time(16, 0)
    school_days: frozenset[int] = frozenset(range(5))

    def __post_init__(self):
        if not self.open < self.close:
            raise ValueError("school hours must open before they close")
        object.__setattr__(self, "school_days", frozenset(parse_weekdays(self.school_days)))

    @cached_property
    def tz(self) -> ZoneInfo:
        return ZoneInfo(self.time_zone)

    @property
    def minutes(self) -> float:
        o, c = self.open, self.close
        return (c.hour * 60 + c.minute + c.second / 60) - (o.hour * 60 + o.minute + o.second / 60)

    @property
    def period_label(self) -> str:
        return f"{self.open:%H:%M}-{self.close:%H:%M}"

    def _tod_bounds(self) -> tuple[int, int]:
        o, c = self.open, self.close
        return o.hour * 3600 + o.minute * 60 + o.second, c.hour * 3600 + c.minute * 60 + c.second

    def mask(self, epochs: np.ndarray) -> np.ndarray:
        """Boolean mask of instants that fall in school hours on a school day."""
        if epochs.size == 0:
            return np.zeros(0, dtype=bool)
        lo_t, hi_t = int(epochs.min()), int(epochs.max())
        off_lo = self._offset(lo_t)
        if off_lo == self._offset(hi_t):
            local = epochs + off_lo
        else:
            uniq, inv = np.unique(epochs, return_inverse=True)
            local = (uniq + np.array([self._offset(int(u)) for u in uniq]))[inv]
        tod = local % DAY
        # 1970-01-01 was a Thursday
        weekday = (local // DAY + 3) % 7
        lo, hi = self._tod_bounds()
        days = np.zeros(7, dtype=bool)
        days[list(self.school_days)] = True
        return (tod >= lo) & (tod < hi) & days[weekday]

    def _offset(self, epoch: int) -> int:
        return int(datetime.fromtimestamp(epoch, timezone.utc).astimezone(self.tz).utcoffset().total_seconds())

    def to_json(self) -> dict:
        return {
            "time_zone": self.time_zone,
            "open": f"{self.open:%H:%M}",
            "close": f"{self.close:%H:%M}",
            "school_days": [WEEKDAYS[d] for d in sorted(self.school_days)],
        }


@dataclass(frozen=True)
class ExceedanceReport:
    school_id: str
    room_id: str | None
    thresholds: tuple[float, ...]
    counts: tuple[int, ...]
    sample_count: int
    start: int
    end: int

    @property
    def is_empty(self) -> bool:
        return self.sample_count == 0

    @property
    def fractions(self) -> tuple[float, ...] | None:
        """Share of in-hours readings strictly above each threshold; None when empty."""
        if self.is_empty:
            return None
        return tuple(c / self.sample_count for c in self.counts)

    def fraction(self, threshold: float) -> float:
        fr = self.fractions
        if fr is None:
            raise ValueError("empty report has no fractions")
        try:
            return fr[self.thresholds.index(float(threshold))]
        except ValueError:
            raise KeyError(f"report lacks threshold {threshold}") from None


def _check_thresholds(thresholds: Sequence[float]) -> tuple[float, ...]:
    th = tuple(float(t) for t in thresholds)
    if not th or any(a >= b for a, b in zip(th, th[1:])):
        raise ValueError("thresholds must be non-empty and strictly ascending")
    return th


def exceedance_report(
    store,
    school_id: str,
    room_id: str | None,
    start: int,
    end: int,
    thresholds: Sequence[float] = TABLE_THRESHOLDS,
    hours: SchoolHours | None = None,
    window_seconds: int | None = None,
) -> ExceedanceReport:
    """Count in-hours readings above each threshold for one room (or all rooms).

    A reading belongs to school hours when its window start does. Only
    readings of ``window_seconds`` length count when that is given.
    """
    th = _check_thresholds(thresholds)
    if not start < end:
        raise ValueError("range start must precede range end")
    hours = hours or SchoolHours(school_id)
    tarr = np.asarray(th)
    counts = np.zeros(len(th), dtype=np.int64)
    n = 0
    room = None
    if room_id is not None and room_id != ALL_ROOMS:
        room = store.string_id(room_id)
        if room is None:
            return ExceedanceReport(school_id, room_id, th, (0,) * len(th), 0, start, end)
    for p in store.partitions(school_id, start, end):
        cols = p.columns()
        ws = cols["window_start"]
        m = (ws >= start) & (ws < end)
        if room is not None:
            m &= cols["room"] == room
        if window_seconds is not None:
            m &= cols["window_seconds"] == window_seconds
        if not m.any():
            continue
        m[m] = hours.mask(ws[m])
        vals = cols["value"][m]
        n += vals.size
        counts += (vals[:, None] > tarr[None, :]).sum(axis=0)
    return ExceedanceReport(school_id, room_id, th, tuple(int(c) for c in counts), n, start, end)


def minutes_above(fraction: float, hours: SchoolHours) -> float:
    """Minutes per school day implied by an exceedance fraction."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    return fraction * hours.minutes


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    fraction: float
    minutes_per_day: float


def who_assessment(report: ExceedanceReport, hours: SchoolHours) -> list[Finding]:
    """Health-guideline findings for one exceedance report."""
    needed = (40.0, 70.0, 85.0)
    missing = [t for t in needed if t not in report.thresholds]
    if missing:
        raise ValueError(f"report must include thresholds {missing}")
    if report.is_empty:
        return []
    out = []
    f85, f70, f40 = report.fraction(85), report.fraction(70), report.fraction(40)
    m85, m70 = minutes_above(f85, hours), minutes_above(f70, hours)
    if m85 > 0:
        out.append(Finding("exposure_85", "85 dBA exposure present", f85, m85))
    if m70 >= 60.0 - 1e-9:
        out.append(Finding("child_70", "child-guideline exceedance over 1 h/day", f70, m70))
    if f40 > 0:
        out.append(Finding("school_40", "40 dBA school guideline exceeded", f40, minutes_above(f40, hours)))
    return out


@dataclass(frozen=True)
class DailyProfile:
    school_id: str
    room_id: str
    date: date
    bins: tuple[float | None, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.bins) != SLOTS_PER_DAY:
            raise ValueError("a daily profile has exactly 288 slots")

    @staticmethod
    def slot_label(i: int) -> str:
        return f"{i // 12:02d}:{(i % 12) * 5:02d}"

    @staticmethod
    def slot_of(t: time) -> int:
        return (t.hour * 60 + t.minute) // 5

    def present(self) -> int:
        return sum(b is not None for b in self.bins)


def _slot_epochs(day: date, tz: ZoneInfo) -> list[int | None]:
    """UTC start of each local 5-min slot; None where the wall time does not exist."""
    out = []
    for i in range(SLOTS_PER_DAY):
        e = local_to_epoch(day, timedelta(seconds=i * SLOT_SECONDS), tz)
        back = datetime.fromtimestamp(e, tz)
        ok = back.date() == day and back.hour * 3600 + back.minute * 60 == i * SLOT_SECONDS
        out.append(e if ok else None)
    return out


def daily_profile(rollup: Rollup, school_id: str, room_id: str | None, day: date,
                  tz: str | ZoneInfo = "Europe/Athens") -> DailyProfile:
    """288 local five-minute levels for one day, taken from the 5-min rollups."""
    tz = ZoneInfo(tz) if isinstance(tz, str) else tz
    scope = (school_id, room_id or ALL_ROOMS)
    bins = []
    for e in _slot_epochs(day, tz):
        b = rollup.get_bucket(scope, Granularity.FIVE_MIN, e) if e is not None else None
        bins.append(b.leq if b is not None else None)
    return DailyProfile(school_id, scope[1], day, tuple(bins))


@dataclass(frozen=True)
class ActivityBounds:
    start_slot: int
    end_slot: int
    baseline: float

    @property
    def start(self) -> str:
        return DailyProfile.slot_label(self.start_slot)

    @property
    def end(self) -> str:
        return DailyProfile.slot_label(self.end_slot)


def detect_activity_bounds(
    profile: DailyProfile,
    rise_db: float = 10.0,
    min_run: int = 3,
    cutoff: time = time(18, 0),
    night: tuple[time, time] = (time(0, 0), time(5, 0)),
    min_night_slots: int = 36,
) -> ActivityBounds | None:
    """First and last slots of sustained activity above the night baseline.

    Runs are at least ``min_run`` consecutive slots louder than the night
    median plus ``rise_db``; only slots starting before ``cutoff`` count.
    """
    n0, n1 = DailyProfile.slot_of(night[0]), DailyProfile.slot_of(night[1])
    night_vals = [b for b in profile.bins[n0:n1] if b is not None]
    if len(night_vals) < min_night_slots:
        raise InsufficientBaseline(f"{len(night_vals)} night slots, need {min_night_slots}")
    baseline = median(night_vals)
    level = baseline + rise_db
    runs = []
    run_start = None
    limit = DailyProfile.slot_of(cutoff)
    for i in range(limit + 1):
        loud = i < limit and profile.bins[i] is not None and profile.bins[i] > level
        if loud and run_start is None:
            run_start = i
        elif not loud and run_start is not None:
            if i - run_start >= min_run:
                runs.append((run_start, i - 1))
            run_start = None
    if not runs:
        return None
    return ActivityBounds(runs[0][0], runs[-1][1], baseline)


# -- exports -------------------------------------------------------------------

def _pct_header(t: float) -> str:
    return f"pct_gt_{t:g}"


def exceedance_csv(rows: Iterable[tuple[ExceedanceReport, SchoolHours]],
                   thresholds: Sequence[float] = TABLE_THRESHOLDS) -> str:
    """Table-style CSV: one line per room, percentages to two decimals."""
    th = _check_thresholds(thresholds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["school", "room", *(_pct_header(t) for t in th), "time_period"])
    for rep, hours in rows:
        fr = rep.fractions
        cells = [""] * len(th) if fr is None else [f"{100.0 * rep.fraction(t):.2f}" for t in th]
        w.writerow([rep.school_id, rep.room_id or ALL_ROOMS, *cells, hours.period_label])
    return buf.getvalue()


def profile_csv(profile: DailyProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot_start_local", "leq_dba"])
    for i, b in enumerate(profile.bins):
        w.writerow([DailyProfile.slot_label(i), "" if b is None else f"{b:.2f}"])
    return buf.getvalue()


def findings_csv(rows: Iterable[tuple[ExceedanceReport, list[Finding]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["school", "room", "finding", "message", "pct", "minutes_per_day"])
    for rep, findings in rows:
        for f in findings:
            w.writerow([rep.school_id, rep.room_id or ALL_ROOMS, f.code, f.message,
                        f"{100.0 * f.fraction:.2f}", f"{f.minutes_per_day:.2f}"])
    return buf.getvalue()

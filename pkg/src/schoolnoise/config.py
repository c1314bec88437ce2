"""
Fleet configuration: schools, their hours, and one emulated node per room.

The on-disk format is YAML; ``configs/fleet_week.yaml`` is the reference
example. Quote every clock time (``"14:05"``): unquoted YAML 1.1 reads it as
a base-60 integer. Such integers are accepted as minutes after midnight.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import time
from pathlib import Path

import yaml

from .analytics import SchoolHours
from .calib import ElectretParams, LinearCalibration, SensorKind, SensorModel
from .edge.scenario import DEFAULT_TZ, EveningActivity, PeakEvent, ScenarioProfile, parse_weekdays

DEFAULT_ENDPOINT = "http://127.0.0.1:8080"


class ConfigError(ValueError):
    pass


def _tod(v, where: str) -> time:
    if isinstance(v, time):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        h, m = divmod(v, 60)
        return time(h, m)
    try:
        return time.fromisoformat(str(v))
    except ValueError:
        raise ConfigError(f"{where}: bad time of day {v!r}") from None


@dataclass(frozen=True)
class RoomConfig:
    room_id: str
    node_id: str
    sensor: SensorModel
    scenario: ScenarioProfile


@dataclass(frozen=True)
class SchoolConfig:
    school_id: str
    time_zone: str
    hours: SchoolHours
    rooms: tuple[RoomConfig, ...]


@dataclass(frozen=True)
class FleetConfig:
    schools: tuple[SchoolConfig, ...]
    endpoint: str = DEFAULT_ENDPOINT
    window_seconds: int = 300
    sample_hz: float = 1.0
    aggregation: str = "energetic"

    def __post_init__(self):
        ids = [s.school_id for s in self.schools]
        if len(set(ids)) != len(ids):
            raise ConfigError("school_id values must be unique")
        for s in self.schools:
            rids = [r.room_id for r in s.rooms]
            if len(set(rids)) != len(rids):
                raise ConfigError(f"{s.school_id}: room_id values must be unique")

    def hours_by_school(self) -> dict[str, SchoolHours]:
        return {s.school_id: s.hours for s in self.schools}

    @property
    def room_count(self) -> int:
        return sum(len(s.rooms) for s in self.schools)


def sensor_from_dict(d: dict, where: str = "sensor") -> SensorModel:
    d = dict(d)
    try:
        kind = SensorKind(str(d.pop("kind")).lower())
    except (KeyError, ValueError):
        raise ConfigError(f"{where}: kind must be one of {[k.value for k in SensorKind]}") from None
    rng = {k: float(d.pop(k)) for k in ("range_min", "range_max") if k in d}
    try:
        if kind is SensorKind.OPENJUMPER:
            e = {k: float(d.pop(k)) for k in ("sensitivity_S", "gain_G", "p_ref") if k in d}
            model = SensorModel.openjumper(ElectretParams(**e), **rng)
        elif kind is SensorKind.SEN0232:
            model = SensorModel(SensorKind.SEN0232, **rng)
        else:
            lin = None
            if "slope" in d or "intercept" in d:
                lin = LinearCalibration(float(d.pop("slope")), float(d.pop("intercept")))
            model = SensorModel.grove(lin, **rng) if kind is SensorKind.GROVE else SensorModel.sparkfun(lin, **rng)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if d:
        raise ConfigError(f"{where}: unknown keys {sorted(d)}")
    return model


def sensor_to_dict(m: SensorModel) -> dict:
    out: dict = {"kind": m.kind.value}
    if m.electret is not None:
        out.update(sensitivity_S=m.electret.sensitivity_S, gain_G=m.electret.gain_G, p_ref=m.electret.p_ref)
    if m.linear is not None:
        out.update(slope=m.linear.slope, intercept=m.linear.intercept)
    return out


_PROFILE_TIMES = ("staff_arrival", "student_arrival", "class_start", "class_end", "building_close")
_PROFILE_LEVELS = ("night_baseline", "class_level", "peak_level", "noise_jitter_sd",
                   "staff_level", "arrival_level", "after_class_level")


def scenario_from_dict(d: dict, where: str = "scenario") -> ScenarioProfile:
    d = dict(d)
    kw: dict = {}
    for k in _PROFILE_TIMES:
        if k in d:
            kw[k] = _tod(d.pop(k), f"{where}.{k}")
    for k in _PROFILE_LEVELS:
        if k in d:
            v = d.pop(k)
            kw[k] = None if v is None else float(v)
    if "seed" in d:
        kw["seed"] = int(d.pop("seed"))
    events = []
    for i, ev in enumerate(d.pop("peak_events", None) or ()):
        ev = dict(ev)
        try:
            events.append(PeakEvent(
                at=_tod(ev.pop("at"), f"{where}.peak_events[{i}].at"),
                seconds=int(ev.pop("seconds")),
                dba=None if ev.get("dba") is None else float(ev.pop("dba")),
                days=parse_weekdays(ev.pop("days")) if ev.get("days") is not None else None,
            ))
        except KeyError as exc:
            raise ConfigError(f"{where}.peak_events[{i}]: missing {exc}") from None
        ev.pop("dba", None)
        ev.pop("days", None)
        if ev:
            raise ConfigError(f"{where}.peak_events[{i}]: unknown keys {sorted(ev)}")
    kw["peak_events"] = tuple(events)
    evening = d.pop("evening_activity", None)
    if evening is not None:
        kw["evening_activity"] = EveningActivity(
            _tod(evening["start"], f"{where}.evening_activity.start"),
            _tod(evening["end"], f"{where}.evening_activity.end"),
            float(evening["dba"]),
        )
    if d:
        raise ConfigError(f"{where}: unknown keys {sorted(d)}")
    try:
        return ScenarioProfile(**kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def hours_from_dict(d: dict, school_id: str, tz: str, where: str) -> SchoolHours:
    d = d or {}
    try:
        return SchoolHours(
            school_id=school_id,
            time_zone=tz,
            open=_tod(d.get("open", "08:00"), f"{where}.open"),
            close=_tod(d.get("close", "16:00"), f"{where}.close"),
            school_days=parse_weekdays(d.get("days", ["mon", "tue", "wed", "thu", "fri"])),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def fleet_from_dict(doc: dict) -> FleetConfig:
    if not isinstance(doc, dict) or not isinstance(doc.get("schools"), list):
        raise ConfigError("config needs a top-level 'schools' list")
    schools = []
    for si, s in enumerate(doc["schools"]):
        where = f"schools[{si}]"
        try:
            sid = str(s["school_id"])
        except (KeyError, TypeError):
            raise ConfigError(f"{where}: missing school_id") from None
        tz = str(s.get("time_zone", DEFAULT_TZ))
        hours = hours_from_dict(s.get("hours"), sid, tz, f"{where}.hours")
        rooms = []
        for ri, r in enumerate(s.get("rooms") or ()):
            rw = f"{where}.rooms[{ri}]"
            if "room_id" not in r:
                raise ConfigError(f"{rw}: missing room_id")
            rid = str(r["room_id"])
            rooms.append(RoomConfig(
                room_id=rid,
                node_id=str(r.get("node_id", f"{sid}-{rid}")),
                sensor=sensor_from_dict(r.get("sensor") or {"kind": "sen0232"}, f"{rw}.sensor"),
                scenario=scenario_from_dict(r.get("scenario") or {}, f"{rw}.scenario"),
            ))
        schools.append(SchoolConfig(sid, tz, hours, tuple(rooms)))
    return FleetConfig(
        schools=tuple(schools),
        endpoint=str(doc.get("endpoint", DEFAULT_ENDPOINT)),
        window_seconds=int(doc.get("window_seconds", 300)),
        sample_hz=float(doc.get("sample_hz", 1.0)),
        aggregation=str(doc.get("aggregation", "energetic")),
    )


def load_fleet_config(path: str | Path) -> FleetConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return fleet_from_dict(doc)

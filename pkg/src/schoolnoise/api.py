"""HTTP/JSON surface: ingest, raw queries, aggregates and reports."""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from datetime import date

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.concurrency import run_in_threadpool

from .analytics import (
    TABLE_THRESHOLDS,
    SchoolHours,
    daily_profile,
    exceedance_report,
    who_assessment,
)
from .edge.scenario import parse_weekdays
from .ingest.service import IngestService
from .readings import format_rfc3339, parse_instant, parse_tod
from .rollup import ALL_ROOMS, Granularity

MAX_PAGE = 10_000


def _range(start: str, end: str) -> tuple[int, int]:
    try:
        a, b = parse_instant(start), parse_instant(end)
    except ValueError as exc:
        raise HTTPException(400, f"bad time: {exc}") from None
    if not a < b:
        raise HTTPException(400, "'from' must precede 'to'")
    return a, b


def _thresholds(text: str) -> tuple[float, ...]:
    try:
        th = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise HTTPException(400, "thresholds must be comma-separated numbers") from None
    if not th or any(a >= b for a, b in zip(th, th[1:])):
        raise HTTPException(400, "thresholds must be strictly ascending")
    return th


def create_app(service: IngestService, hours_by_school: dict[str, SchoolHours] | None = None) -> FastAPI:
    registry = dict(hours_by_school or {})

    @asynccontextmanager
    async def lifespan(app):
        yield
        service.close()

    app = FastAPI(title="schoolnoise", lifespan=lifespan)
    app.state.service = service

    def hours_for(school: str, tz: str | None, open_: str | None, close: str | None, days: str | None) -> SchoolHours:
        base = registry.get(school) or SchoolHours(school)
        try:
            return SchoolHours(
                school_id=school,
                time_zone=tz or base.time_zone,
                open=parse_tod(open_) if open_ else base.open,
                close=parse_tod(close) if close else base.close,
                school_days=parse_weekdays(days.split(",")) if days else base.school_days,
            )
        except (ValueError, KeyError) as exc:
            raise HTTPException(400, f"bad school hours: {exc}") from None

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/readings")
    async def post_readings(request: Request):
        try:
            body = json.loads(await request.body())
        except ValueError:
            raise HTTPException(400, "body is not JSON") from None
        if not isinstance(body, list):
            raise HTTPException(400, "body must be a JSON array")
        res = await run_in_threadpool(service.ingest, body)
        return res.to_json()

    @app.get("/v1/readings")
    def get_readings(
        school: str,
        from_: str = Query(..., alias="from"),
        to: str = Query(...),
        room: str | None = None,
        cursor: str | None = None,
        limit: int = Query(1000, ge=1, le=MAX_PAGE),
    ):
        start, end = _range(from_, to)
        try:
            rows, nxt = service.query_readings(school, room, start, end, cursor, limit)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        return {"readings": [r.to_wire() for r in rows], "next_cursor": nxt}

    @app.get("/v1/aggregates")
    def get_aggregates(
        school: str,
        granularity: Granularity,
        from_: str = Query(..., alias="from"),
        to: str = Query(...),
        room: str | None = None,
    ):
        start, end = _range(from_, to)
        with service.lock:
            buckets = service.rollup.query_buckets((school, room or ALL_ROOMS), granularity, start, end)
        return [b.to_json() for b in buckets]

    def _report(school, room, from_, to, thresholds, tz, open_, close, days):
        start, end = _range(from_, to)
        th = _thresholds(thresholds)
        hours = hours_for(school, tz, open_, close, days)
        with service.lock:
            rep = exceedance_report(service.store, school, room, start, end, th, hours)
        return rep, hours

    @app.get("/v1/reports/exceedance")
    def get_exceedance(
        school: str,
        from_: str = Query(..., alias="from"),
        to: str = Query(...),
        room: str | None = None,
        thresholds: str = ",".join(f"{t:g}" for t in TABLE_THRESHOLDS),
        tz: str | None = None,
        open: str | None = None,
        close: str | None = None,
        days: str | None = None,
    ):
        rep, hours = _report(school, room, from_, to, thresholds, tz, open, close, days)
        return {
            "school": school,
            "room": room,
            "from": format_rfc3339(rep.start),
            "to": format_rfc3339(rep.end),
            "thresholds": list(rep.thresholds),
            "fractions": None if rep.fractions is None else list(rep.fractions),
            "counts": list(rep.counts),
            "sample_count": rep.sample_count,
            "hours": hours.to_json(),
        }

    @app.get("/v1/reports/who")
    def get_who(
        school: str,
        from_: str = Query(..., alias="from"),
        to: str = Query(...),
        room: str | None = None,
        tz: str | None = None,
        open: str | None = None,
        close: str | None = None,
        days: str | None = None,
    ):
        th = ",".join(f"{t:g}" for t in TABLE_THRESHOLDS)
        rep, hours = _report(school, room, from_, to, th, tz, open, close, days)
        return {
            "school": school,
            "room": room,
            "sample_count": rep.sample_count,
            "findings": [f.__dict__ for f in who_assessment(rep, hours)],
        }

    @app.get("/v1/reports/profile")
    def get_profile(school: str, date_: str = Query(..., alias="date"), room: str | None = None, tz: str | None = None):
        try:
            day = date.fromisoformat(date_)
        except ValueError:
            raise HTTPException(400, "date must be YYYY-MM-DD") from None
        zone = tz or (registry[school].time_zone if school in registry else "Europe/Athens")
        with service.lock:
            prof = daily_profile(service.rollup, school, room, day, zone)
        return {"school": school, "room": prof.room_id, "date": day.isoformat(), "time_zone": zone,
                "bins": list(prof.bins)}

    @app.get("/v1/schools")
    def get_schools():
        with service.lock:
            return service.store.schools()

    @app.get("/v1/rooms")
    def get_rooms(school: str):
        with service.lock:
            return service.store.rooms(school)

    @app.get("/v1/stats")
    def get_stats():
        return service.stats_json()

    return app

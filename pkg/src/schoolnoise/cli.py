"""
Operator entry point.

    schoolnoise serve --port 8080 --data-dir ./data
    schoolnoise emulate --config configs/fleet_week.yaml --from 2019-03-11 --to 2019-03-15
    schoolnoise report --kind exceedance --from 2019-03-11 --to 2019-03-15 --out exceedance.csv
    schoolnoise replay --in readings.jsonl --endpoint http://127.0.0.1:8080

Exit codes: 0 success, 1 startup/config/connection error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import socket
import sys
from datetime import date, timedelta
from pathlib import Path

import httpx

from .analytics import (
    TABLE_THRESHOLDS,
    DailyProfile,
    ExceedanceReport,
    Finding,
    SchoolHours,
    exceedance_csv,
    findings_csv,
    profile_csv,
)
from .config import DEFAULT_ENDPOINT, ConfigError, FleetConfig, load_fleet_config
from .readings import parse_instant, parse_tod

log = logging.getLogger("schoolnoise")

EXIT_OK, EXIT_STARTUP, EXIT_DATA = 0, 1, 2


def make_client(endpoint: str) -> httpx.Client:
    """HTTP client used by report/replay; tests swap this for an in-process one."""
    return httpx.Client(base_url=endpoint, timeout=60.0)


def make_transport(endpoint: str):
    from .edge.uplink import HttpTransport

    return HttpTransport(endpoint)


def _err(msg: str) -> None:
    print(f"schoolnoise: {msg}", file=sys.stderr)


def _day(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _range_params(first: str, last: str) -> tuple[str, str]:
    """``--from``/``--to`` as query params; bare dates make ``--to`` inclusive."""
    start = first
    if len(last) == 10:
        end = (date.fromisoformat(last) + timedelta(days=1)).isoformat()
    else:
        end = last
    parse_instant(start), parse_instant(end)
    return start, end


# -- serve ---------------------------------------------------------------------

def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app
    from .ingest.service import IngestService

    data_dir = Path(args.data_dir)
    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        _err(f"data directory not writable: {exc}")
        return EXIT_STARTUP
    hours = {}
    if args.config:
        try:
            hours = load_fleet_config(args.config).hours_by_school()
        except ConfigError as exc:
            _err(str(exc))
            return EXIT_STARTUP
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((args.host, args.port))
    except OSError as exc:
        sock.close()
        _err(f"cannot bind {args.host}:{args.port}: {exc}")
        return EXIT_STARTUP
    service = IngestService(data_dir)
    app = create_app(service, hours)
    server = uvicorn.Server(uvicorn.Config(app, log_level=args.log_level))
    try:
        server.run(sockets=[sock])
    finally:
        service.close()
    return EXIT_OK


# -- emulate -------------------------------------------------------------------

def cmd_emulate(args) -> int:
    from .edge.fleet import date_range, run_fleet, write_offline

    try:
        config = load_fleet_config(args.config)
        days = date_range(args.from_, args.to)
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return EXIT_STARTUP
    if args.offline:
        if not args.out:
            _err("--offline needs --out FILE")
            return EXIT_STARTUP
        n = write_offline(config, days, args.out)
        print(json.dumps({"nodes": config.room_count, "days": len(days), "generated": n, "written": n}))
        return EXIT_OK
    endpoint = args.endpoint or config.endpoint
    summary = run_fleet(config, days, lambda: make_transport(endpoint), speed=args.speed,
                        workers=args.workers, flush_budget=args.retry_budget)
    print(json.dumps(summary.to_json()))
    if not summary.ok:
        _err(f"{summary.pending} readings undelivered to {endpoint} after retry budget")
        return EXIT_STARTUP
    return EXIT_OK


# -- report --------------------------------------------------------------------

def _hours_params(hours: SchoolHours | None) -> dict:
    if hours is None:
        return {}
    j = hours.to_json()
    return {"tz": j["time_zone"], "open": j["open"], "close": j["close"], "days": ",".join(j["school_days"])}


def _get(client: httpx.Client, path: str, params: dict):
    resp = client.get(path, params={k: v for k, v in params.items() if v is not None})
    if resp.status_code != 200:
        raise RuntimeError(f"GET {path} -> HTTP {resp.status_code}: {resp.text}")
    return resp.json()


def cmd_report(args) -> int:
    config: FleetConfig | None = None
    if args.config:
        try:
            config = load_fleet_config(args.config)
        except ConfigError as exc:
            _err(str(exc))
            return EXIT_STARTUP
    registry = config.hours_by_school() if config else {}
    endpoint = args.endpoint or (config.endpoint if config else DEFAULT_ENDPOINT)
    try:
        start, end = _range_params(args.from_, args.to)
    except ValueError as exc:
        _err(f"bad range: {exc}")
        return EXIT_DATA
    try:
        with make_client(endpoint) as client:
            text = _build_report(client, args, registry, config, start, end)
    except (httpx.HTTPError, RuntimeError) as exc:
        _err(f"service request failed: {exc}")
        return EXIT_STARTUP
    Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def _schools(client, args, config) -> list[str]:
    if args.school:
        return [args.school]
    if config is not None:
        return [s.school_id for s in config.schools]
    return _get(client, "/v1/schools", {})


def _rooms(client, args, school) -> list[str]:
    if args.room:
        return [args.room]
    return sorted(_get(client, "/v1/rooms", {"school": school}), key=_natural)


def _natural(s: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", s)]


def _build_report(client, args, registry, config, start, end) -> str:
    if args.kind == "profile":
        if not args.school:
            raise RuntimeError("profile reports need --school")
        day = args.from_[:10]
        tz = registry[args.school].time_zone if args.school in registry else None
        j = _get(client, "/v1/reports/profile", {"school": args.school, "room": args.room, "date": day, "tz": tz})
        prof = DailyProfile(args.school, j["room"], date.fromisoformat(day), tuple(j["bins"]))
        if prof.present() == 0:
            _err(f"warning: no data for {args.school} on {day}")
        return profile_csv(prof)

    rows, found = [], []
    for school in _schools(client, args, config):
        hours = registry.get(school)
        for room in _rooms(client, args, school):
            params = {"school": school, "room": room, "from": start, "to": end, **_hours_params(hours)}
            if args.kind == "exceedance":
                params["thresholds"] = ",".join(f"{t:g}" for t in TABLE_THRESHOLDS)
                j = _get(client, "/v1/reports/exceedance", params)
                rep = ExceedanceReport(school, room, tuple(j["thresholds"]), tuple(j["counts"]),
                                       j["sample_count"], parse_instant(start), parse_instant(end))
                if rep.is_empty:
                    continue
                h = j["hours"]
                rows.append((rep, hours or SchoolHours(school, h["time_zone"], parse_tod(h["open"]), parse_tod(h["close"]),
                                                      frozenset(h["school_days"]))))
            else:
                j = _get(client, "/v1/reports/who", params)
                if j["sample_count"] == 0:
                    continue
                rep = ExceedanceReport(school, room, TABLE_THRESHOLDS, (0,) * 6, j["sample_count"], 0, 1)
                found.append((rep, [Finding(**f) for f in j["findings"]]))
    if args.kind == "exceedance":
        if not rows:
            _err("warning: no in-hours data in range")
        return exceedance_csv(rows)
    if not found:
        _err("warning: no in-hours data in range")
    return findings_csv(found)


# -- replay --------------------------------------------------------------------

def cmd_replay(args) -> int:
    path = Path(args.in_)
    if not path.exists():
        _err(f"no such file: {path}")
        return EXIT_DATA
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                _err(f"{path}:{lineno}: invalid JSON: {exc}")
                return EXIT_DATA
            if not isinstance(obj, dict):
                _err(f"{path}:{lineno}: expected a JSON object")
                return EXIT_DATA
            records.append(obj)
    totals = {"total": len(records), "accepted": 0, "duplicates": 0, "rejected": 0}
    try:
        with make_client(args.endpoint) as client:
            for i in range(0, len(records), args.batch_size):
                resp = client.post("/v1/readings", json=records[i:i + args.batch_size])
                if resp.status_code != 200:
                    _err(f"POST /v1/readings -> HTTP {resp.status_code}: {resp.text}")
                    return EXIT_DATA
                j = resp.json()
                totals["accepted"] += j["accepted"]
                totals["duplicates"] += j["duplicates"]
                totals["rejected"] += len(j["rejected"])
    except httpx.HTTPError as exc:
        _err(f"cannot reach {args.endpoint}: {exc}")
        return EXIT_STARTUP
    print(json.dumps(totals))
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schoolnoise", description="School indoor-noise telemetry pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the ingest/query/report service")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--data-dir", required=True)
    s.add_argument("--config", help="fleet config supplying per-school hours")
    s.add_argument("--log-level", default="warning")
    s.set_defaults(func=cmd_serve)

    e = sub.add_parser("emulate", help="emulate a fleet of classroom nodes")
    e.add_argument("--config", required=True)
    e.add_argument("--from", dest="from_", type=_day, required=True)
    e.add_argument("--to", type=_day, required=True)
    e.add_argument("--speed", type=float, default=None,
                   help="real-time multiplier; omit to backfill as fast as possible")
    e.add_argument("--offline", action="store_true", help="write readings to --out instead of uplinking")
    e.add_argument("--out")
    e.add_argument("--endpoint", help="override the config's endpoint")
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--retry-budget", type=float, default=30.0, help="seconds to keep retrying at the end")
    e.set_defaults(func=cmd_emulate)

    r = sub.add_parser("report", help="write exceedance/profile/who CSV reports")
    r.add_argument("--kind", choices=("exceedance", "profile", "who"), required=True)
    r.add_argument("--school")
    r.add_argument("--room")
    r.add_argument("--from", dest="from_", required=True)
    r.add_argument("--to", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--config")
    r.add_argument("--endpoint", default=os.environ.get("SCHOOLNOISE_ENDPOINT"))
    r.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-ingest an offline readings file")
    rp.add_argument("--in", dest="in_", required=True)
    rp.add_argument("--endpoint", default=os.environ.get("SCHOOLNOISE_ENDPOINT", DEFAULT_ENDPOINT))
    rp.add_argument("--batch-size", type=int, default=1000)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Emulate the four-school fleet for the fixture week and print the exceedance table.

Runs emulate -> ingest -> rollup -> report in one process and compares each
cell against configs/exceedance_targets.csv.

    python scripts/reproduce_exceedance.py [--out results/exceedance.csv]
"""

import argparse
import csv
import io
import time
import warnings
from datetime import date
from pathlib import Path

# starlette nags about httpx at import time
warnings.filterwarnings("ignore", message=".*httpx2.*")
from fastapi.testclient import TestClient  # noqa: E402

from schoolnoise.analytics import TABLE_THRESHOLDS, exceedance_csv, exceedance_report
from schoolnoise.api import create_app
from schoolnoise.config import load_fleet_config
from schoolnoise.edge.fleet import date_range, run_fleet
from schoolnoise.edge.uplink import HttpTransport
from schoolnoise.ingest import IngestService
from schoolnoise.readings import local_to_epoch

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "fleet_week.yaml")
    ap.add_argument("--targets", default=ROOT / "configs" / "exceedance_targets.csv")
    ap.add_argument("--from", dest="first", default="2019-03-11")
    ap.add_argument("--to", dest="last", default="2019-03-15")
    ap.add_argument("--out", default=ROOT / "results" / "exceedance.csv")
    args = ap.parse_args()

    cfg = load_fleet_config(args.config)
    days = date_range(date.fromisoformat(args.first), date.fromisoformat(args.last))
    svc = IngestService()
    t = time.perf_counter()
    with TestClient(create_app(svc, cfg.hours_by_school())) as client:
        summary = run_fleet(cfg, days, lambda: HttpTransport("http://testserver", client=client), workers=1)
    rows = []
    for school in cfg.schools:
        start = local_to_epoch(days[0], school.hours.open, school.hours.tz) - 86400
        end = local_to_epoch(days[-1], school.hours.close, school.hours.tz) + 86400
        for room in school.rooms:
            rep = exceedance_report(svc.store, school.school_id, room.room_id, start, end,
                                    TABLE_THRESHOLDS, school.hours)
            rows.append((rep, school.hours))
    text = exceedance_csv(rows)
    elapsed = time.perf_counter() - t
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(text)

    with open(args.targets, newline="") as fh:
        targets = {(r["school"], r["room"]): r for r in csv.DictReader(fh)}
    cols = [f"pct_gt_{t:g}" for t in TABLE_THRESHOLDS]
    print(f"{summary.accepted} readings from {summary.nodes} nodes over {len(days)} days in {elapsed:.1f} s\n")
    print(f"{'school':<15}{'room':>5}  " + "".join(f"{c[4:]:>13}" for c in cols))
    worst = 0.0
    for row in csv.DictReader(io.StringIO(text)):
        want = targets[(row["school"], row["room"])]
        cells = []
        for c in cols:
            got, ref = float(row[c]), float(want[c])
            worst = max(worst, abs(got - ref))
            cells.append(f"{got:6.2f}/{ref:6.2f}")
        print(f"{row['school']:<15}{row['room']:>5}  " + "".join(f"{x:>13}" for x in cells))
    print(f"\nemulated/target percentages; worst cell deviation {worst:.2f} pp; wrote {args.out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Emulate one school day, print its 24-hour profile and the detected activity bounds.

    python scripts/daily_profile.py [--out results/daily_profile.csv] [--plot profile.png]

``--plot`` needs matplotlib, which is not a package dependency.
"""

import argparse
from datetime import date
from pathlib import Path

from schoolnoise.analytics import DailyProfile, daily_profile, detect_activity_bounds, profile_csv
from schoolnoise.config import load_fleet_config
from schoolnoise.edge.fleet import build_nodes
from schoolnoise.ingest import IngestService

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "school_day.yaml")
    ap.add_argument("--date", default="2021-05-12")
    ap.add_argument("--rise-db", type=float, default=10.0)
    ap.add_argument("--out", default=ROOT / "results" / "daily_profile.csv")
    ap.add_argument("--plot")
    args = ap.parse_args()

    cfg = load_fleet_config(args.config)
    day = date.fromisoformat(args.date)
    school = cfg.schools[0]
    svc = IngestService()
    for node in build_nodes(cfg):
        svc.ingest_readings(node.readings_for_day(day))
    prof = daily_profile(svc.rollup, school.school_id, None, day, school.time_zone)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(profile_csv(prof))

    for h in range(24):
        vals = [b for b in prof.bins[h * 12:(h + 1) * 12] if b is not None]
        bar = "#" * int(max(0.0, (max(vals) if vals else 0) - 30))
        print(f"{h:02d}:00  {sum(vals) / len(vals):5.1f}  {bar}" if vals else f"{h:02d}:00    -")
    bounds = detect_activity_bounds(prof, rise_db=args.rise_db)
    if bounds is None:
        print("\nno sustained activity detected")
    else:
        print(f"\nnight baseline {bounds.baseline:.1f} dBA; activity {bounds.start} to "
              f"{DailyProfile.slot_label(bounds.end_slot + 1)} (last active slot {bounds.end})")
    print(f"wrote {args.out}")

    if args.plot:
        import matplotlib.pyplot as plt

        x = [i / 12 for i in range(288)]
        y = [float("nan") if b is None else b for b in prof.bins]
        fig, ax = plt.subplots(figsize=(9, 3.5))
        ax.plot(x, y)
        ax.set(xlabel=f"local time ({school.time_zone})", ylabel="Leq, dBA", xlim=(0, 24))
        ax.set_xticks(range(0, 25, 2))
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)


if __name__ == "__main__":
    main()

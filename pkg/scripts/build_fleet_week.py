#!/usr/bin/env python3
"""Generate configs/fleet_week.yaml from configs/exceedance_targets.csv.

Each room's in-hours time is split into level bands between the report
thresholds. Band sizes are the target percentages rounded to whole 5-minute
slots over the five-day fixture week, so the emulated week reproduces each
target to within half a slot. Every band sits at least 2.5 dB from the
nearest threshold, well clear of window-level jitter.

    python scripts/build_fleet_week.py [--targets CSV] [--out YAML]
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from datetime import datetime, timedelta
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
THRESHOLDS = (40, 50, 60, 70, 80, 85)
# one level inside each band: <=40, (40,50], ..., (80,85], >85
BAND_LEVELS = (36.0, 45.0, 55.0, 65.0, 75.0, 82.5, 88.0)
# loud bands first so they land early in the day
BAND_ORDER = (6, 5, 4, 3, 2, 1, 0)
WEEK_DAYS = ("mon", "tue", "wed", "thu", "fri")
NIGHT = 32.0
JITTER_SD = 1.0


def band_counts(pcts: list[float], n_slots: int) -> list[int]:
    above = [round(p / 100.0 * n_slots) for p in pcts]
    edges = [n_slots, *above, 0]
    return [edges[i] - edges[i + 1] for i in range(len(BAND_LEVELS))]


def room_schedule(counts: list[int], slots_per_day: int, open_hm: str):
    """Base class level plus weekday-restricted events for the other bands."""
    class_band = max(range(len(counts)), key=lambda b: (counts[b], b))
    n_days = len(WEEK_DAYS)
    open_t = datetime.strptime(open_hm, "%H:%M")
    events = defaultdict(list)
    for d in range(n_days):
        cursor = 0
        for b in BAND_ORDER:
            if b == class_band or counts[b] == 0:
                continue
            c = counts[b] // n_days + (1 if d < counts[b] % n_days else 0)
            if c == 0:
                continue
            at = (open_t + timedelta(minutes=5 * cursor)).strftime("%H:%M")
            events[(at, c * 300, BAND_LEVELS[b])].append(WEEK_DAYS[d])
            cursor += c
        assert cursor <= slots_per_day
    return BAND_LEVELS[class_band], sorted(events.items())


def render(targets: list[dict]) -> str:
    lines = [
        "# Four-school fleet tuned to reproduce the per-room exceedance table.",
        "# Generated by scripts/build_fleet_week.py; emulate the week",
        "# 2019-03-11 .. 2019-03-15 (Mon-Fri) to reproduce it.",
        "endpoint: http://127.0.0.1:8080",
        "window_seconds: 300",
        "sample_hz: 1.0",
        "aggregation: energetic",
        "schools:",
    ]
    by_school: dict[str, list[dict]] = defaultdict(list)
    for row in targets:
        by_school[row["school"]].append(row)
    seed = 1000
    for school, rows in by_school.items():
        open_hm, close_hm = rows[0]["time_period"].split("-")
        close_t = datetime.strptime(close_hm, "%H:%M")
        minutes = (close_t - datetime.strptime(open_hm, "%H:%M")).seconds // 60
        slots_per_day = minutes // 5
        n_slots = slots_per_day * len(WEEK_DAYS)
        lines += [
            f"  - school_id: {school}",
            "    time_zone: Europe/Athens",
            f'    hours: {{open: "{open_hm}", close: "{close_hm}", days: [mon, tue, wed, thu, fri]}}',
            "    rooms:",
        ]
        for row in rows:
            pcts = [float(row[f"pct_gt_{t}"]) for t in THRESHOLDS]
            class_level, events = room_schedule(band_counts(pcts, n_slots), slots_per_day, open_hm)
            peak = max([class_level, *(lvl for (_, _, lvl), _ in events)])
            seed += 1
            lines += [
                f'      - room_id: "{row["room"]}"',
                "        sensor: {kind: sen0232}",
                "        scenario:",
                f"          night_baseline: {NIGHT}",
                '          staff_arrival: "07:00"',
                '          student_arrival: "07:45"',
                f'          class_start: "{open_hm}"',
                f'          class_end: "{close_hm}"',
                f'          building_close: "{(close_t + timedelta(minutes=30)):%H:%M}"',
                f"          class_level: {class_level}",
                f"          peak_level: {peak}",
                f"          noise_jitter_sd: {JITTER_SD}",
                f"          seed: {seed}",
            ]
            if events:
                lines.append("          peak_events:")
                for (at, secs, lvl), days in events:
                    lines.append(f'            - {{at: "{at}", seconds: {secs}, dba: {lvl}, days: [{", ".join(days)}]}}')
            else:
                lines.append("          peak_events: []")
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--targets", default=ROOT / "configs" / "exceedance_targets.csv")
    ap.add_argument("--out", default=ROOT / "configs" / "fleet_week.yaml")
    args = ap.parse_args()
    with open(args.targets, newline="") as fh:
        targets = list(csv.DictReader(fh))
    Path(args.out).write_text(render(targets))
    print(f"wrote {args.out} ({len(targets)} rooms)")


if __name__ == "__main__":
    main()

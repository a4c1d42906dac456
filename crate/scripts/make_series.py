"""Writes a small synthetic hourly series (load MW per bus, wind and solar
availability per generator) for the six-bus fixture."""

import argparse
import csv
import datetime as dt
import math
import random
from pathlib import Path

LOAD_MW = {2: 120.0, 4: 80.0, 5: 200.0, 6: 60.0}
WIND_GENS = [2]
SOLAR_GENS = [3]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--days", type=int, default=14)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    start = dt.datetime(2022, 7, 1)
    rows_load, rows_wind, rows_solar = [], [], []
    for d in range(args.days):
        windy = d % 3 != 0
        heat = 1.0 + 0.08 * rng.random()
        for h in range(24):
            ts = (start + dt.timedelta(days=d, hours=h)).strftime("%Y-%m-%d %H:%M")
            shape = 0.75 + 0.25 * math.sin(math.pi * (h - 6) / 16) if 6 <= h <= 22 else 0.7
            rows_load.append([ts] + [f"{mw * shape * heat:.3f}" for mw in LOAD_MW.values()])
            base = 0.55 if windy else 0.15
            w = min(1.0, max(0.0, base + 0.25 * math.cos(math.pi * h / 12) + 0.05 * rng.uniform(-1, 1)))
            rows_wind.append([ts] + [f"{w:.4f}" for _ in WIND_GENS])
            s = max(0.0, math.sin(math.pi * (h - 6) / 13)) if 6 <= h <= 19 else 0.0
            s *= 0.8 + 0.2 * rng.random()
            rows_solar.append([ts] + [f"{s:.4f}" for _ in SOLAR_GENS])

    def write(name, ids, rows):
        with open(args.out / name, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["timestamp"] + [str(i) for i in ids])
            w.writerows(rows)

    write("load.csv", LOAD_MW.keys(), rows_load)
    write("wind.csv", WIND_GENS, rows_wind)
    write("solar.csv", SOLAR_GENS, rows_solar)


if __name__ == "__main__":
    main()

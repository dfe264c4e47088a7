#!/usr/bin/env python3
"""Desk-scale simulator experiment: Poisson workloads on a 16x16 switch under the three policies.

Writes the per-trial CSV and the per-(policy, M, T) summary, then prints the
observed ratios against the LP bounds and which policy did best per cell.

    python scripts/desk_experiment.py --out results/
    FLOWSCHED_WORKERS=4 python scripts/desk_experiment.py --horizons 10 12
"""
import argparse
import logging
import time
from collections import defaultdict
from pathlib import Path

from flowsched.sim import aggregate, desk_grid, run_experiment, write_results_csv, write_summary_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--rates", type=float, nargs="+", default=[8, 16, 32])
    ap.add_argument("--horizons", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--no-lp-bounds", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    configs = desk_grid(args.m, args.rates, args.horizons, args.seeds)
    t0 = time.perf_counter()
    results = run_experiment(configs, with_bounds=not args.no_lp_bounds)
    logging.info("%d trials in %.1fs", len(results), time.perf_counter() - t0)

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "desk_results.csv", "w", newline="") as fh:
        write_results_csv(results, fh)
    rows = aggregate(results)
    with open(args.out / "desk_summary.csv", "w", newline="") as fh:
        write_summary_csv(rows, fh)

    if args.no_lp_bounds:
        return
    low = [r for r in results if r.avg_ratio is not None and (r.avg_ratio < 1 - 1e-6 or r.max_ratio < 1)]
    print(f"trials below the LP bound: {len(low)}")
    print(f"{'policy':<10}{'M':>4}{'T':>4}{'avg_ratio':>11}{'max_ratio':>11}")
    cells = defaultdict(list)
    for row in rows:
        print(f"{row['policy']:<10}{row['M']:>4g}{row['T']:>4}{row['avg_ratio']:>11.3f}{row['max_ratio']:>11.3f}")
        cells[row["M"], row["T"]].append(row)
    print("\nbest policy per cell (avg / max):")
    for (M, T), rs in sorted(cells.items()):
        a = min(rs, key=lambda r: r["avg_ratio"])["policy"]
        b = min(rs, key=lambda r: r["max_ratio"])["policy"]
        print(f"  M={M:g} T={T}: {a} / {b}")
    print(f"\navg ratios within 2: {all(r['avg_ratio'] <= 2 for r in rows)}")
    print(f"max ratios within 2.5: {all(r['max_ratio'] <= 2.5 for r in rows)}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Run every policy against both adaptive adversaries and tabulate what they force.

For the average-response adversary the table compares each policy's total
response with MT - T^2/4 and with 2T + (M - T)(ceil(T/2) + 1), the total the
construction provably forces. Small traces also get the brute-force optimum.
"""
import argparse
import math
import sys
from pathlib import Path

from flowsched.core import response_metrics
from flowsched.gen import gadget_avg_lower, gadget_max_lower
from flowsched.mrt import solve_mrt
from flowsched.online import ALL_POLICIES, run_online

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from oracles import min_total_response  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", nargs="+", default=["2:8", "3:12", "4:16", "4:32", "6:30", "8:64"],
                    help="T:M pairs")
    ap.add_argument("--opt-limit", type=int, default=12, help="brute-force OPT up to this many flows")
    args = ap.parse_args()

    print(f"{'T':>3}{'M':>4}  {'policy':<10}{'total':>7}{'MT-T^2/4':>10}{'forced':>8}{'opt':>6}")
    for pair in args.pairs:
        T, M = map(int, pair.split(":"))
        stated = M * T - T * T / 4
        forced = 2 * T + (M - T) * (math.ceil(T / 2) + 1)
        for p in ALL_POLICIES:
            run = run_online(gadget_avg_lower(T, M), p)
            total = response_metrics(run.instance, run.schedule).total
            opt = min_total_response(run.instance) if run.instance.n <= args.opt_limit else ""
            print(f"{T:>3}{M:>4}  {p.value:<10}{total:>7}{stated:>10g}{forced:>8}{opt:>6}")

    print("\nmax-response adversary:")
    for p in ALL_POLICIES:
        run = run_online(gadget_max_lower(), p)
        rho, _ = solve_mrt(run.instance)
        print(f"  {p.value:<10} max response {response_metrics(run.instance, run.schedule).maximum}, offline {rho}")


if __name__ == "__main__":
    main()

"""Command-line entry point: ``flowsched <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from . import art, gen, mrt, online, sim
from .core import (
    InstanceError,
    dumps,
    instance_to_dict,
    load_instance,
    response_metrics,
    schedule_to_dict,
    validate_schedule,
)

log = logging.getLogger("flowsched")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


@contextmanager
def _open_out(path: str):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_json(obj: dict, path: str) -> None:
    with _open_out(path) as fh:
        fh.write(dumps(obj))


def _schedule_order(inst):
    return [f.id for f in inst.flows]


# commands


def cmd_gen(args) -> None:
    if args.kind == "random":
        inst = gen.random_instance(args.m, args.m_prime or args.m, args.n, args.d_max,
                                   args.horizon, args.seed, args.max_capacity)
    elif args.kind == "tcfs":
        inst = gen.random_tcfs(args.m, args.n, args.d_max, args.horizon, args.seed)
    elif args.kind == "poisson":
        inst = sim.poisson_workload(sim.WorkloadConfig(args.m, args.rate, args.horizon, args.seed))
    elif args.kind == "rtt":
        if not args.rtt:
            raise CliError("--rtt FILE is required for --kind rtt")
        inst, _rho = gen.rtt_reduce(gen.load_rtt(args.rtt))
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown kind {args.kind}")
    _write_json(instance_to_dict(inst), args.output)


def cmd_solve_art(args) -> None:
    inst = load_instance(args.instance)
    if args.lp_dump:
        bound = art.art_lp_bound(inst, args.horizon)
        with open(args.lp_dump, "w") as fh:
            bound.model.write_lp(fh)
    res = art.solve_art(inst, c=args.augment, horizon=args.horizon, trace_path=args.trace)
    verdict = validate_schedule(inst, res.schedule, lambda p: args.augment * inst.switch.capacity(p))
    if not verdict.valid:
        raise CliError("schedule failed validation: " + "; ".join(verdict.violations[:3]))
    rep = response_metrics(inst, res.schedule)
    _write_json(schedule_to_dict(res.schedule, _schedule_order(inst)), args.output)
    summary = {
        "lp_lower_bound": round(res.lp_lower_bound, 9),
        "total_response": rep.total,
        "avg_response": rep.average,
        "max_response": rep.maximum,
        "augmentation": res.augmentation,
        "window": res.window,
        "colors": res.colors,
        "backlog": res.backlog,
        "iterations": res.pseudo.iterations,
    }
    _write_json(summary, args.summary)


def cmd_solve_mrt(args) -> None:
    inst = load_instance(args.instance)
    if args.tcfs:
        mrt.require_active(inst)
        if args.lp_dump:
            with open(args.lp_dump, "w") as fh:
                mrt.build_tcfs_lp(inst).write_lp(fh)
        ok, rounded = mrt.solve_tcfs(inst)
        if not ok:
            _write_json({"feasible": False}, args.summary)
            return
        checked, rho = inst, None
    else:
        rho, rounded = mrt.solve_mrt(inst)
        checked = mrt.with_windows(inst, rho) if inst.n else inst
        if args.lp_dump and inst.n:
            with open(args.lp_dump, "w") as fh:
                mrt.build_tcfs_lp(checked).write_lp(fh)
    sched = rounded.schedule()
    verdict = validate_schedule(checked, sched, 2 * inst.d_max - 1)
    if not verdict.valid:
        raise CliError("schedule failed validation: " + "; ".join(verdict.violations[:3]))
    _write_json(schedule_to_dict(sched, _schedule_order(inst)), args.output)
    summary = {
        "feasible": True,
        "rho_star": rho,
        "max_response": response_metrics(inst, sched).maximum,
        "d_max": inst.d_max,
        "allowed_overload": 2 * inst.d_max - 1,
        "max_overload": rounded.max_overload,
        "overloads": [
            {"port": str(p), "round": t, "excess": v} for (p, t), v in sorted(rounded.overload.items())
        ],
    }
    _write_json(summary, args.summary)


def _policies(names) -> list[online.Policy]:
    if not names or "all" in [n.lower() for n in names]:
        return list(online.ALL_POLICIES)
    return [online.Policy.parse(n) for n in names]


def cmd_simulate(args) -> None:
    policies = _policies(args.policy)
    configs = [sim.WorkloadConfig(args.m, M, T, s)
               for M in args.rate for T in args.horizon for s in range(args.seed, args.seed + args.seeds)]
    results = sim.run_experiment(configs, policies, with_bounds=not args.no_lp_bounds, timing=args.timing)
    with _open_out(args.output) as fh:
        sim.write_results_csv(results, fh)
    if args.decision_log:
        out = Path(args.decision_log)
        out.mkdir(parents=True, exist_ok=True)
        for cfg in configs:
            inst = sim.poisson_workload(cfg)
            for p in policies:
                run = online.run_online(inst, p)
                name = f"{p.value}_m{cfg.m}_M{cfg.M:g}_T{cfg.T}_s{cfg.seed}.csv"
                with open(out / name, "w", newline="") as fh:
                    online.write_decision_log(run, fh)


def cmd_bound(args) -> None:
    inst = load_instance(args.instance)
    b = art.art_lp_bound(inst, args.horizon)
    if args.lp_dump:
        with open(args.lp_dump, "w") as fh:
            b.model.write_lp(fh)
    out = {
        "n": inst.n,
        "lp_total_bound": round(b.value, 9),
        "lp_avg_bound": round(b.value / inst.n, 9) if inst.n else 0.0,
        "horizon": b.horizon,
        "certified": b.certified,
        "rho_star": mrt.min_feasible_rho(inst),
    }
    if all(f.demand == 1 for f in inst.flows):
        out["lp0"] = round(art.lp0_value(inst), 9)
    _write_json(out, args.output)


def cmd_report(args) -> None:
    results = []
    for path in args.csv:
        with open(path, newline="") as fh:
            results.extend(sim.read_results_csv(fh))
    rows = sim.aggregate(results)
    with _open_out(args.output) as fh:
        sim.write_summary_csv(rows, fh)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flowsched", description="Flow scheduling on capacitated switches.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write an instance JSON")
    g.add_argument("--kind", choices=["random", "tcfs", "poisson", "rtt"], default="random")
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--m-prime", type=int, default=None)
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--d-max", type=int, default=1)
    g.add_argument("--max-capacity", type=int, default=1)
    g.add_argument("--horizon", type=int, default=4, help="release range, or rounds for tcfs/poisson")
    g.add_argument("--rate", type=float, default=4.0, help="Poisson mean (poisson kind)")
    g.add_argument("--rtt", help="timetable JSON (rtt kind)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", default="-")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("solve-art", help="average response: LP bound, rounding, augmented schedule")
    a.add_argument("instance")
    a.add_argument("--augment", type=int, default=1, help="extra capacity factor c >= 1")
    a.add_argument("--horizon", type=int, default=None)
    a.add_argument("--trace", help="write the rounding trace (JSON lines)")
    a.add_argument("--lp-dump", help="write the lower-bound LP in LP format")
    a.add_argument("-o", "--output", default="-", help="schedule JSON")
    a.add_argument("--summary", default="-", help="summary JSON")
    a.set_defaults(func=cmd_solve_art)

    r = sub.add_parser("solve-mrt", help="max response: binary search plus additive rounding")
    r.add_argument("instance")
    r.add_argument("--tcfs", action="store_true", help="use the flows' active sets as given")
    r.add_argument("--lp-dump")
    r.add_argument("-o", "--output", default="-")
    r.add_argument("--summary", default="-")
    r.set_defaults(func=cmd_solve_mrt)

    s = sub.add_parser("simulate", help="Poisson workloads under online policies")
    s.add_argument("--m", type=int, default=16)
    s.add_argument("--rate", type=float, nargs="+", default=[8.0])
    s.add_argument("--horizon", type=int, nargs="+", default=[20])
    s.add_argument("--policy", nargs="+", default=["all"])
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--no-lp-bounds", action="store_true")
    s.add_argument("--timing", action="store_true", help="fill runtime_ms (breaks byte-identical output)")
    s.add_argument("--decision-log", help="directory for per-run decision CSVs")
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bound", help="LP lower bounds only")
    b.add_argument("instance")
    b.add_argument("--horizon", type=int, default=None)
    b.add_argument("--lp-dump")
    b.add_argument("-o", "--output", default="-")
    b.set_defaults(func=cmd_bound)

    rp = sub.add_parser("report", help="mean per (policy, M, T) over result CSVs")
    rp.add_argument("csv", nargs="+")
    rp.add_argument("-o", "--output", default="-")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "augment", 1) < 1:
        _emit_error("usage", "--augment must be >= 1")
        return 2
    try:
        args.func(args)
    except (CliError, InstanceError, ValueError, OSError, RuntimeError, KeyError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Round-based simulator: Poisson workloads, online policies, LP lower bounds, CSV results."""
from __future__ import annotations

import csv
import io
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Iterable, Sequence

import numpy as np

from .art import art_lower_bound
from .core import FlowRequest, Instance, SwitchSpec, response_metrics, validate_schedule
from .mrt import min_feasible_rho
from .online import ALL_POLICIES, Policy, run_online

WORKERS_ENV = "FLOWSCHED_WORKERS"

CSV_COLUMNS = (
    "policy", "m", "M", "T", "seed", "avg_response", "max_response",
    "lp_avg_bound", "lp_max_bound", "avg_ratio", "max_ratio", "runtime_ms",
)
SUMMARY_COLUMNS = (
    "policy", "m", "M", "T", "trials", "avg_response", "max_response",
    "lp_avg_bound", "lp_max_bound", "avg_ratio", "max_ratio",
)


@dataclass(frozen=True)
class WorkloadConfig:
    m: int = 16
    M: float = 8
    T: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.M < 0 or self.T < 1:
            raise ValueError("need m >= 1, M >= 0, T >= 1")


def poisson_workload(cfg: WorkloadConfig) -> Instance:
    """Unit flows; Poisson(M) arrivals per round for T rounds; uniform endpoints."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    flows = []
    for t in range(cfg.T):
        for k in range(int(rng.poisson(cfg.M))):
            flows.append(FlowRequest(f"t{t}n{k}", int(rng.integers(cfg.m)), int(rng.integers(cfg.m)), 1, t))
    return Instance(SwitchSpec.uniform(cfg.m), tuple(flows))


@dataclass
class TrialResult:
    policy: str
    m: int
    M: float
    T: int
    seed: int
    avg_response: float
    max_response: int
    lp_avg_bound: float | None = None   # per-flow average of the LP total
    lp_max_bound: int | None = None
    avg_ratio: float | None = None
    max_ratio: float | None = None
    runtime_ms: float | None = None
    n_flows: int = 0


@dataclass(frozen=True)
class Bounds:
    total: float
    rho: int


def instance_bounds(inst: Instance) -> Bounds:
    return Bounds(art_lower_bound(inst), min_feasible_rho(inst))


def run_trial(inst: Instance, policy: Policy, cfg: WorkloadConfig | None = None,
              bounds: Bounds | None = None, timing: bool = False) -> TrialResult:
    cfg = cfg or WorkloadConfig(inst.switch.m, 0, 1, 0)
    t0 = time.perf_counter()
    run = run_online(inst, policy)
    verdict = validate_schedule(inst, run.schedule)
    if not verdict.valid:
        raise RuntimeError(f"{policy.value} produced an invalid schedule: {verdict.violations[0]}")
    rep = response_metrics(inst, run.schedule)
    res = TrialResult(policy.value, cfg.m, cfg.M, cfg.T, cfg.seed, rep.average, rep.maximum, n_flows=inst.n)
    if bounds is not None and inst.n:
        res.lp_avg_bound = bounds.total / inst.n
        res.lp_max_bound = bounds.rho
        res.avg_ratio = rep.total / bounds.total
        res.max_ratio = rep.maximum / bounds.rho
    if timing:
        res.runtime_ms = (time.perf_counter() - t0) * 1000.0
    return res


def _trial_group(args) -> list[TrialResult]:
    cfg, policies, with_bounds, timing = args
    inst = poisson_workload(cfg)
    bounds = instance_bounds(inst) if with_bounds and inst.n else None
    return [run_trial(inst, p, cfg, bounds, timing) for p in policies]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(configs: Sequence[WorkloadConfig], policies: Sequence[Policy] = ALL_POLICIES,
                   with_bounds: bool = True, timing: bool = False,
                   workers: int | None = None) -> list[TrialResult]:
    """All (config, policy) trials, ordered by (policy, M, T, seed) whatever the worker count."""
    jobs = [(cfg, tuple(policies), with_bounds, timing) for cfg in configs]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(_trial_group, jobs))
    else:
        groups = [_trial_group(j) for j in jobs]
    order = {p.value: k for k, p in enumerate(policies)}
    results = [r for g in groups for r in g]
    results.sort(key=lambda r: (order[r.policy], r.M, r.T, r.seed))
    return results


def desk_grid(m: int = 16, rates=(8, 16, 32), horizons=(10, 20), seeds: int = 10) -> list[WorkloadConfig]:
    return [WorkloadConfig(m, M, T, s) for M in rates for T in horizons for s in range(seeds)]


def _fmt(v, column: str = "") -> str:
    if v is None:
        return ""
    if column == "M":
        return f"{v:g}"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_results_csv(results: Iterable[TrialResult], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        d = asdict(r)
        w.writerow([_fmt(d[c], c) for c in CSV_COLUMNS])


def results_to_csv(results: Iterable[TrialResult]) -> str:
    buf = io.StringIO()
    write_results_csv(results, buf)
    return buf.getvalue()


def _num(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return float(s)


def read_results_csv(fh) -> list[TrialResult]:
    reader = csv.DictReader(fh)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"results CSV lacks columns {sorted(missing)}")
    out = []
    for row in reader:
        vals = {c: (row[c] if c == "policy" else _num(row[c])) for c in CSV_COLUMNS}
        out.append(TrialResult(**vals))
    return out


def aggregate(results: Sequence[TrialResult]) -> list[dict]:
    """Mean of every metric per (policy, M, T); a metric missing in any trial stays blank."""
    if not results:
        raise ValueError("nothing to aggregate")
    groups = defaultdict(list)
    for r in results:
        groups[r.policy, r.m, r.M, r.T].append(r)
    rows = []
    for (policy, m, M, T), rs in groups.items():
        row = {"policy": policy, "m": m, "M": M, "T": T, "trials": len(rs)}
        for c in SUMMARY_COLUMNS[5:]:
            vals = [getattr(r, c) for r in rs]
            row[c] = None if any(v is None for v in vals) else fmean(vals)
        rows.append(row)
    return rows


def write_summary_csv(rows: Sequence[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c], c) for c in SUMMARY_COLUMNS])

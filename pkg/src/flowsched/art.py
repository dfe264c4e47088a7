"""Offline average-response-time pipeline.

1. ``art_lower_bound``: per-round LP whose optimum lower-bounds the total
   response time of any integral schedule.
2. ``iterative_round``: interval LP relaxations solved repeatedly; flows
   whose LP value is already integral get fixed, zero variables are dropped
   and capacity rows are regrouped into intervals of volume about 4 c_p.
   The result is a pseudo-schedule that may overload ports by an additive
   backlog.
3. ``pseudo_to_schedule``: cut time into windows of length h, edge-color each
   window's flows (after port replication) and execute the color classes in
   the next window with capacity (1 + c) c_p.
"""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import INPUT, OUTPUT, Instance, IntegralSchedule, PortId, validate_schedule
from .lp import GE, LE, INTEGRALITY_TOL, BasicSolution, LpError, LpModel, is_vertex, solve_min
from .matching import BipartiteMultigraph, edge_color_bipartite, expand_to_unit_graph

log = logging.getLogger(__name__)

WINDOW = 4  # LP(0) aggregates capacity over windows of this many rounds
_VERTEX_CHECK_LIMIT = 400  # rank-check LP solutions with at most this many vars


class HorizonError(ValueError):
    """Horizon too short for any feasible fractional schedule."""


class RoundingError(RuntimeError):
    pass


class PackingError(RuntimeError):
    pass


@dataclass
class FractionalAssignment:
    values: dict[tuple[str, int], float]
    horizon: int

    def volume(self, fid: str) -> float:
        return sum(v for (e, _), v in self.values.items() if e == fid)


@dataclass
class IterationRecord:
    level: int
    n_flows: int               # |F(level)|
    n_vars: int
    n_rows: int
    objective: float
    fixed_cost_before: float   # cost of flows fixed in earlier levels
    fixed: list[str]           # flows integral in this level's solution
    tight_rows: int
    group_sizes: list[tuple[str, float]] = field(default_factory=list)  # groups built for next level
    loads: dict[PortId, np.ndarray] | None = None  # Vol per round at this level

    def to_json(self) -> str:
        return json.dumps({
            "iteration": self.level,
            "n_flows": self.n_flows,
            "n_vars": self.n_vars,
            "objective": round(self.objective, 9),
            "fixed": self.fixed,
            "tight_rows": self.tight_rows,
            "groups": [[p, round(s, 9)] for p, s in self.group_sizes],
        })


@dataclass
class PseudoSchedule:
    assignment: dict[str, int]
    backlog: int
    cost: float
    lp0_value: float
    horizon: int
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace)


@dataclass
class ArtResult:
    lp_lower_bound: float
    pseudo: PseudoSchedule
    schedule: IntegralSchedule
    augmentation: int
    window: int      # h
    colors: int      # d, largest number of matchings in any window
    backlog: int     # B


@dataclass
class LpBound:
    value: float
    horizon: int
    solution: BasicSolution
    model: LpModel
    certified: bool


def _check_horizon(inst: Instance, H: int) -> None:
    if inst.n == 0:
        return
    if H < inst.max_release + 1:
        raise HorizonError(f"horizon {H} ends before the last release {inst.max_release}")
    # volume released at or after s must fit in [s, H) at every port
    per_port = defaultdict(list)
    for f in inst.flows:
        for p in f.ports:
            per_port[p].append((f.release, f.demand))
    for p, items in per_port.items():
        cap = inst.switch.capacity(p)
        items.sort(reverse=True)
        vol = 0
        for r, d in items:
            vol += d
            if vol > cap * (H - r):
                raise HorizonError(f"horizon {H} too short for port {p}")


def _frac_cost(inst: Instance, f, t: int, tail: float) -> float:
    return (t - f.release) / f.demand + tail


def build_art_lp(inst: Instance, horizon: int) -> LpModel:
    """Per-round LP: b[e,t] >= 0, sum_t b >= d_e, per-port per-round load <= c_p."""
    _check_horizon(inst, horizon)
    model = LpModel(name="art")
    rows = defaultdict(dict)
    for f in inst.flows:
        tail = 1.0 / (2 * inst.kappa(f))
        cols = {}
        for t in range(f.release, horizon):
            j = model.add_var(f"b[{f.id},{t}]", _frac_cost(inst, f, t, tail), key=(f.id, t))
            cols[j] = 1.0
            for p in f.ports:
                rows[p, t][j] = 1.0
        model.add_constraint(cols, GE, f.demand, f"demand[{f.id}]", key=("flow", f.id))
    for (p, t), coefs in sorted(rows.items()):
        model.add_constraint(coefs, LE, inst.switch.capacity(p), f"cap[{p},{t}]", key=("cap", p, t))
    return model


def build_lp0(inst: Instance, horizon: int) -> LpModel:
    """Interval LP: capacity summed over windows [4k, 4k+4) with right side 4 c_p."""
    _check_horizon(inst, horizon)
    model = LpModel(name="lp0")
    rows = defaultdict(dict)
    for f in inst.flows:
        cols = {}
        for t in range(f.release, horizon):
            j = model.add_var(f"b[{f.id},{t}]", _frac_cost(inst, f, t, 0.5), key=(f.id, t))
            cols[j] = 1.0
            for p in f.ports:
                rows[p, t // WINDOW][j] = 1.0
        model.add_constraint(cols, GE, f.demand, f"demand[{f.id}]", key=("flow", f.id))
    for (p, a), coefs in sorted(rows.items()):
        model.add_constraint(
            coefs, LE, WINDOW * inst.switch.capacity(p), f"cap[{p},w{a}]", key=("cap", p, a)
        )
    return model


def _start_horizon(inst: Instance) -> int:
    load = defaultdict(int)
    for f in inst.flows:
        for p in f.ports:
            load[p] += f.demand
    span = max((math.ceil(v / inst.switch.capacity(p)) for p, v in load.items()), default=0)
    return inst.max_release + span + 1


def art_lp_bound(inst: Instance, horizon: int | None = None, method: str = "auto") -> LpBound:
    """Solve the per-round LP.

    With ``horizon=None`` the horizon is grown until the duals certify that
    rounds past it cannot lower the optimum: every flow's demand shadow price
    must not exceed the cost coefficient of its first missing round.
    """
    fixed = horizon is not None
    H = horizon if fixed else _start_horizon(inst)
    while True:
        model = build_art_lp(inst, H)
        sol = solve_min(model, method)
        if not sol.optimal:
            raise HorizonError(f"per-round LP is {sol.status} at horizon {H}")
        if inst.n == 0:
            return LpBound(0.0, H, sol, model, True)
        certified = True
        for c, y in zip(model.constraints, sol.duals):
            if c.key[0] != "flow":
                continue
            f = inst.flow(c.key[1])
            if y > _frac_cost(inst, f, H, 1.0 / (2 * inst.kappa(f))) + 1e-7:
                certified = False
                break
        if certified or fixed:
            return LpBound(sol.objective, H, sol, model, certified)
        H = 2 * H


def art_lower_bound(inst: Instance, horizon: int | None = None, method: str = "auto") -> float:
    return art_lp_bound(inst, horizon, method).value


def lp0_value(inst: Instance, horizon: int | None = None, method: str = "auto") -> float:
    H = inst.default_horizon() if horizon is None else horizon
    sol = solve_min(build_lp0(inst, H), method)
    if not sol.optimal:
        raise HorizonError(f"LP(0) is {sol.status} at horizon {H}")
    return sol.objective


def pseudo_cost(inst: Instance, assignment: dict[str, int]) -> float:
    return sum(
        ((assignment[f.id] - f.release) / f.demand + 0.5) * f.demand for f in inst.flows
    )


def port_round_loads(inst: Instance, assignment: dict[str, int], horizon: int) -> dict[PortId, np.ndarray]:
    loads = {p: np.zeros(horizon) for p in inst.switch.ports()}
    for fid, t in assignment.items():
        f = inst.flow(fid)
        for p in f.ports:
            loads[p][t] += f.demand
    return loads


def measure_backlog(inst: Instance, assignment: dict[str, int]) -> int:
    """max over ports and intervals of (assigned volume - c_p * length), at least 0."""
    if not assignment:
        return 0
    H = max(assignment.values()) + 1
    worst = 0.0
    for p, load in port_round_loads(inst, assignment, H).items():
        cap = inst.switch.capacity(p)
        run = 0.0
        for v in load - cap:  # Kadane
            run = max(v, run + v)
            worst = max(worst, run)
    return int(round(worst))


def _tight_cap_rows(model: LpModel, sol: BasicSolution) -> int:
    act = model.row_activity(sol.x)
    return sum(
        1 for c, a in zip(model.constraints, act)
        if c.key[0] == "cap" and a >= c.rhs - 1e-7 * max(1.0, abs(c.rhs))
    )


def _build_groups(inst: Instance, support: dict[tuple[str, int], float]) -> list[tuple[PortId, list, float]]:
    """Consecutive-by-round groups of support variables per port, each of volume >= 4 c_p.

    A short tail is merged into the previous group. A port whose support fits
    into one group gets no row: that row would only restate the demand rows.
    """
    by_port = defaultdict(list)
    for (fid, t), v in support.items():
        for p in inst.flow(fid).ports:
            by_port[p].append((t, fid, v))
    groups = []
    for p in sorted(by_port):
        cap = inst.switch.capacity(p)
        items = sorted(by_port[p])
        port_groups, cur, size = [], [], 0.0
        for t, fid, v in items:
            cur.append((fid, t))
            size += v
            if size >= WINDOW * cap - INTEGRALITY_TOL:
                port_groups.append((cur, size))
                cur, size = [], 0.0
        if cur:
            if port_groups:
                last, lsize = port_groups[-1]
                port_groups[-1] = (last + cur, lsize + size)
            else:
                port_groups.append((cur, size))
        if len(port_groups) > 1:
            groups.extend((p, keys, s) for keys, s in port_groups)
    return groups


def _level_model(inst: Instance, flows: list[str], var_keys: list[tuple[str, int]],
                 groups: list[tuple[PortId, list, float]]) -> LpModel:
    model = LpModel(name="lp_level")
    by_flow = defaultdict(dict)
    for fid, t in var_keys:
        f = inst.flow(fid)
        j = model.add_var(f"b[{fid},{t}]", _frac_cost(inst, f, t, 0.5), key=(fid, t))
        by_flow[fid][j] = 1.0
    for fid in flows:
        model.add_constraint(by_flow[fid], GE, inst.flow(fid).demand, f"demand[{fid}]", key=("flow", fid))
    idx = model.index()
    for a, (p, keys, size) in enumerate(groups):
        model.add_constraint({idx[k]: 1.0 for k in keys}, LE, size, f"grp[{p},{a}]", key=("cap", p, a))
    return model


def iterative_round(inst: Instance, horizon: int | None = None, method: str = "auto",
                    record_loads: bool = False, check_vertices: bool = True) -> PseudoSchedule:
    """Round LP(0) into a pseudo-schedule via repeated vertex solves."""
    H = inst.default_horizon() if horizon is None else horizon
    if inst.n == 0:
        return PseudoSchedule({}, 0, 0.0, 0.0, H)
    model = build_lp0(inst, H)
    alive = [f.id for f in inst.flows]
    assignment: dict[str, int] = {}
    trace: list[IterationRecord] = []
    fixed_cost = 0.0
    lp0 = None
    max_levels = 2 * math.ceil(math.log2(inst.n)) + 4 if inst.n > 1 else 2
    for level in range(max_levels + 1):
        sol = solve_min(model, method)
        if not sol.optimal:
            raise RoundingError(f"LP({level}) returned {sol.status}")
        if check_vertices and model.n_vars <= _VERTEX_CHECK_LIMIT and not is_vertex(model, sol):
            raise RoundingError(f"LP({level}) solution is not a vertex")
        if lp0 is None:
            lp0 = sol.objective
        values = defaultdict(list)
        for k, v in zip(model.keys, sol.x):
            values[k[0]].append((k[1], v))
        newly = []
        for fid in alive:
            d = inst.flow(fid).demand
            if all(abs(v / d - round(v / d)) <= INTEGRALITY_TOL for _, v in values[fid]):
                t_fix = [t for t, v in values[fid] if v > INTEGRALITY_TOL]
                if len(t_fix) != 1:
                    raise RoundingError(f"flow {fid}: integral but not in exactly one round")
                newly.append((fid, t_fix[0]))
        rec = IterationRecord(
            level=level, n_flows=len(alive), n_vars=model.n_vars, n_rows=model.n_rows,
            objective=sol.objective, fixed_cost_before=fixed_cost,
            fixed=[fid for fid, _ in newly], tight_rows=_tight_cap_rows(model, sol),
        )
        for fid, t in newly:
            assignment[fid] = t
            f = inst.flow(fid)
            fixed_cost += ((t - f.release) / f.demand + 0.5) * f.demand
        done = {fid for fid, _ in newly}
        alive = [fid for fid in alive if fid not in done]
        support = {
            k: v for k, v in zip(model.keys, sol.x) if k[0] not in done and v > INTEGRALITY_TOL
        }
        if record_loads:
            loads = port_round_loads(inst, assignment, H)
            for (fid, t), v in support.items():
                for p in inst.flow(fid).ports:
                    loads[p][t] += v
            rec.loads = loads
        trace.append(rec)
        log.debug("level %d: %d flows, %d fixed", level, rec.n_flows, len(newly))
        if not alive:
            break
        if not newly and level > 0:
            raise RoundingError(f"no progress at level {level}")
        groups = _build_groups(inst, support)
        rec.group_sizes = [(str(p), s) for p, _, s in groups]
        model = _level_model(inst, alive, sorted(support, key=lambda k: (k[1], k[0])), groups)
    else:
        raise RoundingError("iteration limit reached")
    return PseudoSchedule(
        assignment=assignment,
        backlog=measure_backlog(inst, assignment),
        cost=pseudo_cost(inst, assignment),
        lp0_value=lp0,
        horizon=H,
        trace=trace,
    )


def pseudo_to_schedule(inst: Instance, pseudo: PseudoSchedule, c: int,
                       lower_bound: float | None = None) -> ArtResult:
    """Turn a pseudo-schedule of unit flows into a schedule valid at capacity (1 + c) c_p."""
    if c < 1:
        raise ValueError("augmentation c must be a positive integer")
    if any(f.demand != 1 for f in inst.flows):
        raise ValueError("schedule extraction needs unit demands")
    missing = {f.id for f in inst.flows} - set(pseudo.assignment)
    if missing:
        raise ValueError(f"pseudo-schedule misses flows {sorted(missing)}")
    B = measure_backlog(inst, pseudo.assignment)
    h = max(1, math.ceil(B / c))
    windows = defaultdict(list)
    for f in inst.flows:
        windows[pseudo.assignment[f.id] // h].append(f)
    cap_in, cap_out = inst.switch.capacities_in, inst.switch.capacities_out
    out: dict[str, int] = {}
    d_seen = 0
    for j in sorted(windows):
        flows = sorted(windows[j], key=lambda f: (pseudo.assignment[f.id], f.id))
        g = BipartiteMultigraph(inst.switch.m, inst.switch.m_prime,
                                tuple((f.src, f.dst, f.id) for f in flows))
        unit, _ = expand_to_unit_graph(g, cap_in, cap_out)
        classes = edge_color_bipartite(unit)
        d = len(classes)
        d_seen = max(d_seen, d)
        if d > (1 + c) * h:
            raise PackingError(f"window {j}: {d} matchings exceed (1+c)h = {(1 + c) * h} (B={B}, h={h})")
        start = (j + 1) * h
        for k, cls in enumerate(classes):
            for fid in cls:
                out[fid] = start + k // (1 + c)
    sched = IntegralSchedule(out)
    verdict = validate_schedule(inst, sched, lambda p: c * inst.switch.capacity(p))
    if not verdict.valid:
        raise PackingError("extracted schedule invalid: " + "; ".join(verdict.violations[:3]))
    lb = art_lower_bound(inst) if lower_bound is None else lower_bound
    return ArtResult(lb, pseudo, sched, c, h, d_seen, B)


def solve_art(inst: Instance, c: int = 1, horizon: int | None = None, method: str = "auto",
              trace_path=None) -> ArtResult:
    """Full pipeline: certified LP bound, iterative rounding, windowed extraction."""
    bound = art_lp_bound(inst, None, method)
    H = max(bound.horizon, horizon or 0)
    pseudo = iterative_round(inst, H, method)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for rec in pseudo.trace:
                fh.write(rec.to_json() + "\n")
    return pseudo_to_schedule(inst, pseudo, c, bound.value)

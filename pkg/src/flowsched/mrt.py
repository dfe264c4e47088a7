"""Maximum response time: time-constrained feasibility LP, additive rounding, binary search.

A time-constrained instance is an ``Instance`` whose flows all carry an
``active`` set of admissible rounds. Release/deadline windows are the special
case ``active = [r, r + rho)``.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

from .core import Instance, IntegralSchedule, PortId, response_metrics, validate_schedule
from .lp import EQ, LE, INTEGRALITY_TOL, BasicSolution, LpModel, is_vertex, solve_min

log = logging.getLogger(__name__)

_VERTEX_CHECK_LIMIT = 400


class RoundingError(RuntimeError):
    pass


def require_active(inst: Instance) -> None:
    for f in inst.flows:
        if f.active is None:
            raise ValueError(f"flow {f.id} has no active set")


def with_windows(inst: Instance, rho: int) -> Instance:
    """Active set of each flow becomes [release, release + rho)."""
    if rho < 1:
        raise ValueError("rho must be >= 1")
    return inst.with_flows(
        type(f)(f.id, f.src, f.dst, f.demand, f.release, tuple(range(f.release, f.release + rho)))
        for f in inst.flows
    )


@dataclass
class RoundedAssignment:
    assignment: dict[str, int]
    fractional: dict[tuple[str, int], float]   # LP point the rounding started from
    d_max: int
    overload: dict[tuple[PortId, int], int] = field(default_factory=dict)

    @property
    def max_overload(self) -> int:
        return max(self.overload.values(), default=0)

    def schedule(self) -> IntegralSchedule:
        return IntegralSchedule(self.assignment)


def build_tcfs_lp(inst: Instance) -> LpModel:
    require_active(inst)
    model = LpModel(name="tcfs")
    rows = defaultdict(dict)
    for f in inst.flows:
        cols = {}
        for t in f.active:
            j = model.add_var(f"x[{f.id},{t}]", 0.0, key=(f.id, t))
            cols[j] = 1.0
            for p in f.ports:
                rows[p, t][j] = float(f.demand)
        model.add_constraint(cols, EQ, 1.0, f"assign[{f.id}]", key=("flow", f.id))
    for (p, t), coefs in sorted(rows.items()):
        model.add_constraint(coefs, LE, inst.switch.capacity(p), f"cap[{p},{t}]", key=("cap", p, t))
    return model


def _overloads(inst: Instance, assignment: dict[str, int]) -> dict[tuple[PortId, int], int]:
    load = defaultdict(int)
    for f in inst.flows:
        for p in f.ports:
            load[p, assignment[f.id]] += f.demand
    return {k: v - inst.switch.capacity(k[0]) for k, v in load.items() if v > inst.switch.capacity(k[0])}


def karp_round(inst: Instance, frac: dict[tuple[str, int], float], method: str = "auto",
               check_vertices: bool = True) -> RoundedAssignment:
    """Round a feasible fractional point so every port-round is overloaded by at most 2 d_max - 1.

    Iterative relaxation: fix integral variables, drop capacity rows that
    cannot exceed the allowance whatever happens to their remaining
    fractional variables, re-solve for a vertex, repeat. Assignment rows are
    kept throughout, so each flow ends in exactly one active round.
    """
    require_active(inst)
    d_max = inst.d_max
    allowance = 2 * d_max - 1
    for f in inst.flows:
        s = sum(frac.get((f.id, t), 0.0) for t in f.active)
        if abs(s - 1.0) > 1e-6:
            raise ValueError(f"flow {f.id}: fractional mass {s} != 1")
        if any(v < -1e-9 for (fid, t), v in frac.items() if fid == f.id) or \
                any(t not in f.active for (fid, t) in frac if fid == f.id):
            raise ValueError(f"flow {f.id}: fractional point outside its active set")
    load_ok = defaultdict(float)
    for (fid, t), v in frac.items():
        for p in inst.flow(fid).ports:
            load_ok[p, t] += inst.flow(fid).demand * v
    for (p, t), v in load_ok.items():
        if v > inst.switch.capacity(p) * (1 + 1e-9) + 1e-9:
            raise ValueError(f"fractional point overloads {p} at round {t}")

    assignment: dict[str, int] = {}
    fixed_load = defaultdict(int)
    live_rows = {(p, t) for (fid, t) in frac for p in inst.flow(fid).ports}
    x = dict(frac)
    own_vertex = False
    while True:
        progress = False
        for (fid, t), v in sorted(x.items()):
            if fid in assignment:
                continue
            if abs(v - 1.0) <= INTEGRALITY_TOL:
                assignment[fid] = t
                for p in inst.flow(fid).ports:
                    fixed_load[p, t] += inst.flow(fid).demand
                progress = True
        x = {k: v for k, v in x.items() if k[0] not in assignment and v > INTEGRALITY_TOL}
        if len(assignment) == inst.n:
            break
        support = defaultdict(int)
        for fid, t in x:
            for p in inst.flow(fid).ports:
                support[p, t] += inst.flow(fid).demand
        for row in sorted(live_rows):
            residual = inst.switch.capacity(row[0]) - fixed_load[row]
            if support.get(row, 0) <= residual + allowance:
                live_rows.discard(row)
                progress = True
        if own_vertex and not progress:
            raise RoundingError("rounding stalled at a fractional vertex")
        # re-solve on the current support
        model = LpModel(name="tcfs_round")
        rows = defaultdict(dict)
        per_flow = defaultdict(dict)
        for fid, t in sorted(x, key=lambda k: (k[1], k[0])):
            j = model.add_var(f"x[{fid},{t}]", 0.0, key=(fid, t))
            per_flow[fid][j] = 1.0
            for p in inst.flow(fid).ports:
                if (p, t) in live_rows:
                    rows[p, t][j] = float(inst.flow(fid).demand)
        for fid in sorted(per_flow):
            model.add_constraint(per_flow[fid], EQ, 1.0, f"assign[{fid}]", key=("flow", fid))
        for (p, t), coefs in sorted(rows.items()):
            residual = inst.switch.capacity(p) - fixed_load[p, t]
            model.add_constraint(coefs, LE, residual, f"cap[{p},{t}]", key=("cap", p, t))
        sol = solve_min(model, method)
        if not sol.optimal:
            raise RoundingError(f"residual system became {sol.status}")
        if check_vertices and model.n_vars <= _VERTEX_CHECK_LIMIT and not is_vertex(model, sol):
            raise RoundingError("residual solve returned a non-vertex point")
        x = {k: float(v) for k, v in zip(model.keys, sol.x)}
        own_vertex = True
    return RoundedAssignment(assignment, dict(frac), d_max, _overloads(inst, assignment))


def tcfs_fractional(inst: Instance, method: str = "auto") -> dict[tuple[str, int], float] | None:
    """A vertex of the time-constrained LP, or None if it is infeasible."""
    model = build_tcfs_lp(inst)
    sol = solve_min(model, method)
    if not sol.optimal:
        return None
    return {k: float(v) for k, v in zip(model.keys, sol.x) if v > INTEGRALITY_TOL}


def solve_tcfs(inst: Instance, method: str = "auto") -> tuple[bool, RoundedAssignment | None]:
    frac = tcfs_fractional(inst, method)
    if frac is None:
        return False, None
    return True, karp_round(inst, frac, method)


def fifo_schedule(inst: Instance) -> IntegralSchedule:
    """Greedy by (release, id): earliest round with room at both ports."""
    used = defaultdict(int)
    out = {}
    for f in sorted(inst.flows, key=lambda f: (f.release, f.id)):
        t = f.release
        while any(used[p, t] + f.demand > inst.switch.capacity(p) for p in f.ports):
            t += 1
        for p in f.ports:
            used[p, t] += f.demand
        out[f.id] = t
    return IntegralSchedule(out)


def rho_feasible(inst: Instance, rho: int, method: str = "auto") -> bool:
    return solve_min(build_tcfs_lp(with_windows(inst, rho)), method).optimal


def min_feasible_rho(inst: Instance, method: str = "auto") -> int:
    """Least rho >= 1 whose window LP is feasible; a lower bound on the optimal max response."""
    if inst.n == 0:
        return 0
    lo, hi = 1, response_metrics(inst, fifo_schedule(inst)).maximum
    while lo < hi:
        mid = (lo + hi) // 2
        if rho_feasible(inst, mid, method):
            hi = mid
        else:
            lo = mid + 1
    return lo


def solve_mrt(inst: Instance, augment_check: bool = True,
              method: str = "auto") -> tuple[int, RoundedAssignment]:
    """Binary search on rho, then round the window LP at the least feasible rho."""
    rho = min_feasible_rho(inst, method)
    if inst.n == 0:
        return 0, RoundedAssignment({}, {}, inst.d_max)
    windowed = with_windows(inst, rho)
    ok, rounded = solve_tcfs(windowed, method)
    if not ok:
        raise RoundingError(f"window LP feasible in the search but not at rho={rho}")
    if augment_check:
        verdict = validate_schedule(windowed, rounded.schedule(), 2 * inst.d_max - 1)
        if not verdict.valid:
            raise RoundingError("rounded schedule breaks the additive bound: " + verdict.violations[0])
    return rho, rounded

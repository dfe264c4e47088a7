"""Exhaustive reference solvers for tiny instances."""
from __future__ import annotations

import itertools
from collections import defaultdict

from flowsched.core import Instance, IntegralSchedule, response_metrics
from flowsched.matching import BipartiteMultigraph, is_matching
from flowsched.mrt import fifo_schedule


def _search(inst: Instance, choices, score_bound=None):
    """DFS over per-flow round choices with capacity pruning.

    ``choices(f)`` lists candidate rounds; ``score_bound(cur, f, t, rest, load)``
    prunes a branch when it returns False. Interchangeable flows (same ports,
    release, demand and active set) take nondecreasing rounds.
    """
    flows = sorted(inst.flows, key=lambda f: (f.release, f.src, f.dst, f.demand, f.active or (), f.id))
    cand = {f.id: list(choices(f)) for f in flows}
    twin = [k > 0 and (flows[k - 1].src, flows[k - 1].dst, flows[k - 1].release, flows[k - 1].demand,
                       flows[k - 1].active) == (f.src, f.dst, f.release, f.demand, f.active)
            for k, f in enumerate(flows)]
    load = defaultdict(int)
    cur = {}

    def room_left(rest) -> bool:
        # every port needs enough free capacity over the union of its remaining flows' rounds
        need, rounds = defaultdict(int), defaultdict(set)
        for g in rest:
            for p in g.ports:
                need[p] += g.demand
                rounds[p].update(cand[g.id])
        return all(
            sum(max(0, inst.switch.capacity(p) - load[p, t]) for t in rounds[p]) >= need[p]
            for p in need
        )

    def rec(k):
        if k == len(flows):
            yield dict(cur)
            return
        f = flows[k]
        floor = cur[flows[k - 1].id] if twin[k] else None
        for t in cand[f.id]:
            if floor is not None and t < floor:
                continue
            if any(load[p, t] + f.demand > inst.switch.capacity(p) for p in f.ports):
                continue
            if score_bound is not None and not score_bound(cur, f, t, flows[k + 1:], load):
                continue
            for p in f.ports:
                load[p, t] += f.demand
            cur[f.id] = t
            if room_left(flows[k + 1:]):
                yield from rec(k + 1)
            del cur[f.id]
            for p in f.ports:
                load[p, t] -= f.demand

    return rec(0)


def _port_bound(inst: Instance, rest, load, H) -> int:
    """Lower bound on the remaining flows' total response.

    Each port alone is a unit-job single machine with releases, where filling
    free slots in release order is optimal; the other flows count their own
    earliest feasible round.
    """
    def earliest(g):
        for t in range(g.release, H):
            if all(load[p, t] + g.demand <= inst.switch.capacity(p) for p in g.ports):
                return t + 1 - g.release
        return H
    solo = {g.id: earliest(g) for g in rest}
    base = sum(solo.values())
    best = base
    at = defaultdict(list)
    for g in rest:
        for p in g.ports:
            at[p].append(g)
    for p, gs in at.items():
        if any(g.demand != 1 for g in gs):
            continue
        cap = inst.switch.capacity(p)
        free = {t: cap - load[p, t] for t in range(H)}
        total = 0
        for g in sorted(gs, key=lambda g: g.release):
            t = g.release
            while t < H and free[t] <= 0:
                t += 1
            if t == H:
                return H * len(rest)
            free[t] -= 1
            total += t + 1 - g.release
        best = max(best, base - sum(solo[g.id] for g in gs) + total)
    return best


def min_total_response(inst: Instance) -> int:
    """Optimal total response time (branch and bound)."""
    if inst.n == 0:
        return 0
    H = inst.max_release + inst.n + 1
    best = [response_metrics(inst, fifo_schedule(inst)).total]
    by_id = {f.id: f for f in inst.flows}

    def cost(assign):
        return sum(t + 1 - by_id[fid].release for fid, t in assign.items())

    def bound(cur, f, t, rest, load):
        here = cost(cur) + (t + 1 - f.release)
        if here + len(rest) >= best[0]:
            return False
        for p in f.ports:
            load[p, t] += f.demand
        ok = here + _port_bound(inst, rest, load, H) < best[0]
        for p in f.ports:
            load[p, t] -= f.demand
        return ok

    for a in _search(inst, lambda f: range(f.release, H), bound):
        best[0] = min(best[0], cost(a))
    return best[0]


def schedulable_within(inst: Instance, rho: int) -> IntegralSchedule | None:
    """A schedule with every response <= rho, or None."""
    def rounds(f):
        act = range(f.release, f.release + rho)
        return [t for t in act if f.active is None or t in f.active]
    for a in _search(inst, rounds):
        return IntegralSchedule(a)
    return None


def min_max_response(inst: Instance) -> int:
    if inst.n == 0:
        return 0
    hi = response_metrics(inst, fifo_schedule(inst)).maximum
    for rho in range(1, hi + 1):
        if schedulable_within(inst, rho) is not None:
            return rho
    return hi


def tcfs_schedulable(inst: Instance) -> bool:
    """Exact schedule exists using only active rounds."""
    for _ in _search(inst, lambda f: list(f.active)):
        return True
    return False


def interval_excess(loads, cap: int) -> float:
    """max over intervals of (volume - cap * length), by direct O(H^2) scan."""
    worst = 0.0
    H = len(loads)
    for a in range(H):
        vol = 0.0
        for b in range(a, H):
            vol += loads[b]
            worst = max(worst, vol - cap * (b - a + 1))
    return worst


def all_matchings(g: BipartiteMultigraph):
    ids = [e[2] for e in g.edges]
    for k in range(len(ids) + 1):
        for sub in itertools.combinations(ids, k):
            if is_matching(g, sub):
                yield sub

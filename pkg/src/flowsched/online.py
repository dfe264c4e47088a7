"""Online schedulers: per-round matching heuristics and the batching algorithm for max response."""
from __future__ import annotations

import csv
import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .core import FlowRequest, Instance, IntegralSchedule, SwitchSpec
from .matching import (
    BipartiteMultigraph,
    expand_to_unit_graph,
    max_cardinality_matching,
    max_weight_matching,
)
from .mrt import solve_tcfs, with_windows


class Policy(enum.Enum):
    MAX_CARD = "MaxCard"
    MIN_RTIME = "MinRTime"
    MAX_WEIGHT = "MaxWeight"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        for p in cls:
            if p.value.lower() == name.lower() or p.name.lower() == name.lower():
                return p
        raise ValueError(f"unknown policy {name!r}")


ALL_POLICIES = (Policy.MAX_CARD, Policy.MIN_RTIME, Policy.MAX_WEIGHT)


@dataclass
class BacklogGraph:
    switch: SwitchSpec
    round: int = 0
    pending: dict[str, FlowRequest] = field(default_factory=dict)

    def add(self, flows: Sequence[FlowRequest]) -> None:
        for f in flows:
            if f.release > self.round:
                raise ValueError(f"flow {f.id} added before its release")
            if f.id in self.pending:
                raise ValueError(f"duplicate pending flow {f.id}")
            self.pending[f.id] = f

    def queue_sizes(self) -> tuple[list[int], list[int]]:
        qi, qo = [0] * self.switch.m, [0] * self.switch.m_prime
        for f in self.pending.values():
            qi[f.src] += 1
            qo[f.dst] += 1
        return qi, qo

    def graph(self, order: Sequence[FlowRequest] | None = None) -> BipartiteMultigraph:
        flows = order if order is not None else sorted(self.pending.values(), key=lambda f: f.id)
        return BipartiteMultigraph(self.switch.m, self.switch.m_prime,
                                   tuple((f.src, f.dst, f.id) for f in flows))


def _weights(state: BacklogGraph, policy: Policy) -> dict[str, float]:
    if policy is Policy.MIN_RTIME:
        return {fid: float(state.round - f.release) for fid, f in state.pending.items()}
    qi, qo = state.queue_sizes()
    return {fid: float(qi[f.src] + qo[f.dst]) for fid, f in state.pending.items()}


def policy_step(state: BacklogGraph, policy: Policy) -> list[str]:
    """Pick the flows to run this round and remove them from the backlog.

    Weighted policies maximize weight first and cardinality second: each
    edge gets weight w*K + 1 with K larger than any matching size, so that
    zero-weight flows (MinRTime, just released) still run when a port is idle.
    Ports with capacity above one are replicated round-robin, heaviest flows
    first.
    """
    if not state.pending:
        return []
    if any(f.demand != 1 for f in state.pending.values()):
        raise ValueError("online policies assume unit demands")
    if policy is Policy.MAX_CARD:
        order = sorted(state.pending.values(), key=lambda f: f.id)
        weights = None
    else:
        w = _weights(state, policy)
        order = sorted(state.pending.values(), key=lambda f: (-w[f.id], f.id))
        K = len(state.pending) + 1
        weights = {fid: v * K + 1 for fid, v in w.items()}
    g = state.graph(order)
    caps_in, caps_out = state.switch.capacities_in, state.switch.capacities_out
    if any(c > 1 for c in caps_in + caps_out):
        g, _ = expand_to_unit_graph(g, caps_in, caps_out)
    if weights is None:
        chosen = max_cardinality_matching(g)
    else:
        chosen = max_weight_matching(g, weights)
    chosen = sorted(chosen)
    for fid in chosen:
        del state.pending[fid]
    return chosen


class ArrivalSource(Protocol):
    """Supplies releases round by round; may react to what the scheduler did."""

    switch: SwitchSpec

    def arrivals(self, t: int, executed: Sequence[Sequence[str]],
                 pending: Sequence[FlowRequest]) -> list[FlowRequest]: ...

    def exhausted(self, t: int) -> bool:
        """True when no flow will be released at round t or later."""
        ...


class StaticArrivals:
    def __init__(self, inst: Instance):
        self.switch = inst.switch
        self._by_round = defaultdict(list)
        for f in inst.flows:
            self._by_round[f.release].append(f)
        self._last = inst.max_release if inst.n else -1

    def arrivals(self, t, executed, pending):
        return sorted(self._by_round.get(t, []), key=lambda f: f.id)

    def exhausted(self, t):
        return t > self._last


@dataclass
class OnlineRun:
    instance: Instance
    schedule: IntegralSchedule
    decisions: list[list[str]]   # flows executed per round, index = round
    policy: Policy


def run_online(source: ArrivalSource | Instance, policy: Policy, max_rounds: int = 1_000_000) -> OnlineRun:
    if isinstance(source, Instance):
        source = StaticArrivals(source)
    state = BacklogGraph(source.switch)
    released: list[FlowRequest] = []
    decisions: list[list[str]] = []
    assignment: dict[str, int] = {}
    t = 0
    while not (source.exhausted(t) and not state.pending):
        if t >= max_rounds:
            raise RuntimeError("online run did not drain")
        state.round = t
        new = source.arrivals(t, decisions, list(state.pending.values()))
        released.extend(new)
        state.add(new)
        chosen = policy_step(state, policy)
        for fid in chosen:
            assignment[fid] = t
        decisions.append(chosen)
        t += 1
    inst = Instance(source.switch, tuple(released))
    return OnlineRun(inst, IntegralSchedule(assignment), decisions, policy)


def write_decision_log(run: OnlineRun, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["round", "policy", "flows"])
    for t, ids in enumerate(run.decisions):
        w.writerow([t, run.policy.value, " ".join(ids)])


# Batching for maximum response time


@dataclass
class Batch:
    index: int
    block_start: int     # first release round covered
    block_len: int       # rounds covered, equal to the guess in force when the block opened
    rho: int             # guess used to solve the batch
    flows: list[str]
    first_round: int = 0
    last_round: int = -1
    overload: int = 0    # worst port-round overload of the batch on its own


@dataclass
class AmrtResult:
    schedule: IntegralSchedule
    rho: int
    rho_history: list[int]
    batches: list[Batch]
    overlap: list[int]          # active batches per round

    @property
    def max_overlap(self) -> int:
        return max(self.overlap, default=0)


def a_mrt_run(inst: Instance, doubling: bool = False, method: str = "auto") -> AmrtResult:
    """Guess-and-batch online algorithm for maximum response time.

    Time is cut into blocks whose length is the guess at the moment the
    block opens. At the end of a block, the flows it released are solved
    offline with windows of the current guess; an infeasible batch raises the
    guess (by one, or doubling) and is retried right away. The solution is
    shifted by the block length, so it starts at the current round.
    """
    releases = defaultdict(list)
    for f in inst.flows:
        releases[f.release].append(f)
    last = inst.max_release if inst.n else -1
    rho = 1
    history = [rho]
    assignment: dict[str, int] = {}
    batches: list[Batch] = []
    start = 0
    while start <= last:
        length = rho
        end = start + length   # decision round
        flows = [f for t in range(start, end) for f in sorted(releases.get(t, []), key=lambda f: f.id)]
        if flows:
            sub = inst.with_flows(flows)
            while True:
                ok, rounded = solve_tcfs(with_windows(sub, rho), method)
                if ok:
                    break
                rho = 2 * rho if doubling else rho + 1
                history.append(rho)
            b = Batch(len(batches), start, length, rho, [f.id for f in flows],
                      overload=rounded.max_overload)
            rounds = []
            for fid, t in rounded.assignment.items():
                assignment[fid] = t + length
                rounds.append(t + length)
            b.first_round, b.last_round = end, max(rounds)
            batches.append(b)
        start = end
    horizon = max((b.last_round for b in batches), default=-1) + 1
    overlap = [0] * horizon
    for b in batches:
        for t in range(b.first_round, b.last_round + 1):
            overlap[t] += 1
    return AmrtResult(IntegralSchedule(assignment), rho, history, batches, overlap)


def amrt_capacity_bonus(inst: Instance):
    """Per-port bonus that lifts capacity to 2 (c_p + 2 d_max - 1)."""
    extra = 2 * (2 * inst.d_max - 1)
    return lambda p: inst.switch.capacity(p) + extra

"""Switch, flow and schedule model plus response-time metrics.

Rounds are 0-indexed. A flow runs in exactly one round; its completion
time is that round plus one and its response time is completion minus
release.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

INPUT = "input"
OUTPUT = "output"


class InstanceError(ValueError):
    """Raised for malformed instances or schedules."""


@dataclass(frozen=True, order=True)
class PortId:
    side: str
    index: int

    def __post_init__(self):
        if self.side not in (INPUT, OUTPUT):
            raise InstanceError(f"bad port side {self.side!r}")
        if self.index < 0:
            raise InstanceError(f"negative port index {self.index}")

    def __str__(self):
        return f"{'in' if self.side == INPUT else 'out'}{self.index}"


@dataclass(frozen=True)
class SwitchSpec:
    m: int
    m_prime: int
    capacities_in: tuple[int, ...]
    capacities_out: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "capacities_in", tuple(int(c) for c in self.capacities_in))
        object.__setattr__(self, "capacities_out", tuple(int(c) for c in self.capacities_out))
        if len(self.capacities_in) != self.m or len(self.capacities_out) != self.m_prime:
            raise InstanceError("capacity lists must cover every port")
        if any(c < 1 for c in self.capacities_in + self.capacities_out):
            raise InstanceError("every port needs capacity >= 1")

    @classmethod
    def uniform(cls, m: int, m_prime: int | None = None, capacity: int = 1) -> "SwitchSpec":
        m_prime = m if m_prime is None else m_prime
        return cls(m, m_prime, (capacity,) * m, (capacity,) * m_prime)

    def capacity(self, port: PortId) -> int:
        if port.side == INPUT:
            return self.capacities_in[port.index]
        return self.capacities_out[port.index]

    def ports(self) -> list[PortId]:
        return [PortId(INPUT, i) for i in range(self.m)] + [
            PortId(OUTPUT, j) for j in range(self.m_prime)
        ]


@dataclass(frozen=True)
class FlowRequest:
    id: str
    src: int
    dst: int
    demand: int = 1
    release: int = 0
    active: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.demand < 1:
            raise InstanceError(f"flow {self.id}: demand must be positive")
        if self.release < 0:
            raise InstanceError(f"flow {self.id}: negative release")
        if self.active is not None:
            act = tuple(sorted(set(int(t) for t in self.active)))
            if not act:
                raise InstanceError(f"flow {self.id}: empty active set")
            if act[0] < self.release:
                raise InstanceError(f"flow {self.id}: active round before release")
            object.__setattr__(self, "active", act)

    @property
    def ports(self) -> tuple[PortId, PortId]:
        return PortId(INPUT, self.src), PortId(OUTPUT, self.dst)


@dataclass(frozen=True)
class Instance:
    switch: SwitchSpec
    flows: tuple[FlowRequest, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        seen = set()
        for f in self.flows:
            if f.id in seen:
                raise InstanceError(f"duplicate flow id {f.id!r}")
            seen.add(f.id)
            if not (0 <= f.src < self.switch.m and 0 <= f.dst < self.switch.m_prime):
                raise InstanceError(f"flow {f.id}: endpoint outside switch")
            if f.demand > self.kappa(f):
                raise InstanceError(f"flow {f.id}: demand exceeds min port capacity")

    @property
    def n(self) -> int:
        return len(self.flows)

    def kappa(self, flow: FlowRequest) -> int:
        return min(self.switch.capacities_in[flow.src], self.switch.capacities_out[flow.dst])

    def flow(self, fid: str) -> FlowRequest:
        return self._by_id[fid]

    @property
    def _by_id(self) -> dict[str, FlowRequest]:
        cache = self.__dict__.get("_id_cache")
        if cache is None:
            cache = {f.id: f for f in self.flows}
            object.__setattr__(self, "_id_cache", cache)
        return cache

    def flows_at(self, port: PortId) -> list[FlowRequest]:
        if port.side == INPUT:
            return [f for f in self.flows if f.src == port.index]
        return [f for f in self.flows if f.dst == port.index]

    @property
    def d_max(self) -> int:
        return max((f.demand for f in self.flows), default=1)

    @property
    def max_release(self) -> int:
        return max((f.release for f in self.flows), default=0)

    def default_horizon(self) -> int:
        """Serial completion bound: every flow fits if run one after another."""
        return self.max_release + sum(math.ceil(f.demand / self.kappa(f)) for f in self.flows) + 1

    def with_flows(self, flows: Iterable[FlowRequest]) -> "Instance":
        return Instance(self.switch, tuple(flows))


@dataclass(frozen=True)
class IntegralSchedule:
    assignment: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def __getitem__(self, fid: str) -> int:
        return self.assignment[fid]

    def __len__(self):
        return len(self.assignment)

    @property
    def makespan(self) -> int:
        return max(self.assignment.values(), default=-1) + 1


@dataclass(frozen=True)
class ValidationVerdict:
    violations: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class ResponseReport:
    completion: dict[str, int]
    response: dict[str, int]
    total: int
    average: float
    maximum: int


def _check_coverage(inst: Instance, sched: IntegralSchedule) -> None:
    ids = {f.id for f in inst.flows}
    extra = set(sched.assignment) - ids
    if extra:
        raise InstanceError(f"unknown flow ids in schedule: {sorted(extra)}")
    missing = ids - set(sched.assignment)
    if missing:
        raise InstanceError(f"schedule misses flows: {sorted(missing)}")
    for fid, t in sched.assignment.items():
        if t < 0:
            raise InstanceError(f"flow {fid} scheduled at negative round {t}")


def port_loads(inst: Instance, sched: IntegralSchedule) -> dict[tuple[PortId, int], int]:
    """Total demand per (port, round)."""
    load: dict[tuple[PortId, int], int] = defaultdict(int)
    for f in inst.flows:
        t = sched[f.id]
        p, q = f.ports
        load[p, t] += f.demand
        load[q, t] += f.demand
    return load


def validate_schedule(inst: Instance, sched: IntegralSchedule, capacity_bonus=0) -> ValidationVerdict:
    """Check releases, active sets and per-port capacity.

    ``capacity_bonus`` is either an int added to every port's capacity or a
    callable mapping a PortId to its bonus (for capacity-proportional
    augmentation).
    """
    _check_coverage(inst, sched)
    bonus = capacity_bonus if callable(capacity_bonus) else (lambda _p: capacity_bonus)
    problems = []
    for f in inst.flows:
        t = sched[f.id]
        if t < f.release:
            problems.append(f"flow {f.id}: round {t} before release {f.release}")
        if f.active is not None and t not in f.active:
            problems.append(f"flow {f.id}: round {t} not in active set")
    for (port, t), load in sorted(port_loads(inst, sched).items()):
        cap = inst.switch.capacity(port) + bonus(port)
        if load > cap:
            problems.append(f"port {port} round {t}: load {load} > {cap}")
    return ValidationVerdict(tuple(problems))


def response_metrics(inst: Instance, sched: IntegralSchedule) -> ResponseReport:
    _check_coverage(inst, sched)
    completion, response = {}, {}
    for f in inst.flows:
        t = sched[f.id]
        if t < f.release:
            raise InstanceError(f"flow {f.id} scheduled before its release")
        completion[f.id] = t + 1
        response[f.id] = t + 1 - f.release
    total = sum(response.values())
    n = len(response)
    return ResponseReport(
        completion=completion,
        response=response,
        total=total,
        average=total / n if n else 0.0,
        maximum=max(response.values(), default=0),
    )


def max_overload(inst: Instance, sched: IntegralSchedule) -> int:
    """Largest load - capacity over all (port, round), clamped at 0."""
    worst = 0
    for (port, _t), load in port_loads(inst, sched).items():
        worst = max(worst, load - inst.switch.capacity(port))
    return worst


# JSON formats


def instance_to_dict(inst: Instance) -> dict:
    flows = []
    for f in inst.flows:
        d = {"id": f.id, "src": f.src, "dst": f.dst, "demand": f.demand, "release": f.release}
        if f.active is not None:
            d["active"] = list(f.active)
        flows.append(d)
    return {
        "m": inst.switch.m,
        "m_prime": inst.switch.m_prime,
        "capacities_in": list(inst.switch.capacities_in),
        "capacities_out": list(inst.switch.capacities_out),
        "flows": flows,
    }


def instance_from_dict(data: Mapping) -> Instance:
    try:
        switch = SwitchSpec(
            int(data["m"]), int(data["m_prime"]), data["capacities_in"], data["capacities_out"]
        )
        flows = tuple(
            FlowRequest(
                id=str(f["id"]),
                src=int(f["src"]),
                dst=int(f["dst"]),
                demand=int(f.get("demand", 1)),
                release=int(f.get("release", 0)),
                active=tuple(f["active"]) if f.get("active") is not None else None,
            )
            for f in data["flows"]
        )
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance JSON: {exc}") from exc
    return Instance(switch, flows)


def schedule_to_dict(sched: IntegralSchedule, order: Sequence[str] | None = None) -> dict:
    ids = order if order is not None else sorted(sched.assignment)
    return {"assignments": [{"id": fid, "round": sched[fid]} for fid in ids]}


def schedule_from_dict(data: Mapping) -> IntegralSchedule:
    try:
        return IntegralSchedule({str(a["id"]): int(a["round"]) for a in data["assignments"]})
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed schedule JSON: {exc}") from exc


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_schedule(path: str | Path) -> IntegralSchedule:
    return schedule_from_dict(json.loads(Path(path).read_text()))


def save_schedule(sched: IntegralSchedule, path: str | Path) -> None:
    Path(path).write_text(dumps(schedule_to_dict(sched)))

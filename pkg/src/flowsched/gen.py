"""Instance generators: random instances, adaptive adversaries, timetabling gadget."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FlowRequest, Instance, InstanceError, SwitchSpec


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_instance(m: int, m_prime: int, n: int, d_max: int = 1, horizon: int = 1,
                    seed: int = 0, max_capacity: int = 1) -> Instance:
    """n flows with uniform endpoints, releases in [0, horizon) and demands in [1, min(d_max, kappa)]."""
    if min(m, m_prime, d_max, horizon, max_capacity) < 1 or n < 0:
        raise ValueError("parameters must be positive")
    rng = _rng(seed)
    caps_in = rng.integers(1, max_capacity + 1, size=m).tolist()
    caps_out = rng.integers(1, max_capacity + 1, size=m_prime).tolist()
    flows = []
    for k in range(n):
        src, dst = int(rng.integers(m)), int(rng.integers(m_prime))
        top = min(d_max, caps_in[src], caps_out[dst])
        flows.append(FlowRequest(f"f{k}", src, dst, int(rng.integers(1, top + 1)), int(rng.integers(horizon))))
    return Instance(SwitchSpec(m, m_prime, caps_in, caps_out), tuple(flows))


def random_tcfs(m: int, n: int, d_max: int, rounds: int, seed: int = 0) -> Instance:
    """Square switch, capacities in [d_max, d_max + 2], random nonempty active sets within [0, rounds)."""
    rng = _rng(seed)
    caps = rng.integers(d_max, d_max + 3, size=m).tolist()
    flows = []
    for k in range(n):
        size = int(rng.integers(1, rounds + 1))
        active = sorted(int(t) for t in rng.choice(rounds, size=size, replace=False))
        flows.append(FlowRequest(
            f"f{k}", int(rng.integers(m)), int(rng.integers(m)),
            int(rng.integers(1, d_max + 1)), active[0], tuple(active),
        ))
    return Instance(SwitchSpec(m, m, caps, caps), tuple(flows))


# Adaptive adversaries. Both follow the ArrivalSource protocol from `online`.


class AvgResponseAdversary:
    """Two outputs fed from input 0 for T rounds; then input 1 floods the output with more backlog.

    Port roles: input 0 sends to outputs 0 and 1 each round in [0, T). From
    round T to M - 1, input 1 sends one flow per round to whichever output
    still had more pending flows at round T (ties go to output 1).
    """

    def __init__(self, T: int, M: int):
        if T < 1 or M < 4 * T:
            raise ValueError("need T >= 1 and M >= 4T")
        self.T, self.M = T, M
        self.switch = SwitchSpec.uniform(2, 2)
        self.target: int | None = None

    def arrivals(self, t, executed, pending):
        if t < self.T:
            return [FlowRequest(f"s{t}a", 0, 0, 1, t), FlowRequest(f"s{t}b", 0, 1, 1, t)]
        if t >= self.M:
            return []
        if self.target is None:
            q0 = sum(1 for f in pending if f.dst == 0)
            q1 = sum(1 for f in pending if f.dst == 1)
            self.target = 0 if q0 > q1 else 1
        return [FlowRequest(f"d{t}", 1, self.target, 1, t)]

    def exhausted(self, t):
        return t >= self.M


def gadget_avg_lower(T: int, M: int) -> AvgResponseAdversary:
    return AvgResponseAdversary(T, M)


class MaxResponseAdversary:
    """Three inputs, four outputs; forces max response 3 while 2 is achievable offline.

    Round 0: input 0 -> outputs 0, 1 and input 1 -> outputs 2, 3.
    Round 1: input 2 -> the output left pending by input 0, and input 2 -> the
    output left pending by input 1 (outputs 1 and 2 when there is a choice).
    """

    def __init__(self):
        self.switch = SwitchSpec.uniform(3, 4)

    def arrivals(self, t, executed, pending):
        if t == 0:
            return [FlowRequest("a0", 0, 0, 1, 0), FlowRequest("a1", 0, 1, 1, 0),
                    FlowRequest("b0", 1, 2, 1, 0), FlowRequest("b1", 1, 3, 1, 0)]
        if t == 1:
            left = {f.dst for f in pending}
            x = 1 if 1 in left else 0
            y = 2 if 2 in left else 3
            return [FlowRequest("c0", 2, x, 1, 1), FlowRequest("c1", 2, y, 1, 1)]
        return []

    def exhausted(self, t):
        return t >= 2


def gadget_max_lower() -> MaxResponseAdversary:
    return MaxResponseAdversary()


# Timetabling reduction


@dataclass(frozen=True)
class RttInstance:
    """Sets of allowed hours (subsets of {1, 2, 3}) per teacher and class lists per teacher."""
    T: tuple[tuple[int, ...], ...]
    g: tuple[tuple[int, ...], ...]
    m_prime: int

    def __post_init__(self):
        object.__setattr__(self, "T", tuple(tuple(sorted(set(s))) for s in self.T))
        object.__setattr__(self, "g", tuple(tuple(sorted(set(s))) for s in self.g))
        if len(self.T) != len(self.g):
            raise InstanceError("T and g must have one entry per teacher")
        for i, (hours, classes) in enumerate(zip(self.T, self.g)):
            if not set(hours) <= {1, 2, 3} or len(hours) < 2:
                raise InstanceError(f"teacher {i}: hours must be a subset of {{1,2,3}} of size >= 2")
            if len(classes) != len(hours):
                raise InstanceError(f"teacher {i}: needs exactly |T_i| classes")
            if any(not 0 <= j < self.m_prime for j in classes):
                raise InstanceError(f"teacher {i}: class index out of range")

    @property
    def m(self) -> int:
        return len(self.T)

    @classmethod
    def from_dict(cls, data) -> "RttInstance":
        try:
            g = [list(x) for x in data["g"]]
            m_prime = int(data.get("m_prime", 1 + max((j for x in g for j in x), default=-1)))
            return cls(tuple(map(tuple, data["T"])), tuple(map(tuple, g)), m_prime)
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed RTT JSON: {exc}") from exc

    def to_dict(self) -> dict:
        return {"T": [list(s) for s in self.T], "g": [list(s) for s in self.g], "m_prime": self.m_prime}


def load_rtt(path) -> RttInstance:
    return RttInstance.from_dict(json.loads(Path(path).read_text()))


def rtt_satisfiable(rtt: RttInstance) -> bool:
    """Brute force: give each (teacher, class) pair a distinct allowed hour per teacher and per class."""
    pairs = [(i, j) for i in range(rtt.m) for j in rtt.g[i]]
    used_t, used_c = set(), set()

    def place(k: int) -> bool:
        if k == len(pairs):
            return True
        i, j = pairs[k]
        for h in rtt.T[i]:
            if (i, h) not in used_t and (j, h) not in used_c:
                used_t.add((i, h)); used_c.add((j, h))
                if place(k + 1):
                    return True
                used_t.discard((i, h)); used_c.discard((j, h))
        return False

    return place(0)


def rtt_reduce(rtt: RttInstance) -> tuple[Instance, int]:
    """Unit switch instance that has a schedule with max response 3 iff the timetable is solvable.

    Hours 1..3 map to rounds 0..2.
    Inputs: teachers, then three blockers per class, then three per gadget.
    Outputs: classes, then one per gadget.
    """
    m, mp = rtt.m, rtt.m_prime
    gadgets = [i for i in range(m) if rtt.T[i] in ((1, 3), (1, 2))]
    n_in = m + 3 * mp + 3 * len(gadgets)
    n_out = mp + len(gadgets)
    flows = []
    for i in range(m):
        r = min(rtt.T[i]) - 1
        for j in rtt.g[i]:
            flows.append(FlowRequest(f"p{i}q{j}", i, j, 1, r))
    for j in range(mp):
        for k, tag in enumerate("wyz"):
            flows.append(FlowRequest(f"{tag}{j}q{j}", m + 3 * j + k, j, 1, 3))
    for a, i in enumerate(gadgets):
        out = mp + a
        base = m + 3 * mp + 3 * a
        # blocks the teacher's port in the hour it must not teach
        r_block = 1 if rtt.T[i] == (1, 3) else 2
        flows.append(FlowRequest(f"p{i}s{i}", i, out, 1, r_block))
        for k, tag in enumerate("wyz"):
            flows.append(FlowRequest(f"{tag}s{i}", base + k, out, 1, r_block + 1))
    switch = SwitchSpec.uniform(n_in, n_out)
    return Instance(switch, tuple(flows)), 3


def enumerate_rtt(m: int, m_prime: int) -> list[RttInstance]:
    """Every RTT instance of the given size (small sizes only)."""
    hour_sets = [(1, 2), (1, 3), (2, 3), (1, 2, 3)]
    options = []
    for hours in hour_sets:
        for classes in itertools.combinations(range(m_prime), len(hours)):
            options.append((hours, classes))
    out = []
    for combo in itertools.product(options, repeat=m):
        out.append(RttInstance(tuple(c[0] for c in combo), tuple(c[1] for c in combo), m_prime))
    return out

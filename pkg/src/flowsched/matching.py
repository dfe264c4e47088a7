"""Bipartite multigraph primitives used by the schedulers and heuristics."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

Edge = tuple[int, int, Hashable]  # (left, right, edge id)


@dataclass(frozen=True)
class BipartiteMultigraph:
    n_left: int
    n_right: int
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        for u, v, _ in self.edges:
            if not (0 <= u < self.n_left and 0 <= v < self.n_right):
                raise ValueError(f"edge ({u}, {v}) out of range")

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges, key=lambda e: (e[0], e[1], str(e[2])))

    def endpoints(self) -> dict[Hashable, tuple[int, int]]:
        return {eid: (u, v) for u, v, eid in self.edges}

    def degrees(self) -> tuple[list[int], list[int]]:
        dl, dr = [0] * self.n_left, [0] * self.n_right
        for u, v, _ in self.edges:
            dl[u] += 1
            dr[v] += 1
        return dl, dr

    def max_degree(self) -> int:
        dl, dr = self.degrees()
        return max(dl + dr, default=0)


@dataclass
class CopyMap:
    left: list[int] = field(default_factory=list)   # copy index -> original vertex
    right: list[int] = field(default_factory=list)


def is_matching(g: BipartiteMultigraph, edge_ids) -> bool:
    ends = g.endpoints()
    used_l, used_r = set(), set()
    for eid in edge_ids:
        u, v = ends[eid]
        if u in used_l or v in used_r:
            return False
        used_l.add(u)
        used_r.add(v)
    return True


def max_cardinality_matching(g: BipartiteMultigraph) -> list:
    """Hopcroft-Karp. Parallel edges collapse to the lowest-sorted one."""
    adj: list[list[tuple[int, Hashable]]] = [[] for _ in range(g.n_left)]
    seen = set()
    for u, v, eid in g.sorted_edges():
        if (u, v) not in seen:
            seen.add((u, v))
            adj[u].append((v, eid))
    INF = float("inf")
    match_l: list[tuple[int, Hashable] | None] = [None] * g.n_left
    match_r: list[int | None] = [None] * g.n_right
    dist = [INF] * g.n_left

    def bfs() -> bool:
        q = deque()
        for u in range(g.n_left):
            if match_l[u] is None:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = INF
        found = False
        while q:
            u = q.popleft()
            for v, _ in adj[u]:
                w = match_r[v]
                if w is None:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return found

    def dfs(u: int) -> bool:
        # iterative DFS along layered graph
        stack = [(u, 0)]
        path = []
        while stack:
            x, i = stack[-1]
            if i >= len(adj[x]):
                dist[x] = INF
                stack.pop()
                if path:
                    path.pop()
                continue
            stack[-1] = (x, i + 1)
            v, eid = adj[x][i]
            w = match_r[v]
            if w is None:
                path.append((x, v, eid))
                for a, b, e in path:
                    match_l[a] = (b, e)
                    match_r[b] = a
                return True
            if dist[w] == dist[x] + 1:
                path.append((x, v, eid))
                stack.append((w, 0))
        return False

    while bfs():
        for u in range(g.n_left):
            if match_l[u] is None:
                dfs(u)
    return [m[1] for m in match_l if m is not None]


def max_weight_matching(g: BipartiteMultigraph, weight: Mapping | Callable) -> list:
    """Matching of maximum total weight (weights must be finite and >= 0).

    Among parallel edges only the heaviest (then lowest-sorted) is eligible.
    Zero-weight edges may be left out.
    """
    w = weight if callable(weight) else weight.__getitem__
    if not g.edges:
        return []
    best: dict[tuple[int, int], tuple[float, Hashable]] = {}
    for u, v, eid in g.sorted_edges():
        val = float(w(eid))
        if not np.isfinite(val) or val < 0:
            raise ValueError(f"edge {eid}: weight must be finite and nonnegative")
        if (u, v) not in best or val > best[u, v][0]:
            best[u, v] = (val, eid)
    W = np.zeros((g.n_left, g.n_right))
    for (u, v), (val, _) in best.items():
        W[u, v] = val
    rows, cols = linear_sum_assignment(W, maximize=True)
    out = []
    for u, v in zip(rows, cols):
        hit = best.get((int(u), int(v)))
        if hit is not None and hit[0] > 0:
            out.append(hit[1])
    return out


def edge_color_bipartite(g: BipartiteMultigraph) -> list[list]:
    """Partition the edges into exactly max-degree matchings (alternating-path recoloring)."""
    delta = g.max_degree()
    if delta == 0:
        return []
    ends = {}
    at: dict[tuple[str, int, int], Hashable] = {}  # (side, vertex, color) -> edge id
    color: dict[Hashable, int] = {}

    def free(side, x):
        for c in range(delta):
            if (side, x, c) not in at:
                return c
        raise AssertionError("degree bound violated")

    for u, v, eid in g.sorted_edges():
        ends[eid] = (u, v)
        a = free("L", u)
        if ("R", v, a) in at:
            b = free("R", v)
            # a/b alternating path from v; cannot reach u in a bipartite graph
            path = []
            side, x, c = "R", v, a
            while (side, x, c) in at:
                e = at[side, x, c]
                path.append(e)
                eu, ev = ends[e]
                side, x = ("L", eu) if side == "R" else ("R", ev)
                c = b if c == a else a
            for e in path:
                eu, ev = ends[e]
                del at["L", eu, color[e]]
                del at["R", ev, color[e]]
            for e in path:
                eu, ev = ends[e]
                color[e] = b if color[e] == a else a
                at["L", eu, color[e]] = e
                at["R", ev, color[e]] = e
        color[eid] = a
        at["L", u, a] = eid
        at["R", v, a] = eid
    classes: list[list] = [[] for _ in range(delta)]
    for u, v, eid in g.sorted_edges():
        classes[color[eid]].append(eid)
    return classes


def check_matching_set(g: BipartiteMultigraph, classes: Sequence[Sequence]) -> list[str]:
    """Problems with a claimed edge partition into matchings (empty list = fine)."""
    problems = []
    seen = []
    for k, cls in enumerate(classes):
        if not is_matching(g, cls):
            problems.append(f"class {k} is not a matching")
        seen.extend(cls)
    if sorted(map(str, seen)) != sorted(str(e[2]) for e in g.edges):
        problems.append("classes do not partition the edge set")
    return problems


def expand_to_unit_graph(
    g: BipartiteMultigraph,
    cap_left: Sequence[int],
    cap_right: Sequence[int],
) -> tuple[BipartiteMultigraph, CopyMap]:
    """Replace each vertex v by cap(v) copies; edges go to copies round-robin in input order."""
    cmap = CopyMap()
    first_l, first_r = [], []
    for v, c in enumerate(cap_left):
        first_l.append(len(cmap.left))
        cmap.left.extend([v] * c)
    for v, c in enumerate(cap_right):
        first_r.append(len(cmap.right))
        cmap.right.extend([v] * c)
    nxt_l, nxt_r = [0] * g.n_left, [0] * g.n_right
    edges = []
    for u, v, eid in g.edges:
        cu = first_l[u] + nxt_l[u] % cap_left[u]
        cv = first_r[v] + nxt_r[v] % cap_right[v]
        nxt_l[u] += 1
        nxt_r[v] += 1
        edges.append((cu, cv, eid))
    return BipartiteMultigraph(len(cmap.left), len(cmap.right), tuple(edges)), cmap

"""Small linear-programming layer returning basic (vertex) optimal solutions.

Two backends:

* ``"simplex"``: dense two-phase tableau simplex with Bland's rule. Exact
  pivoting order, so the same model always yields the same vertex.
* ``"highs"``: scipy's HiGHS for models too large for a dense tableau.
  Interior point followed by crossover, so the answer is still a basic
  solution; dual simplex is the fallback if the interior point run fails.

``solve_min`` with ``method="auto"`` picks by tableau size.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

LE, EQ, GE = "<=", "==", ">="
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"

INTEGRALITY_TOL = 1e-7
FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-9
_DENSE_LIMIT = 2.5e5  # tableau cells; larger models go to HiGHS


class LpError(RuntimeError):
    """Solver failure (stall, numerical breakdown)."""


def is_integral(v: float, tol: float = INTEGRALITY_TOL) -> bool:
    return abs(v - round(v)) <= tol


@dataclass
class Constraint:
    coefs: dict[int, float]
    sense: str
    rhs: float
    name: str
    key: object = None


@dataclass
class LpModel:
    """min c.x subject to rows, 0 <= x <= upper (upper optional)."""

    name: str = "lp"
    var_names: list[str] = field(default_factory=list)
    cost: list[float] = field(default_factory=list)
    upper: list[float | None] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    keys: list = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, cost: float = 0.0, upper: float | None = None, key=None) -> int:
        if upper is not None and not np.isfinite(upper):
            raise ValueError("upper bounds must be finite")
        self.keys.append(name if key is None else key)
        self.var_names.append(name)
        self.cost.append(float(cost))
        self.upper.append(upper)
        return len(self.var_names) - 1

    def add_constraint(self, coefs: Mapping[int, float], sense: str, rhs: float,
                       name: str | None = None, key=None) -> int:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown relation {sense!r}")
        n = self.n_vars
        clean = {}
        for j, a in coefs.items():
            if not 0 <= j < n:
                raise ValueError(f"constraint references undeclared variable {j}")
            if a != 0:
                clean[j] = clean.get(j, 0.0) + float(a)
        self.constraints.append(
            Constraint(clean, sense, float(rhs), name or f"c{len(self.constraints)}", key)
        )
        return len(self.constraints) - 1

    def index(self) -> dict:
        return {k: j for j, k in enumerate(self.keys)}

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return np.array([sum(a * x[j] for j, a in c.coefs.items()) for c in self.constraints])

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((self.n_rows, self.n_vars))
        for i, c in enumerate(self.constraints):
            for j, a in c.coefs.items():
                A[i, j] = a
        return A, np.array([c.rhs for c in self.constraints])

    def write_lp(self, target) -> None:
        """Dump in CPLEX LP text format (``target`` is a path or text stream)."""
        names = [_lp_name(v) for v in self.var_names]

        def expr(coefs):
            if not coefs:
                return "0 " + names[0] if names else "0"
            parts = []
            for j, a in sorted(coefs.items()):
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.12g} {names[j]}")
            s = " ".join(parts)
            return s[2:] if s.startswith("+ ") else s

        out = io.StringIO()
        out.write(f"\\ {self.name}\nMinimize\n obj: ")
        out.write(expr({j: c for j, c in enumerate(self.cost) if c}) + "\nSubject To\n")
        for c in self.constraints:
            op = {LE: "<=", EQ: "=", GE: ">="}[c.sense]
            out.write(f" {_lp_name(c.name)}: {expr(c.coefs)} {op} {c.rhs:.12g}\n")
        bounded = [(j, u) for j, u in enumerate(self.upper) if u is not None]
        if bounded:
            out.write("Bounds\n")
            for j, u in bounded:
                out.write(f" 0 <= {names[j]} <= {u:.12g}\n")
        out.write("End\n")
        if isinstance(target, (str, Path)):
            Path(target).write_text(out.getvalue())
        else:
            target.write(out.getvalue())


def _lp_name(s: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_.]", "_", s)
    return s if s and not s[0].isdigit() and s[0] != "." else "v" + s


@dataclass
class BasicSolution:
    status: str
    x: np.ndarray
    objective: float
    basis: tuple[int, ...] = ()
    duals: np.ndarray | None = None  # d(objective)/d(rhs) per constraint
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def support(self, tol: float = INTEGRALITY_TOL) -> list[int]:
        return [j for j, v in enumerate(self.x) if v > tol]


def solve_min(model: LpModel, method: str = "auto", max_pivots: int | None = None) -> BasicSolution:
    if method == "auto":
        size = (model.n_rows + 1) * (2 * model.n_vars + 2 * model.n_rows + 1)
        method = "simplex" if size <= _DENSE_LIMIT else "highs"
    if method == "simplex":
        sol = _TableauSimplex(model, max_pivots).solve()
    elif method == "highs":
        sol = _solve_highs(model)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.optimal:
        _check_feasible(model, sol.x)
    return sol


def _check_feasible(model: LpModel, x: np.ndarray) -> None:
    if np.any(x < -FEAS_TOL * 10):
        raise LpError("solver returned a negative variable")
    act = model.row_activity(x)
    for c, a in zip(model.constraints, act):
        tol = 1e-7 * max(1.0, abs(c.rhs))
        bad = (c.sense == LE and a > c.rhs + tol) or (c.sense == GE and a < c.rhs - tol) or (
            c.sense == EQ and abs(a - c.rhs) > tol
        )
        if bad:
            raise LpError(f"constraint {c.name} violated after solve ({a} {c.sense} {c.rhs})")


def is_vertex(model: LpModel, sol: BasicSolution, tol: float = 1e-7) -> bool:
    """Rank certificate: tight rows restricted to the free variables have full column rank."""
    x = sol.x
    free = [
        j for j in range(model.n_vars)
        if x[j] > tol and (model.upper[j] is None or x[j] < model.upper[j] - tol)
    ]
    if not free:
        return True
    act = model.row_activity(x)
    rows = []
    for c, a in zip(model.constraints, act):
        if c.sense == EQ or abs(a - c.rhs) <= tol * max(1.0, abs(c.rhs)):
            rows.append([c.coefs.get(j, 0.0) for j in free])
    if len(rows) < len(free):
        return False
    return np.linalg.matrix_rank(np.array(rows)) == len(free)


class _TableauSimplex:
    def __init__(self, model: LpModel, max_pivots: int | None):
        self.model = model
        self.max_pivots = max_pivots
        self.pivots = 0

    def _build(self):
        m = self.model
        n = m.n_vars
        rows, senses, rhs, signs = [], [], [], []
        for c in m.constraints:
            rows.append(c.coefs)
            senses.append(c.sense)
            rhs.append(c.rhs)
        n_model_rows = len(rows)
        for j, u in enumerate(m.upper):
            if u is not None:
                rows.append({j: 1.0})
                senses.append(LE)
                rhs.append(u)
        k = len(rows)
        # flip rows with negative right side first; that decides slack/artificial needs
        for i in range(k):
            sign = 1.0
            if rhs[i] < 0:
                sign, rhs[i] = -1.0, -rhs[i]
                senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]
            signs.append(sign)
        n_slack = sum(1 for s in senses if s != EQ)
        n_art = sum(1 for s in senses if s != LE)
        total = n + n_slack + n_art
        T = np.zeros((k, total + 1))
        basis = np.empty(k, dtype=int)
        init_col = np.empty(k, dtype=int)
        s_col, a_col = n, n + n_slack
        for i, (coefs, sense, b) in enumerate(zip(rows, senses, rhs)):
            sign = signs[i]
            for j, a in coefs.items():
                T[i, j] = sign * a
            T[i, -1] = b
            if sense == LE:
                T[i, s_col] = 1.0
                basis[i] = init_col[i] = s_col
                s_col += 1
            else:
                if sense == GE:
                    T[i, s_col] = -1.0
                    s_col += 1
                T[i, a_col] = 1.0
                basis[i] = init_col[i] = a_col
                a_col += 1
        self.n, self.n_struct_cols = n, n + n_slack
        self.T, self.basis, self.init_col = T, basis, init_col
        self.signs = np.array(signs)
        self.n_model_rows = n_model_rows
        self.row_alive = np.ones(k, dtype=bool)
        limit = self.max_pivots or 50 * (k + total) + 1000
        self.limit = limit

    def _iterate(self, rc: np.ndarray, allowed: int) -> str:
        T = self.T
        while True:
            # Bland: lowest-index column with negative reduced cost
            cand = np.nonzero(rc[:allowed] < -_PIVOT_TOL)[0]
            if cand.size == 0:
                return OPTIMAL
            j = int(cand[0])
            col = T[:, j]
            pos = np.nonzero((col > _PIVOT_TOL) & self.row_alive)[0]
            if pos.size == 0:
                return UNBOUNDED
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            self._pivot(r, j, rc)
            if self.pivots > self.limit:
                raise LpError(f"simplex exceeded {self.limit} pivots without converging")

    def _pivot(self, r: int, j: int, rc: np.ndarray | None = None) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
        if rc is not None and rc[j] != 0.0:
            rc -= rc[j] * T[r, :-1]
        T[np.abs(T) < 1e-13] = 0.0
        self.basis[r] = j
        self.pivots += 1

    def solve(self) -> BasicSolution:
        self._build()
        T = self.T
        n_cols = T.shape[1] - 1
        k = T.shape[0]
        # phase 1
        art_rows = self.basis >= self.n_struct_cols
        rc = np.zeros(n_cols)
        rc[self.n_struct_cols:] = 1.0
        if art_rows.any():
            rc -= T[art_rows, :-1].sum(axis=0)
            self._iterate(rc, n_cols)
            infeas = T[self.basis >= self.n_struct_cols, -1].sum()
            if infeas > 1e-7:
                return BasicSolution(INFEASIBLE, np.zeros(self.n), float("nan"), pivots=self.pivots)
            for i in range(k):
                if self.basis[i] >= self.n_struct_cols:
                    row = T[i, : self.n_struct_cols]
                    nz = np.nonzero(np.abs(row) > 1e-9)[0]
                    if nz.size:
                        self._pivot(i, int(nz[0]))
                    else:
                        self.row_alive[i] = False  # redundant row
        # phase 2
        c = np.zeros(n_cols)
        c[: self.n] = self.model.cost
        rc = c.copy()
        for i in range(k):
            if self.row_alive[i]:
                rc -= c[self.basis[i]] * T[i, :-1]
        status = self._iterate(rc, self.n_struct_cols)
        if status == UNBOUNDED:
            return BasicSolution(UNBOUNDED, np.zeros(self.n), float("-inf"), pivots=self.pivots)
        x = np.zeros(n_cols)
        for i in range(k):
            if self.row_alive[i]:
                x[self.basis[i]] = T[i, -1]
        x = np.where(np.abs(x) < 1e-12, 0.0, x)
        xs = x[: self.n]
        y = np.where(self.row_alive, -rc[self.init_col], 0.0) * self.signs
        basis = tuple(sorted(int(b) for b, alive in zip(self.basis, self.row_alive)
                             if alive and b < self.n))
        return BasicSolution(
            OPTIMAL,
            xs,
            float(np.dot(self.model.cost, xs)),
            basis,
            y[: self.n_model_rows],
            self.pivots,
        )


def _solve_highs(model: LpModel) -> BasicSolution:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    ub_r, ub_c, ub_v, b_ub, ub_map = [], [], [], [], []
    eq_r, eq_c, eq_v, b_eq, eq_map = [], [], [], [], []
    for i, c in enumerate(model.constraints):
        if c.sense == EQ:
            r = len(b_eq)
            for j, a in c.coefs.items():
                eq_r.append(r), eq_c.append(j), eq_v.append(a)
            b_eq.append(c.rhs)
            eq_map.append(i)
        else:
            s = 1.0 if c.sense == LE else -1.0
            r = len(b_ub)
            for j, a in c.coefs.items():
                ub_r.append(r), ub_c.append(j), ub_v.append(s * a)
            b_ub.append(s * c.rhs)
            ub_map.append((i, s))
    n = model.n_vars
    A_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)).tocsr() if b_ub else None
    A_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)).tocsr() if b_eq else None
    bounds = [(0, u) for u in model.upper]
    args = dict(
        c=np.array(model.cost) if n else np.zeros(0),
        A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq, b_eq=b_eq or None,
        bounds=bounds if n else None,
    )
    # interior point with crossover (basic point) is much faster at scale;
    # dual simplex is the fallback when it reports a solver error
    res = linprog(method="highs-ipm", **args)
    if res.status not in (0, 2, 3):
        res = linprog(method="highs-ds", **args)
    if res.status == 2:
        return BasicSolution(INFEASIBLE, np.zeros(n), float("nan"))
    if res.status == 3:
        return BasicSolution(UNBOUNDED, np.zeros(n), float("-inf"))
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    x = np.where(np.abs(res.x) < 1e-12, 0.0, res.x)
    duals = np.zeros(model.n_rows)
    if b_ub:
        for (i, s), mgl in zip(ub_map, res.ineqlin.marginals):
            duals[i] = s * mgl
    if b_eq:
        for i, mgl in zip(eq_map, res.eqlin.marginals):
            duals[i] = mgl
    basis = tuple(
        j for j in range(n)
        if x[j] > INTEGRALITY_TOL and (model.upper[j] is None or x[j] < model.upper[j] - INTEGRALITY_TOL)
    )
    return BasicSolution(OPTIMAL, x, float(res.fun), basis, duals, int(getattr(res, "nit", 0)))

"""Bounded-variable linear programs with duals, plus a 0/1 branch-and-bound.

solve_lp is a thin deterministic layer over HiGHS dual simplex (via scipy):
it normalizes the three row senses, extracts row duals in the convention
the pricing derivation expects (>= rows nonnegative, <= rows nonpositive,
= rows free, minimization throughout), and reports reduced costs from the
bound multipliers. solve_binary adds a depth-first branch-and-bound over a
subset of 0/1 variables on top; the LP structure is compiled to sparse form
once and only the bounds vary per node.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
OBJECTIVE_TOL = 1e-9

GE = ">="
LE = "<="
EQ = "="
_SENSES = (GE, LE, EQ)


class LpError(Exception):
    """Base class for solver failures that are not plain statuses."""


class LpNumericalError(LpError):
    """The underlying solver reported numerical difficulty."""


class TimeBudgetError(LpError):
    """A time limit expired before any incumbent was found."""


@dataclass(frozen=True)
class Row:
    """One linear constraint: sparse coefficients, a sense, and a rhs."""

    coeffs: Mapping[int, float]
    sense: str
    rhs: float

    def __post_init__(self) -> None:
        if self.sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}, got {self.sense!r}")
        if not math.isfinite(self.rhs):
            raise ValueError("rhs must be finite")
        coeffs = dict(self.coeffs)
        for j, v in coeffs.items():
            if j < 0 or not math.isfinite(v):
                raise ValueError(f"bad coefficient {v!r} for variable {j}")
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class LinearProgram:
    """Minimize objective . x subject to rows, with box bounds per variable."""

    objective: tuple[float, ...]
    var_bounds: tuple[tuple[float, float], ...]
    rows: tuple[Row, ...]

    def __post_init__(self) -> None:
        objective = tuple(float(c) for c in self.objective)
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.var_bounds)
        rows = tuple(self.rows)
        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "var_bounds", bounds)
        object.__setattr__(self, "rows", rows)
        n = len(objective)
        if len(bounds) != n:
            raise ValueError("objective and var_bounds must align")
        if not all(math.isfinite(c) for c in objective):
            raise ValueError("objective must be finite")
        for j, (lo, hi) in enumerate(bounds):
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError(f"bounds of variable {j} must not be NaN")
            if lo > hi:
                raise ValueError(f"variable {j} has lower bound above upper bound")
        for row in rows:
            if row.coeffs and max(row.coeffs) >= n:
                raise ValueError("row references a variable outside the program")

    @property
    def n_vars(self) -> int:
        return len(self.objective)


@dataclass(frozen=True)
class LpSolution:
    """Solver outcome; x/duals are populated only when status is 'optimal'."""

    status: str
    x: np.ndarray | None
    objective_value: float | None
    row_duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    timed_out: bool = False


class _Compiled:
    """Sparse scipy form of a LinearProgram; bounds are supplied per solve."""

    __slots__ = ("c", "a_ub", "b_ub", "a_eq", "b_eq", "row_kind", "n_rows")

    def __init__(self, lp: LinearProgram) -> None:
        n = lp.n_vars
        self.c = np.asarray(lp.objective, dtype=np.float64)
        ub_data: list[float] = []
        ub_i: list[int] = []
        ub_j: list[int] = []
        ub_rhs: list[float] = []
        eq_data: list[float] = []
        eq_i: list[int] = []
        eq_j: list[int] = []
        eq_rhs: list[float] = []
        # row_kind[r] = (sense, position inside its scipy block)
        self.row_kind: list[tuple[str, int]] = []
        for row in lp.rows:
            if row.sense == EQ:
                k = len(eq_rhs)
                for j, v in row.coeffs.items():
                    eq_data.append(v)
                    eq_i.append(k)
                    eq_j.append(j)
                eq_rhs.append(row.rhs)
                self.row_kind.append((EQ, k))
            else:
                flip = -1.0 if row.sense == GE else 1.0
                k = len(ub_rhs)
                for j, v in row.coeffs.items():
                    ub_data.append(flip * v)
                    ub_i.append(k)
                    ub_j.append(j)
                ub_rhs.append(flip * row.rhs)
                self.row_kind.append((row.sense, k))
        self.n_rows = len(lp.rows)
        if ub_rhs:
            self.a_ub = sparse.csr_matrix(
                (ub_data, (ub_i, ub_j)), shape=(len(ub_rhs), n)
            )
            self.b_ub = np.asarray(ub_rhs)
        else:
            self.a_ub = None
            self.b_ub = None
        if eq_rhs:
            self.a_eq = sparse.csr_matrix(
                (eq_data, (eq_i, eq_j)), shape=(len(eq_rhs), n)
            )
            self.b_eq = np.asarray(eq_rhs)
        else:
            self.a_eq = None
            self.b_eq = None

    def solve(self, bounds: np.ndarray) -> LpSolution:
        res = linprog(
            self.c,
            A_ub=self.a_ub,
            b_ub=self.b_ub,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=bounds,
            method="highs-ds",
        )
        if res.status == 2:
            return LpSolution("infeasible", None, None, None, None)
        if res.status == 3:
            return LpSolution("unbounded", None, None, None, None)
        if res.status != 0:
            raise LpNumericalError(
                f"solver reported numerical difficulty: {res.message}"
            )
        duals = np.empty(self.n_rows)
        for r, (sense, k) in enumerate(self.row_kind):
            if sense == EQ:
                duals[r] = res.eqlin.marginals[k]
            elif sense == LE:
                duals[r] = res.ineqlin.marginals[k]
            else:
                duals[r] = -res.ineqlin.marginals[k]
        reduced = np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
        return LpSolution(
            "optimal", np.asarray(res.x), float(res.fun), duals, reduced
        )


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve one LP to a basic optimal solution with duals."""
    comp = _Compiled(lp)
    return comp.solve(np.asarray(lp.var_bounds, dtype=np.float64))


def solve_binary(
    lp: LinearProgram,
    integer_vars: Iterable[int],
    time_limit: float | None = None,
) -> LpSolution:
    """Depth-first branch-and-bound over the given 0/1 variables.

    Branches on the most fractional variable (|value - 0.5| minimal, ties to
    the lowest index), exploring the fix-to-one child first. A subtree is
    pruned when its relaxation cannot strictly beat the incumbent. On time
    expiry the best incumbent is returned with ``timed_out`` set; with no
    incumbent yet, :class:`TimeBudgetError` is raised.
    """
    int_vars = sorted(set(integer_vars))
    for j in int_vars:
        lo, hi = lp.var_bounds[j]
        if lo < -1e-12 or hi > 1.0 + 1e-12:
            raise ValueError(f"integer variable {j} must have bounds within [0, 1]")
    comp = _Compiled(lp)
    base_bounds = np.asarray(lp.var_bounds, dtype=np.float64)
    start = time.monotonic()

    best: LpSolution | None = None
    stack: list[np.ndarray] = [base_bounds]
    timed_out = False
    while stack:
        if time_limit is not None and time.monotonic() - start > time_limit:
            timed_out = True
            break
        bounds = stack.pop()
        node = comp.solve(bounds)
        if node.status == "infeasible":
            continue
        if node.status == "unbounded":
            return node
        assert node.x is not None and node.objective_value is not None
        if best is not None and node.objective_value >= best.objective_value:
            continue
        branch_j = -1
        branch_dist = 2.0
        for j in int_vars:
            v = node.x[j]
            if min(v, 1.0 - v) <= INTEGRALITY_TOL:
                continue
            dist = abs(v - 0.5)
            if dist < branch_dist:
                branch_dist = dist
                branch_j = j
        if branch_j < 0:
            best = node
            continue
        zero = bounds.copy()
        zero[branch_j] = (0.0, 0.0)
        one = bounds.copy()
        one[branch_j] = (1.0, 1.0)
        stack.append(zero)
        stack.append(one)

    if best is None:
        if timed_out:
            raise TimeBudgetError(
                f"binary solve hit the {time_limit}s limit with no incumbent"
            )
        return LpSolution("infeasible", None, None, None, None)
    if timed_out:
        return LpSolution(
            best.status,
            best.x,
            best.objective_value,
            best.row_duals,
            best.reduced_costs,
            timed_out=True,
        )
    return best

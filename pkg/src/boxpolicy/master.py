"""Restricted master problems over a working set of hyperboxes.

The master decides which boxes to switch on (s_j) and charges each sample's
score for a mismatch between its treatment and the policy decision (xi_i).
Four constraint families tie the two together, one per combination of
treatment arm and score sign; their duals (mu1, mu2, mu3, mu4, lambda) are
exactly what the pricing search consumes, and the sign conventions here are
normalized so all of them are nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .data import DataError, Hyperbox, IndexPartition, box_memberships
from .lp import GE, LE, LinearProgram, LpSolution, Row, solve_binary, solve_lp
from .scores import ScoreVector


@dataclass(frozen=True)
class MasterProblem:
    """One node's restricted master: working set, branching cuts, and data.

    ``x`` holds the covariates of the retained samples, aligned with
    ``psi.psi`` (row k belongs to score k). ``cuts`` is a set of
    (box index, fix) pairs; fix=1 forces the box in, fix=0 out.
    """

    working_set: tuple[Hyperbox, ...]
    cuts: frozenset[tuple[int, int]]
    partition: IndexPartition
    psi: ScoreVector
    m_max: int
    omega: float
    x: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "working_set", tuple(self.working_set))
        object.__setattr__(self, "cuts", frozenset(self.cuts))
        x = np.asarray(self.x, dtype=np.float64)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        n = self.psi.n
        if x.ndim != 2 or x.shape[0] != n:
            raise DataError("covariates must align with the retained scores")
        if self.partition.size != n:
            raise DataError("partition must cover the retained scores")
        if self.m_max < 0:
            raise DataError("m_max must be nonnegative")
        if self.omega < 0:
            raise DataError("omega must be nonnegative")
        fixed_on = set()
        fixed_off = set()
        for j, fix in self.cuts:
            if not (0 <= j < len(self.working_set)):
                raise DataError(f"cut references box {j} outside the working set")
            if fix not in (0, 1):
                raise DataError("cut fix must be 0 or 1")
            (fixed_on if fix == 1 else fixed_off).add(j)
        if fixed_on & fixed_off:
            j = min(fixed_on & fixed_off)
            raise DataError(f"contradictory cuts: box {j} fixed to both 0 and 1")
        if len(fixed_on) > self.m_max:
            raise DataError(
                f"{len(fixed_on)} boxes fixed on exceeds the box budget {self.m_max}"
            )

    @cached_property
    def membership(self) -> np.ndarray:
        """(n_boxes, n_samples) closed-interval containment matrix."""
        return box_memberships(self.working_set, self.x)

    @property
    def n_boxes(self) -> int:
        return len(self.working_set)

    @property
    def n_samples(self) -> int:
        return self.psi.n

    def unfixed(self) -> tuple[int, ...]:
        cut_boxes = {j for j, _ in self.cuts}
        return tuple(j for j in range(self.n_boxes) if j not in cut_boxes)


@dataclass(frozen=True)
class MasterDuals:
    """Nonnegative duals of the relaxed master, keyed like the constraints."""

    mu1: dict[int, float]
    mu2: dict[tuple[int, int], float]
    mu3: dict[tuple[int, int], float]
    mu4: dict[int, float]
    lam: float

    @cached_property
    def mu2_sums(self) -> dict[int, float]:
        """Per-sample totals of mu2 over the sample's covering boxes."""
        out: dict[int, float] = {}
        for (i, _j), v in self.mu2.items():
            out[i] = out.get(i, 0.0) + v
        return out

    @cached_property
    def mu3_sums(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (i, _j), v in self.mu3.items():
            out[i] = out.get(i, 0.0) + v
        return out


@dataclass(frozen=True)
class MasterSolution:
    s: np.ndarray
    xi: np.ndarray
    objective: float
    duals: MasterDuals | None
    timed_out: bool = False


def _row_layout(problem: MasterProblem):
    """Canonical constraint rows plus a tag per row for dual extraction."""
    part = problem.partition
    member = problem.membership
    n_boxes = problem.n_boxes
    n = problem.n_samples
    xi_col = n_boxes  # xi block starts right after the s block

    rows: list[Row] = []
    tags: list[tuple] = []

    for i in part.treated_pos:
        coeffs = {xi_col + i: 1.0}
        for j in np.flatnonzero(member[:, i]):
            coeffs[int(j)] = 1.0
        rows.append(Row(coeffs, GE, 1.0))
        tags.append(("mu1", i))
    for i in part.control_pos:
        for j in np.flatnonzero(member[:, i]):
            rows.append(Row({xi_col + i: 1.0, int(j): -1.0}, GE, 0.0))
            tags.append(("mu2", i, int(j)))
    for i in part.treated_neg:
        for j in np.flatnonzero(member[:, i]):
            rows.append(Row({xi_col + i: 1.0, int(j): 1.0}, LE, 1.0))
            tags.append(("mu3", i, int(j)))
    for i in part.control_neg:
        coeffs = {xi_col + i: 1.0}
        for j in np.flatnonzero(member[:, i]):
            coeffs[int(j)] = -1.0
        rows.append(Row(coeffs, LE, 0.0))
        tags.append(("mu4", i))
    rows.append(Row({j: 1.0 for j in range(n_boxes)}, LE, float(problem.m_max)))
    tags.append(("lam",))
    for j, fix in sorted(problem.cuts):
        if fix == 1:
            rows.append(Row({j: 1.0}, GE, 1.0))
        else:
            rows.append(Row({j: 1.0}, LE, 0.0))
        tags.append(("cut", j, fix))
    assert len(rows) == len(tags)
    return rows, tags


def _assemble(
    problem: MasterProblem, cap_boxes: bool
) -> tuple[LinearProgram, list[tuple]]:
    n = problem.n_samples
    inv_n = 1.0 / n
    objective = tuple([problem.omega] * problem.n_boxes) + tuple(
        float(p) * inv_n for p in problem.psi.psi
    )
    s_cap = 1.0 if cap_boxes else math.inf
    bounds = ((0.0, s_cap),) * problem.n_boxes + ((0.0, 1.0),) * n
    rows, tags = _row_layout(problem)
    return LinearProgram(objective, bounds, tuple(rows)), tags


def build_master(problem: MasterProblem, relaxed: bool) -> LinearProgram:
    """Assemble the node LP: s variables first, then one xi per sample.

    The LP is identical for both values of ``relaxed``; integrality of the
    s block is not expressible in the LP type and is enforced by
    solve_integer handing the s indices to the binary solver.
    """
    del relaxed
    lp, _tags = _assemble(problem, cap_boxes=True)
    return lp


def _extract_duals(tags, row_duals: np.ndarray) -> MasterDuals:
    mu1: dict[int, float] = {}
    mu2: dict[tuple[int, int], float] = {}
    mu3: dict[tuple[int, int], float] = {}
    mu4: dict[int, float] = {}
    lam = 0.0
    for tag, dual in zip(tags, row_duals):
        kind = tag[0]
        if kind == "mu1":
            mu1[tag[1]] = max(0.0, float(dual))
        elif kind == "mu2":
            mu2[(tag[1], tag[2])] = max(0.0, float(dual))
        elif kind == "mu3":
            mu3[(tag[1], tag[2])] = max(0.0, -float(dual))
        elif kind == "mu4":
            mu4[tag[1]] = max(0.0, -float(dual))
        elif kind == "lam":
            lam = max(0.0, -float(dual))
    return MasterDuals(mu1, mu2, mu3, mu4, lam)


def _to_master_solution(
    problem: MasterProblem, sol: LpSolution, tags
) -> MasterSolution:
    assert sol.x is not None
    values = np.clip(sol.x, 0.0, 1.0)
    s = values[: problem.n_boxes]
    xi = values[problem.n_boxes :]
    duals = _extract_duals(tags, sol.row_duals) if sol.row_duals is not None else None
    return MasterSolution(
        s=s,
        xi=xi,
        objective=float(sol.objective_value),
        duals=duals,
        timed_out=sol.timed_out,
    )


def solve_relaxed(problem: MasterProblem) -> MasterSolution:
    """LP relaxation of the node master, with normalized duals.

    The solve drops the caps on the box variables. Wherever a cap could
    bind it is already implied by a pair row together with the xi bounds,
    so the optimum value is unchanged, and without upper bounds every box
    column's reduced cost is nonnegative at the optimum. That keeps the
    duals usable for pricing: no box already in the working set can look
    strictly attractive again. Reported s values are clipped back to [0,1].
    """
    lp, tags = _assemble(problem, cap_boxes=False)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise DataError(f"relaxed master is {sol.status}; cuts must be contradictory")
    return _to_master_solution(problem, sol, tags)


def solve_integer(
    problem: MasterProblem, time_limit: float | None = None
) -> MasterSolution:
    """Binary-s master via branch-and-bound; xi comes out integral on its own."""
    lp, tags = _assemble(problem, cap_boxes=True)
    sol = solve_binary(lp, range(problem.n_boxes), time_limit=time_limit)
    if sol.status != "optimal":
        raise DataError(f"integer master is {sol.status}; cuts must be contradictory")
    return _to_master_solution(problem, sol, tags)


def column_reduced_cost(
    duals: MasterDuals,
    part: IndexPartition,
    delta: np.ndarray,
    omega: float,
) -> float:
    """Reduced cost of a candidate box from its membership vector.

    ``delta[i]`` says whether retained sample i falls inside the box. The
    mu2/mu3 contributions enter through their per-sample totals over the
    boxes already in the working set; a candidate covering a control sample
    with positive score is charged everything that sample's rows carry.
    """
    delta = np.asarray(delta, dtype=bool)
    rc = omega + duals.lam
    for i in part.treated_pos:
        if delta[i]:
            rc -= duals.mu1.get(i, 0.0)
    for i in part.control_pos:
        if delta[i]:
            rc += duals.mu2_sums.get(i, 0.0)
    for i in part.treated_neg:
        if delta[i]:
            rc += duals.mu3_sums.get(i, 0.0)
    for i in part.control_neg:
        if delta[i]:
            rc -= duals.mu4.get(i, 0.0)
    return rc

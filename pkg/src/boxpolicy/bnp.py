"""Branch-and-price search for the best small union of hyperboxes.

Each node of the search tree holds a restricted master over the boxes
generated so far plus branching cuts that pin individual boxes in or out.
Column generation enlarges the working set until no box prices favorably,
branching picks the largest-volume fractional box, and an integer solve on
the enlarged working set keeps the incumbent fresh after every fractional
node. Nodes are explored first-in-first-out.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .data import (
    DataError,
    Dataset,
    Hyperbox,
    Policy,
    box_memberships,
    partition,
    span_of,
)
from .lp import TimeBudgetError
from .master import MasterProblem, MasterSolution, solve_integer, solve_relaxed
from .pricing import PricingSolution, build_pricing, solve_pricing
from .scores import ScoreVector

CgObserver = Callable[[MasterProblem, MasterSolution, PricingSolution], None]


@dataclass(frozen=True)
class BnPConfig:
    """Knobs of one policy fit.

    m_max caps the number of boxes, omega charges a per-box penalty, and
    flip negates treatment labels before fitting so the boxes describe the
    control region instead.
    """

    m_max: int
    omega: float = 0.0
    max_nodes: int = 50
    pricing_time_limit: float | None = 180.0
    cg_max_rounds: int = 500
    tol: float = 1e-9
    flip: bool = False

    def __post_init__(self) -> None:
        if self.m_max < 0:
            raise DataError("m_max must be nonnegative")
        if self.omega < 0:
            raise DataError("omega must be nonnegative")
        if self.max_nodes <= 0:
            raise DataError("max_nodes must be positive")
        if self.pricing_time_limit is not None and self.pricing_time_limit < 0:
            raise DataError("pricing_time_limit must be nonnegative")
        if self.cg_max_rounds <= 0:
            raise DataError("cg_max_rounds must be positive")
        if self.tol <= 0:
            raise DataError("tol must be positive")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a fit: the policy plus solve diagnostics."""

    policy: Policy
    objective: float
    relaxation_bound: float
    nodes_explored: int
    columns_generated: int
    status: str


@dataclass(frozen=True)
class NodeRecord:
    """Per-node progress snapshot emitted through the ``progress`` hook."""

    node_id: int
    relaxed_objective: float
    incumbent_objective: float
    columns_added: int


def column_generation(
    problem: MasterProblem,
    config: BnPConfig,
    observer: CgObserver | None = None,
) -> tuple[MasterSolution, tuple[Hyperbox, ...]]:
    """Grow the working set until no box prices below zero.

    Returns the final relaxed solution and the enlarged working set. The
    solution is marked timed out when the loop ended for budget reasons
    (round cap, or a pricing timeout that could not rule out a better box)
    rather than proven optimality.
    """
    prob = problem
    ws = tuple(problem.working_set)
    known = set(ws)
    solution = solve_relaxed(prob)
    rounds = 0
    budget_hit = False
    while True:
        instance = build_pricing(solution.duals, prob.partition, prob.x, prob.omega)
        pricing = solve_pricing(instance, config.pricing_time_limit)
        rounds += 1
        if observer is not None:
            observer(prob, solution, pricing)
        if pricing.box is None or pricing.objective <= config.tol:
            budget_hit = pricing.timed_out
            break
        if pricing.box in known:
            break
        ws = ws + (pricing.box,)
        known.add(pricing.box)
        prob = dataclasses.replace(prob, working_set=ws)
        solution = solve_relaxed(prob)
        if rounds >= config.cg_max_rounds:
            budget_hit = True
            break
    if budget_hit:
        solution = dataclasses.replace(solution, timed_out=True)
    return solution, ws


def branch_select(
    solution: MasterSolution, working_set: tuple[Hyperbox, ...], tol: float
) -> int:
    """Index of the fractional box to branch on.

    Largest volume wins; ties go to the box whose value sits closest to
    one half, then to the lowest index.
    """
    best: tuple[float, float, int] | None = None
    for j, value in enumerate(solution.s):
        if min(value, 1.0 - value) <= tol:
            continue
        key = (-working_set[j].volume(), abs(value - 0.5), j)
        if best is None or key < best:
            best = key
    if best is None:
        raise DataError("no fractional box to branch on")
    return best[2]


def _is_integral(s: np.ndarray, tol: float) -> bool:
    return all(min(v, 1.0 - v) <= tol for v in s)


def _chosen_boxes(
    working_set: tuple[Hyperbox, ...], s: np.ndarray
) -> tuple[Hyperbox, ...]:
    return tuple(working_set[j] for j in range(len(s)) if s[j] > 0.5)


def _exact_objective(prob: MasterProblem, boxes: tuple[Hyperbox, ...]) -> float:
    """Penalized mismatch objective of a box union, recomputed from scratch."""
    n = prob.n_samples
    if boxes:
        covered = box_memberships(boxes, prob.x).any(axis=0)
    else:
        covered = np.zeros(n, dtype=bool)
    treated = np.zeros(n, dtype=bool)
    treated[list(prob.partition.treated_pos)] = True
    treated[list(prob.partition.treated_neg)] = True
    mismatch = np.where(treated, ~covered, covered)
    value = float(prob.psi.psi[mismatch].sum()) / n
    return value + prob.omega * len(boxes)


def fit(
    dataset: Dataset,
    scores: ScoreVector,
    config: BnPConfig,
    progress: Callable[[NodeRecord], None] | None = None,
    cg_observer: CgObserver | None = None,
    initial_boxes: Sequence[Hyperbox] = (),
) -> FitResult:
    """Best union of at most m_max boxes for the given mismatch scores.

    Explores restricted masters first-in-first-out: column generation at
    every node, an integer solve at the root and after each branching to
    maintain the incumbent, pruning against the incumbent in between.

    initial_boxes seeds the root working set, so the root integer solve
    already gets to pick from them. Passing the boxes of a previous fit
    with a smaller budget guarantees the new incumbent is at least as
    good, whatever the node budget. With flip set, the seeds must live in
    the same flipped orientation the fit will search.
    """
    x = dataset.x[scores.kept]
    t = dataset.t[scores.kept]
    if config.flip:
        t = -t
    part = partition(scores.psi, t)
    root_box = span_of(x, np.arange(x.shape[0]))
    seeds = [root_box]
    for box in initial_boxes:
        if box.d != x.shape[1]:
            raise DataError(
                f"initial box has {box.d} dimensions, data has {x.shape[1]}"
            )
        if box not in seeds:
            seeds.append(box)
    root = MasterProblem(
        working_set=tuple(seeds),
        cuts=frozenset(),
        partition=part,
        psi=scores,
        m_max=config.m_max,
        omega=config.omega,
        x=x,
    )

    best_boxes: tuple[Hyperbox, ...] | None = None
    best_value = math.inf
    queue: deque[MasterProblem] = deque([root])
    nodes_explored = 0
    columns_generated = 0
    relaxation_bound = -math.inf
    budget_hit = False

    def consider(boxes: tuple[Hyperbox, ...]) -> None:
        nonlocal best_boxes, best_value
        value = _exact_objective(root, boxes)
        if value <= best_value:
            best_boxes = boxes
            best_value = value

    while queue and nodes_explored < config.max_nodes:
        prob = queue.popleft()
        node_id = nodes_explored
        nodes_explored += 1

        before = prob.n_boxes
        relaxed, ws = column_generation(prob, config, cg_observer)
        columns_generated += len(ws) - before
        prob = dataclasses.replace(prob, working_set=ws)
        if relaxed.timed_out:
            budget_hit = True
        if node_id == 0:
            relaxation_bound = relaxed.objective
            try:
                integer = solve_integer(prob, config.pricing_time_limit)
            except TimeBudgetError:
                budget_hit = True
                consider(())
            else:
                if integer.timed_out:
                    budget_hit = True
                consider(_chosen_boxes(ws, integer.s))

        pruned = best_value + config.tol < relaxed.objective
        if not pruned:
            if _is_integral(relaxed.s, config.tol):
                consider(_chosen_boxes(ws, relaxed.s))
            else:
                j = branch_select(relaxed, ws, config.tol)
                fixed_on = sum(1 for _, f in prob.cuts if f == 1)
                if fixed_on < prob.m_max:
                    queue.append(
                        dataclasses.replace(prob, cuts=prob.cuts | {(j, 1)})
                    )
                queue.append(dataclasses.replace(prob, cuts=prob.cuts | {(j, 0)}))
                if node_id != 0:
                    try:
                        integer = solve_integer(
                            dataclasses.replace(prob, cuts=frozenset()),
                            config.pricing_time_limit,
                        )
                    except TimeBudgetError:
                        budget_hit = True
                    else:
                        if integer.timed_out:
                            budget_hit = True
                        consider(_chosen_boxes(ws, integer.s))

        if progress is not None:
            progress(
                NodeRecord(
                    node_id=node_id,
                    relaxed_objective=relaxed.objective,
                    incumbent_objective=best_value,
                    columns_added=len(ws) - before,
                )
            )

    assert best_boxes is not None
    if queue:
        status = "node_limit"
    elif budget_hit:
        status = "time_limit"
    else:
        status = "optimal"
    policy = Policy(boxes=best_boxes, flipped=config.flip)
    return FitResult(
        policy=policy,
        objective=best_value,
        relaxation_bound=relaxation_bound,
        nodes_explored=nodes_explored,
        columns_generated=columns_generated,
        status=status,
    )

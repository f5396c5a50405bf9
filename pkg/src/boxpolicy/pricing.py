"""Search for the best new hyperbox given master duals.

Each retained sample enters with a signed coefficient: treated samples with
positive scores and control samples with negative scores reward coverage,
the other two blocks penalize it (a box cannot skip a penalized sample that
falls inside it). The search maximizes covered coefficient mass minus the
box-budget dual and the per-rule penalty; the negation of that maximum is
the candidate column's reduced cost.

Two interchangeable kernels do the heavy lifting: a compiled extension and
a pure-Python twin. The compiled one is preferred when importable; set
``BOXPOLICY_PURE_PRICING=1`` to force the fallback.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from .data import DataError, Hyperbox, IndexPartition
from .master import MasterDuals

COEFF_EPSILON = 1e-12
DEFAULT_TIME_LIMIT = 180.0
BRUTE_FORCE_GUARD = 1_000_000

if os.environ.get("BOXPOLICY_PURE_PRICING"):
    from . import _pricing_py as _kernel
else:
    try:
        from . import _pricing_core as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _pricing_py as _kernel


def kernel_name() -> str:
    """Which search backend is active ('compiled' or 'pure')."""
    return "pure" if _kernel.__name__.endswith("_pricing_py") else "compiled"


@dataclass(frozen=True)
class PricingInstance:
    """Weighted samples plus per-dimension rank structure.

    ``sample_ids`` are indices into the retained-score ordering; ``coeff``
    and ``points`` align with them. ``rank_values[t]`` lists the distinct
    sorted coordinates in dimension t, and ``ranks[i, t]`` is the position
    of sample i's coordinate in that list.
    """

    sample_ids: tuple[int, ...]
    coeff: np.ndarray
    points: np.ndarray
    ranks: np.ndarray
    rank_values: tuple[np.ndarray, ...]
    lambda_: float
    omega: float

    def __post_init__(self) -> None:
        coeff = np.ascontiguousarray(self.coeff, dtype=np.float64)
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        ranks = np.ascontiguousarray(self.ranks, dtype=np.int32)
        values = tuple(
            np.ascontiguousarray(v, dtype=np.float64) for v in self.rank_values
        )
        for arr in (coeff, points, ranks):
            arr.setflags(write=False)
        for arr in values:
            arr.setflags(write=False)
        object.__setattr__(self, "sample_ids", tuple(int(i) for i in self.sample_ids))
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "rank_values", values)
        m = len(self.sample_ids)
        if coeff.shape != (m,) or points.shape[0] != m or ranks.shape[0] != m:
            raise DataError("pricing arrays must align with sample_ids")
        if points.ndim != 2 or points.shape[1] != len(values):
            raise DataError("points must be (n, d) with one rank list per dimension")
        if ranks.shape != points.shape:
            raise DataError("ranks must mirror the points array")
        if self.lambda_ < 0 or self.omega < 0:
            raise DataError("lambda_ and omega must be nonnegative")
        if m and float(np.min(np.abs(coeff))) < COEFF_EPSILON:
            raise DataError("near-zero coefficients must be dropped before search")

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def d(self) -> int:
        return len(self.rank_values)


@dataclass(frozen=True)
class PricingSolution:
    """Best box found: selected samples, their span, and the objective.

    ``reduced_cost`` is the negated objective; a strictly positive objective
    means the box would improve the relaxed master. ``box`` is None when the
    empty selection (no box at all) is the best choice.
    """

    delta: tuple[int, ...]
    box: Hyperbox | None
    objective: float
    reduced_cost: float
    timed_out: bool = False


def build_pricing(
    duals: MasterDuals,
    part: IndexPartition,
    dataset,
    omega: float,
) -> PricingInstance:
    """Turn master duals into per-sample search coefficients.

    ``dataset`` supplies covariates for the retained samples (anything with
    an ``x`` attribute, or an array). Samples whose aggregate dual weight is
    below ``COEFF_EPSILON`` cannot influence any box and are dropped.
    """
    x = np.asarray(getattr(dataset, "x", dataset), dtype=np.float64)
    if x.ndim != 2:
        raise DataError("covariates must form an (n, d) matrix")
    n = x.shape[0]
    if part.size != n:
        raise DataError("partition must cover the covariate rows")

    coeff = np.zeros(n, dtype=np.float64)
    for i in part.treated_pos:
        coeff[i] = duals.mu1.get(i, 0.0)
    for i in part.control_pos:
        coeff[i] = -duals.mu2_sums.get(i, 0.0)
    for i in part.treated_neg:
        coeff[i] = -duals.mu3_sums.get(i, 0.0)
    for i in part.control_neg:
        coeff[i] = duals.mu4.get(i, 0.0)

    keep = np.abs(coeff) >= COEFF_EPSILON
    ids = np.flatnonzero(keep)
    pts = x[ids]
    values = []
    ranks = np.zeros(pts.shape, dtype=np.int32)
    for t in range(x.shape[1]):
        vals = np.unique(pts[:, t])
        values.append(vals)
        ranks[:, t] = np.searchsorted(vals, pts[:, t])
    return PricingInstance(
        sample_ids=tuple(int(i) for i in ids),
        coeff=coeff[ids],
        points=pts,
        ranks=ranks,
        rank_values=tuple(values),
        lambda_=float(duals.lam),
        omega=float(omega),
    )


def _solution_from_kernel(
    instance: PricingInstance, found, objective, sel, lo, hi, timed_out
) -> PricingSolution:
    if not found:
        return PricingSolution(
            delta=(),
            box=None,
            objective=float(objective),
            reduced_cost=-float(objective),
            timed_out=bool(timed_out),
        )
    box = Hyperbox(tuple(float(v) for v in lo), tuple(float(v) for v in hi))
    delta = tuple(instance.sample_ids[i] for i in sel)
    return PricingSolution(
        delta=delta,
        box=box,
        objective=float(objective),
        reduced_cost=-float(objective),
        timed_out=bool(timed_out),
    )


def solve_pricing(
    instance: PricingInstance, time_limit: float | None = DEFAULT_TIME_LIMIT
) -> PricingSolution:
    """Exact best-box search (branch-and-bound over rank intervals)."""
    found, objective, sel, lo, hi, timed_out = _kernel.search(
        instance.ranks,
        instance.coeff,
        list(instance.rank_values),
        instance.lambda_,
        instance.omega,
        time_limit,
    )
    return _solution_from_kernel(instance, found, objective, sel, lo, hi, timed_out)


def solve_pricing_bruteforce(
    instance: PricingInstance, dataset, guard: int = BRUTE_FORCE_GUARD
) -> PricingSolution:
    """Exhaustive oracle: every contiguous rank-interval combination.

    Independent of the search kernel: candidate boxes are materialized from
    rank endpoints and membership is evaluated on raw coordinates. Ties keep
    the lexicographically smallest interval tuple. Intended for tests and
    tiny instances; refuses to enumerate more than ``guard`` combinations.
    """
    x = np.asarray(getattr(dataset, "x", dataset), dtype=np.float64)
    pts = x[list(instance.sample_ids)] if instance.n else instance.points
    coeff = instance.coeff

    total = 1
    for vals in instance.rank_values:
        nt = len(vals)
        total *= nt * (nt + 1) // 2
    if total > guard:
        raise DataError(
            f"brute force would enumerate {total} boxes, above the guard {guard}"
        )

    per_dim = [
        [(a, b) for a in range(len(vals)) for b in range(a, len(vals))]
        for vals in instance.rank_values
    ]
    baseline = -instance.lambda_ - instance.omega
    best_obj = baseline
    best_sel: np.ndarray | None = None
    # product() walks interval tuples in lexicographic order, so keeping only
    # strict improvements retains the lexicographically smallest optimum
    for combo in itertools.product(*per_dim):
        inside = np.ones(instance.n, dtype=bool)
        for t, (a, b) in enumerate(combo):
            vals = instance.rank_values[t]
            inside &= (pts[:, t] >= vals[a]) & (pts[:, t] <= vals[b])
        obj = float(coeff[inside].sum()) - instance.lambda_ - instance.omega
        if obj > best_obj:
            best_obj = obj
            best_sel = inside
    if best_sel is None or not best_sel.any():
        return PricingSolution(
            delta=(), box=None, objective=best_obj, reduced_cost=-best_obj
        )
    chosen = np.flatnonzero(best_sel)
    span_lo = tuple(float(v) for v in pts[chosen].min(axis=0))
    span_hi = tuple(float(v) for v in pts[chosen].max(axis=0))
    delta = tuple(instance.sample_ids[i] for i in chosen)
    return PricingSolution(
        delta=delta,
        box=Hyperbox(span_lo, span_hi),
        objective=best_obj,
        reduced_cost=-best_obj,
    )

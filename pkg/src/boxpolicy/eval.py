"""Policy evaluation: empirical objective, Monte-Carlo value, regret.

Value estimates average the scenario's noise-free outcome means over fresh
covariate draws, so the only randomness is in the draw itself. Regret
reuses the same draw for the learned and the optimal decisions (common
random numbers), which makes the regret of an optimal policy exactly zero
instead of merely small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, Policy, policy_decisions
from .scores import ScoreVector
from .simgen import Scenario, draw_covariates, get_scenario, optimal_decisions


@dataclass(frozen=True)
class EvalReport:
    """One policy's evaluation summary, as emitted by the command line.

    Fields that do not apply to the chosen evaluation mode are ``None``:
    empirical scoring fills only ``empirical_objective``, Monte-Carlo
    scoring fills the other four.
    """

    empirical_objective: float | None
    policy_value: float | None
    regret: float | None
    mc_samples: int | None
    seed: int | None


def empirical_objective(
    policy: Policy, dataset: Dataset, scores: ScoreVector
) -> float:
    """Average score over samples whose treatment disagrees with the policy."""
    kept = scores.kept
    if kept.size and (kept.min() < 0 or kept.max() >= dataset.n):
        raise DataError("scores are not aligned with this dataset")
    xs = dataset.x[kept]
    t = dataset.t[kept]
    decisions = _decide(policy, xs, dataset.d)
    mismatch = t != decisions
    return float(scores.psi[mismatch].sum()) / scores.n


def policy_value_mc(
    policy: Policy, scenario: str | Scenario, n_mc: int, seed: int
) -> float:
    """Estimate the expected outcome under the policy's treatment choices."""
    sc = get_scenario(scenario)
    if n_mc < 1:
        raise DataError("need n_mc >= 1")
    xs = draw_covariates(sc, n_mc, seed)
    decisions = _decide(policy, xs, sc.d)
    return float(sc.mean(xs, decisions.astype(np.float64)).mean())


def regret(
    policy: Policy, scenario: str | Scenario, n_mc: int, seed: int
) -> float:
    """Policy value minus the value of pointwise-optimal decisions.

    Both values average over the same covariate draw, so a policy that
    matches the optimal decisions everywhere scores exactly zero.
    """
    sc = get_scenario(scenario)
    if n_mc < 1:
        raise DataError("need n_mc >= 1")
    xs = draw_covariates(sc, n_mc, seed)
    learned = _decide(policy, xs, sc.d)
    optimal = optimal_decisions(sc, xs)
    value_learned = float(sc.mean(xs, learned.astype(np.float64)).mean())
    value_optimal = float(sc.mean(xs, optimal.astype(np.float64)).mean())
    return value_learned - value_optimal


def rademacher_bound(m_max: int) -> float:
    """Capacity bound of the policy class: sqrt(1 + ln 2) * sqrt(2 * m_max)."""
    if m_max < 0:
        raise DataError("m_max must be nonnegative")
    return math.sqrt(1.0 + math.log(2.0)) * math.sqrt(2.0 * m_max)


def _decide(policy, xs: np.ndarray, d: int) -> np.ndarray:
    """Vectorized decisions, accepting any object with a ``decide`` method."""
    if isinstance(policy, Policy):
        if policy.boxes and policy.boxes[0].d != d:
            raise DataError(
                f"policy works in {policy.boxes[0].d} dimensions, data has {d}"
            )
        return policy_decisions(policy, xs)
    return np.fromiter(
        (int(policy.decide(row)) for row in xs), dtype=np.int64, count=len(xs)
    )

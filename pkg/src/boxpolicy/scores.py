"""Per-sample scores for the off-policy objective.

Three estimators of the same quantity, all expressed so that the fitted
objective is (1/n') * sum of psi_i * I(T_i != pi(X_i)):

* DM   direct method, psi = T * (mu_-1(X) - mu_1(X))
* IPS  inverse propensity scoring, psi = -Y / e_T(X)
* DR   doubly robust, psi = DM + IPS + mu_T(X) / e_T(X)

Samples whose score is numerically zero carry no weight and are dropped
(the partition into positive/negative scores would be ill-defined).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset
from .nuisance import EPSILON, NuisanceModel

ZERO_PSI_THRESHOLD = 1e-12

METHODS = ("dm", "ips", "dr")


@dataclass(frozen=True)
class ScoreVector:
    """Scores for the retained samples.

    ``kept[k]`` is the dataset row of ``psi[k]``; rows whose score fell
    below the zero threshold are absent.
    """

    psi: np.ndarray
    kept: np.ndarray
    method: str

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=np.float64)
        kept = np.asarray(self.kept, dtype=np.int64)
        if psi.ndim != 1 or kept.shape != psi.shape:
            raise DataError("psi and kept must be aligned 1-d arrays")
        if psi.shape[0] == 0:
            raise DataError("score vector must not be empty")
        if (psi == 0.0).any():
            raise DataError("score vector must not contain exact zeros")
        if self.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}, got {self.method!r}")
        psi.setflags(write=False)
        kept.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "kept", kept)

    @property
    def n(self) -> int:
        return int(self.psi.shape[0])


def _check_e(e_t: float) -> None:
    if not (EPSILON <= e_t <= 1.0 - EPSILON):
        raise DataError(
            f"propensity {e_t!r} outside the clipped range "
            f"[{EPSILON}, {1.0 - EPSILON}]"
        )


def psi_dm(t: int, mu_minus: float, mu_plus: float) -> float:
    """Direct-method score t * (mu_-1 - mu_1)."""
    return t * (mu_minus - mu_plus)


def psi_ips(y: float, e_t: float) -> float:
    """Inverse-propensity score -y / e_t; e_t must already be clipped."""
    _check_e(e_t)
    return -y / e_t


def psi_dr(t: int, y: float, mu_minus: float, mu_plus: float, e_t: float) -> float:
    """Doubly robust score: DM + IPS + mu_t / e_t."""
    _check_e(e_t)
    mu_t = mu_plus if t == 1 else mu_minus
    return psi_dm(t, mu_minus, mu_plus) + psi_ips(y, e_t) + mu_t / e_t


def compute_scores(dataset: Dataset, model: NuisanceModel, method: str) -> ScoreVector:
    """Score every sample, dropping numerically-zero entries with a warning."""
    method = method.lower()
    if method not in METHODS:
        raise DataError(f"method must be one of {METHODS}, got {method!r}")

    mu_minus = _predict_mu(model, -1, dataset.x)
    mu_plus = _predict_mu(model, 1, dataset.x)
    e_t = _predict_e(model, dataset)
    if np.any((e_t < EPSILON - 1e-15) | (e_t > 1.0 - EPSILON + 1e-15)):
        raise DataError("propensities must lie in the clipped range [0.01, 0.99]")
    t = dataset.t.astype(np.float64)

    dm = t * (mu_minus - mu_plus)
    if method == "dm":
        psi = dm
    elif method == "ips":
        psi = -dataset.y / e_t
    else:
        mu_t = np.where(dataset.t == 1, mu_plus, mu_minus)
        psi = dm - dataset.y / e_t + mu_t / e_t

    keep = np.abs(psi) >= ZERO_PSI_THRESHOLD
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(
            f"dropped {dropped} sample(s) with |psi| < {ZERO_PSI_THRESHOLD:g}; "
            "they cannot affect the objective",
            stacklevel=2,
        )
    if not keep.any():
        raise DataError("all scores are numerically zero; nothing to optimize")
    return ScoreVector(psi=psi[keep], kept=np.flatnonzero(keep), method=method)


def scale_scores(scores: ScoreVector) -> ScoreVector:
    """Divide by the population standard deviation of psi (no mean shift).

    Positive rescaling preserves the argmin set of the objective, so this
    only conditions the numbers.
    """
    if scores.n < 2:
        raise DataError("scaling needs at least 2 scores")
    sigma = float(scores.psi.std())
    if sigma == 0.0:
        raise DataError("scores have zero standard deviation; cannot scale")
    return ScoreVector(psi=scores.psi / sigma, kept=scores.kept, method=scores.method)


def _predict_mu(model: NuisanceModel, t: int, xs: np.ndarray) -> np.ndarray:
    mu = model.mu
    many = getattr(mu, "predict_many", None)
    if many is not None:
        return np.asarray(many(t, xs), dtype=np.float64)
    return np.array([mu(t, x) for x in xs], dtype=np.float64)


def _predict_e(model: NuisanceModel, dataset: Dataset) -> np.ndarray:
    e = model.e
    many = getattr(e, "predict_many", None)
    if many is not None:
        p_plus = np.asarray(many(1, dataset.x), dtype=np.float64)
        return np.where(dataset.t == 1, p_plus, 1.0 - p_plus)
    return np.array(
        [e(int(t), x) for t, x in zip(dataset.t, dataset.x)], dtype=np.float64
    )

"""Outcome and propensity estimation, plus exact oracles for simulations.

The plug-in pair is deliberately plain: Nadaraya-Watson regression per
treatment arm for the outcome surfaces and a damped-Newton logistic fit for
the propensity. Both are deterministic given the data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import DataError, Dataset
from . import simgen

EPSILON = 0.01
WEIGHT_FLOOR = 1e-12
BANDWIDTH_FLOOR = 1e-3


class SeparationWarning(UserWarning):
    """Perfect separation in the logistic fit; probabilities are clipped."""


@dataclass(frozen=True)
class NuisanceModel:
    """Callable pair (mu, e).

    ``mu(t, x)`` estimates the mean outcome under treatment ``t`` at ``x``;
    ``e(t, x)`` the probability of receiving ``t`` at ``x``. Propensities
    are clipped into [0.01, 0.99] and always satisfy e(+1,x) + e(-1,x) = 1.
    """

    mu: Callable[[int, Sequence[float]], float]
    e: Callable[[int, Sequence[float]], float]


def _silverman(x_arm: np.ndarray) -> np.ndarray:
    """Per-dimension Silverman bandwidths for one arm, floored at 1e-3."""
    n, d = x_arm.shape
    sd = x_arm.std(axis=0, ddof=1)
    factor = (4.0 / ((d + 2.0) * n)) ** (1.0 / (d + 4.0))
    return np.maximum(sd * factor, BANDWIDTH_FLOOR)


class KernelRegression:
    """Per-arm Nadaraya-Watson estimator with a Gaussian product kernel.

    Queries whose total kernel weight falls below 1e-12 (far outside the
    arm's support) return the arm's mean outcome instead of 0/0 noise.
    """

    def __init__(self, dataset: Dataset, bandwidth: float | str = "auto") -> None:
        self._arms: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, float]] = {}
        for t in (-1, 1):
            mask = dataset.t == t
            if mask.sum() < 2:
                raise DataError(
                    f"kernel regression needs >= 2 samples in arm t={t}, "
                    f"got {int(mask.sum())}"
                )
            x_arm = dataset.x[mask]
            y_arm = dataset.y[mask]
            if bandwidth == "auto":
                h = _silverman(x_arm)
            else:
                h_val = float(bandwidth)
                if not h_val > 0:
                    raise DataError("bandwidth must be positive")
                h = np.full(dataset.d, h_val)
            self._arms[t] = (x_arm, y_arm, h, float(y_arm.mean()))
        self.d = dataset.d

    def predict_many(self, t: int, xs: np.ndarray) -> np.ndarray:
        x_arm, y_arm, h, fallback = self._arms[t]
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if xs.shape[1] != self.d:
            raise DataError(f"expected {self.d} coordinates, got {xs.shape[1]}")
        # (q, n_arm) squared scaled distances
        z = (xs[:, None, :] - x_arm[None, :, :]) / h
        w = np.exp(-0.5 * (z**2).sum(axis=2))
        total = w.sum(axis=1)
        out = np.full(xs.shape[0], fallback)
        ok = total >= WEIGHT_FLOOR
        out[ok] = (w[ok] @ y_arm) / total[ok]
        return out

    def __call__(self, t: int, x: Sequence[float]) -> float:
        return float(self.predict_many(t, np.asarray(x)[None, :])[0])


class LogisticPropensity:
    """Logistic model of P(T=+1 | x) with intercept, clipped to [0.01, 0.99]."""

    def __init__(self, weights: np.ndarray, separation: bool) -> None:
        self.weights = weights
        self.separation = separation

    def propensity_plus(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        z = self.weights[0] + xs @ self.weights[1:]
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -700, 700)))
        return np.clip(p, EPSILON, 1.0 - EPSILON)

    def predict_many(self, t: int, xs: np.ndarray) -> np.ndarray:
        p = self.propensity_plus(xs)
        return p if t == 1 else 1.0 - p

    def __call__(self, t: int, x: Sequence[float]) -> float:
        return float(self.predict_many(t, np.asarray(x)[None, :])[0])


def _nll(z: np.ndarray, y01: np.ndarray) -> float:
    # log(1 + e^z) - y*z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - y01 * z))


def fit_logistic(
    dataset: Dataset, max_iter: int = 100, tol: float = 1e-8
) -> LogisticPropensity:
    """Maximum-likelihood logistic propensity via damped Newton steps.

    Stops when the gradient's max-norm drops below ``tol``. If the data are
    perfectly separable the weights diverge; the loop then stops early,
    issues a :class:`SeparationWarning`, and returns the clipped model.
    """
    t = dataset.t
    if (t == 1).sum() == 0 or (t == -1).sum() == 0:
        raise DataError("logistic fit needs both treatment labels present")
    y01 = (t == 1).astype(np.float64)
    features = np.column_stack([np.ones(dataset.n), dataset.x])
    w = np.zeros(features.shape[1])
    separation = False

    z = features @ w
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-z))
        grad = features.T @ (p - y01)
        if np.abs(grad).max() < tol:
            break
        if np.abs(z).max() > 30.0:
            separation = True
            break
        hess = features.T @ (features * (p * (1.0 - p))[:, None])
        hess.flat[:: hess.shape[0] + 1] += 1e-10
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # halve the step until the likelihood stops getting worse
        current = _nll(z, y01)
        scale = 1.0
        for _ in range(60):
            cand = w - scale * step
            z_cand = features @ cand
            if _nll(z_cand, y01) <= current:
                break
            scale *= 0.5
        w = w - scale * step
        z = features @ w
    else:
        p = 1.0 / (1.0 + np.exp(-z))
        grad = features.T @ (p - y01)
        if np.abs(grad).max() >= tol:
            separation = True

    if np.abs(z).max() > 30.0:
        separation = True
    if separation:
        warnings.warn(
            "perfect separation (or non-convergence) in logistic fit; "
            "propensities are clipped to [0.01, 0.99]",
            SeparationWarning,
            stacklevel=2,
        )
    return LogisticPropensity(w, separation)


def fit_kernel_regression(
    dataset: Dataset, bandwidth: float | str = "auto"
) -> KernelRegression:
    """Fit the outcome component; see :class:`KernelRegression`."""
    return KernelRegression(dataset, bandwidth)


def fit_plugin_nuisance(
    dataset: Dataset, bandwidth: float | str = "auto"
) -> NuisanceModel:
    """The default estimated pair: kernel outcomes + logistic propensities."""
    return NuisanceModel(
        mu=fit_kernel_regression(dataset, bandwidth),
        e=fit_logistic(dataset),
    )


def exact_nuisance(scenario: str | simgen.Scenario) -> NuisanceModel:
    """Oracle nuisances for a simulated scenario: true means, e(+1,x) = 1/2."""
    sc = simgen.get_scenario(scenario)

    class _ExactMu:
        d = sc.d

        def __call__(self, t: int, x: Sequence[float]) -> float:
            return simgen.true_mean(sc, x, t)

        def predict_many(self, t: int, xs: np.ndarray) -> np.ndarray:
            xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
            return sc.mean(xs, np.float64(t))

    class _ExactE:
        def __call__(self, t: int, x: Sequence[float]) -> float:
            return 0.5

        def predict_many(self, t: int, xs: np.ndarray) -> np.ndarray:
            xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
            return np.full(xs.shape[0], 0.5)

    return NuisanceModel(mu=_ExactMu(), e=_ExactE())

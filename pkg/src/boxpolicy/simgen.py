"""Synthetic data generators with known optimal policies.

Five named scenarios, all with covariates uniform on [-1,1]^d, a fair coin
for the treatment, and Gaussian outcome noise (sigma = 0.1):

* ``basic``          2D, parabola decision boundary
* ``complex``        2D, optimal region is a ring
* ``very_complex``   2D, two disconnected optimal regions
* ``regret4d``       4D, effect sign driven by the product of all covariates
* ``simple4d``       4D, effect sign driven by the first two covariates

Reproducibility contract: draws come from numpy's counter-based Philox
generator keyed with ``[seed, stream]`` where stream 0 yields covariates,
stream 1 treatments, and stream 2 outcome noise. Covariates are drawn as
``uniform(-1, 1, size=(n, d))``, treatments as ``integers(0, 2, size=n)``
mapped through ``2*b - 1``, and outcomes as ``mean + 0.1 * standard_normal``.
Fixing (scenario, n, seed) therefore fixes the dataset bit for bit, across
processes and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import DataError, Dataset

SIGMA = 0.1

_X_STREAM = 0
_T_STREAM = 1
_NOISE_STREAM = 2


@dataclass(frozen=True)
class Scenario:
    """A named data-generating process with a closed-form outcome mean."""

    id: str
    d: int
    mean: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma: float = SIGMA


def _mean_basic(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    g = x[..., 1] - 0.5 * x[..., 0] ** 2 + 0.25
    return 1.0 + 2.0 * x[..., 0] + x[..., 1] - 2.0 * t * g


def _mean_complex(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    f = -2.0 * t * (0.4**2 - r2) * (r2 - 0.9**2)
    return 1.0 + 2.0 * x[..., 0] + x[..., 1] + f


def _mean_very_complex(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    x0, x1 = x[..., 0], x[..., 1]
    peaks = (
        3.0 * (1.0 - x0) ** 2 * np.exp(-(x0**2) - (x1 + 1.0) ** 2)
        - 10.0 * (x0 / 5.0 - x0**3 - x1**5) * np.exp(-(x0**2) - x1**2)
        - (1.0 / 3.0) * np.exp(-((x0 + 1.0) ** 2) - x1**2)
        - 1.0
    )
    return 1.0 + 2.0 * x0 + x1 - t * peaks


def _mean_regret4d(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    prod = x[..., 0] * x[..., 1] * x[..., 2] * x[..., 3]
    return np.maximum(x[..., 2] + x[..., 3], 0.0) + 0.5 * t * np.sign(prod)


def _mean_simple4d(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    prod = x[..., 0] * x[..., 1]
    return np.maximum(x[..., 2] + x[..., 3], 0.0) + 0.5 * t * np.sign(prod)


SCENARIOS: dict[str, Scenario] = {
    "basic": Scenario("basic", 2, _mean_basic),
    "complex": Scenario("complex", 2, _mean_complex),
    "very_complex": Scenario("very_complex", 2, _mean_very_complex),
    "regret4d": Scenario("regret4d", 4, _mean_regret4d),
    "simple4d": Scenario("simple4d", 4, _mean_simple4d),
}


def get_scenario(name: str | Scenario) -> Scenario:
    if isinstance(name, Scenario):
        return name
    try:
        return SCENARIOS[name]
    except KeyError:
        known = ", ".join(sorted(SCENARIOS))
        raise DataError(f"unknown scenario {name!r} (known: {known})") from None


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def draw_covariates(scenario: str | Scenario, n: int, seed: int) -> np.ndarray:
    """The covariate block of :func:`generate`, exposed for evaluation reuse."""
    sc = get_scenario(scenario)
    return _stream(seed, _X_STREAM).uniform(-1.0, 1.0, size=(n, sc.d))


def generate(scenario: str | Scenario, n: int, seed: int) -> Dataset:
    """Draw a dataset of ``n`` samples; same arguments, same bits."""
    sc = get_scenario(scenario)
    if n < 1:
        raise DataError("need n >= 1")
    x = draw_covariates(sc, n, seed)
    bits = _stream(seed, _T_STREAM).integers(0, 2, size=n)
    t = 2 * bits - 1
    noise = _stream(seed, _NOISE_STREAM).standard_normal(n)
    y = sc.mean(x, t.astype(np.float64)) + sc.sigma * noise
    return Dataset(x, t, y)


def true_mean(scenario: str | Scenario, x: Sequence[float], t: int) -> float:
    """Exact outcome mean m(x, t). ``sign(0) = 0`` in the 4D scenarios."""
    sc = get_scenario(scenario)
    x_arr = np.asarray(x, dtype=np.float64)
    if x_arr.shape != (sc.d,):
        raise DataError(f"expected {sc.d} coordinates, got shape {x_arr.shape}")
    return float(sc.mean(x_arr, np.float64(t)))


def optimal_decision(scenario: str | Scenario, x: Sequence[float]) -> int:
    """Treat only when treating strictly lowers the mean outcome; ties -> -1."""
    sc = get_scenario(scenario)
    m_plus = true_mean(sc, x, 1)
    m_minus = true_mean(sc, x, -1)
    return 1 if m_plus < m_minus else -1


def optimal_decisions(scenario: str | Scenario, xs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`optimal_decision` over rows of ``xs``."""
    sc = get_scenario(scenario)
    xs = np.asarray(xs, dtype=np.float64)
    ones = np.ones(xs.shape[0])
    m_plus = sc.mean(xs, ones)
    m_minus = sc.mean(xs, -ones)
    return np.where(m_plus < m_minus, 1, -1)

"""Core domain types: samples, datasets, hyperboxes, policies, partitions.

Everything in this module is immutable after construction and safe to share
across threads. Treatment labels are always -1/+1 internally; the optional
0/1 convention is translated at the CSV boundary and nowhere else.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

SPANNED_BOXES_GUARD = 14


class DataError(ValueError):
    """Malformed input data (bad CSV cell, label outside the allowed set, ...)."""


@dataclass(frozen=True)
class Sample:
    """One observation: covariates ``x``, treatment ``t`` in {-1,+1}, outcome ``y``.

    Lower outcomes are better throughout the package.
    """

    x: tuple[float, ...]
    t: int
    y: float

    def __post_init__(self) -> None:
        if self.t not in (-1, 1):
            raise DataError(f"treatment label must be -1 or +1, got {self.t!r}")
        if not all(math.isfinite(v) for v in self.x):
            raise DataError("covariates must be finite")
        if not math.isfinite(self.y):
            raise DataError("outcome must be finite")


class Dataset:
    """A fixed collection of samples with shared dimensionality.

    Stores covariates, treatments, and outcomes as read-only numpy arrays
    (``x`` is n-by-d). The ``samples`` view materializes :class:`Sample`
    objects on demand.
    """

    __slots__ = ("x", "t", "y", "_samples")

    def __init__(self, x: np.ndarray, t: np.ndarray, y: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.int64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2:
            raise DataError("covariate matrix must be 2-dimensional")
        n, d = x.shape
        if n < 1:
            raise DataError("dataset needs at least one sample")
        if d < 1:
            raise DataError("dataset needs at least one covariate dimension")
        if t.shape != (n,) or y.shape != (n,):
            raise DataError("covariates, treatments, and outcomes must align")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise DataError("covariates and outcomes must be finite")
        bad = ~np.isin(t, (-1, 1))
        if bad.any():
            raise DataError(f"treatment labels must be -1 or +1, got {t[bad][0]!r}")
        for arr in (x, t, y):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_samples", None)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Dataset is immutable")

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        if not samples:
            raise DataError("dataset needs at least one sample")
        d = len(samples[0].x)
        if any(len(s.x) != d for s in samples):
            raise DataError("all samples must share the same dimension")
        x = np.array([s.x for s in samples], dtype=np.float64)
        t = np.array([s.t for s in samples], dtype=np.int64)
        y = np.array([s.y for s in samples], dtype=np.float64)
        return cls(x, t, y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def samples(self) -> tuple[Sample, ...]:
        cached = self._samples
        if cached is None:
            cached = tuple(
                Sample(tuple(row), int(t), float(y))
                for row, t, y in zip(self.x, self.t, self.y)
            )
            object.__setattr__(self, "_samples", cached)
        return cached

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.d})"


@dataclass(frozen=True)
class Hyperbox:
    """Axis-aligned closed box ``[lower[t], upper[t]]`` per dimension.

    Boundaries belong to the box, so zero-width dimensions are legal and a
    box spanned by a single point contains that point.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise DataError("lower and upper must have the same length")
        if not len(lower):
            raise DataError("hyperbox needs at least one dimension")
        for lo, hi in zip(lower, upper):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DataError("hyperbox endpoints must be finite")
            if lo > hi:
                raise DataError(f"lower endpoint {lo} exceeds upper endpoint {hi}")

    @property
    def d(self) -> int:
        return len(self.lower)

    def volume(self) -> float:
        vol = 1.0
        for lo, hi in zip(self.lower, self.upper):
            vol *= hi - lo
        return vol

    def contains(self, x: Sequence[float]) -> bool:
        return box_contains(self, x)


@dataclass(frozen=True)
class Policy:
    """Treat (+1) inside the union of ``boxes``, control (-1) outside.

    ``flipped`` records that the treatment labels were negated before
    fitting; decisions are negated on the way out so the policy always
    speaks in terms of the original labels.
    """

    boxes: tuple[Hyperbox, ...]
    flipped: bool = False

    def __post_init__(self) -> None:
        boxes = tuple(self.boxes)
        object.__setattr__(self, "boxes", boxes)
        if boxes:
            d = boxes[0].d
            if any(b.d != d for b in boxes):
                raise DataError("all boxes in a policy must share the same dimension")

    def decide(self, x: Sequence[float]) -> int:
        return policy_decide(self, x)


@dataclass(frozen=True)
class IndexPartition:
    """Sample index sets by treatment arm and score sign.

    ``i_plus``/``i_minus`` split indices by treatment label and
    ``p``/``n_set`` by the sign of the score. Indices are 0-based positions
    into the retained score vector.
    """

    i_plus: frozenset[int]
    i_minus: frozenset[int]
    p: frozenset[int]
    n_set: frozenset[int]

    def __post_init__(self) -> None:
        if self.i_plus & self.i_minus:
            raise DataError("treatment index sets must be disjoint")
        if self.p & self.n_set:
            raise DataError("score sign index sets must be disjoint")
        if (self.i_plus | self.i_minus) != (self.p | self.n_set):
            raise DataError("partition sets must cover the same indices")

    # The four blocks below drive every constraint row and dual lookup, so
    # they are materialized once in sorted order.

    @cached_property
    def treated_pos(self) -> tuple[int, ...]:
        """I_1 ∩ P: treated samples with positive score."""
        return tuple(sorted(self.i_plus & self.p))

    @cached_property
    def control_pos(self) -> tuple[int, ...]:
        """I_-1 ∩ P: control samples with positive score."""
        return tuple(sorted(self.i_minus & self.p))

    @cached_property
    def treated_neg(self) -> tuple[int, ...]:
        """I_1 ∩ N: treated samples with negative score."""
        return tuple(sorted(self.i_plus & self.n_set))

    @cached_property
    def control_neg(self) -> tuple[int, ...]:
        """I_-1 ∩ N: control samples with negative score."""
        return tuple(sorted(self.i_minus & self.n_set))

    @property
    def size(self) -> int:
        return len(self.p) + len(self.n_set)


def load_csv(path: str, zero_one_labels: bool = False) -> Dataset:
    """Read a dataset from ``path``.

    The header must be exactly ``x0,...,x{d-1},t,y``. Treatment labels are
    -1/+1, or 0/1 when ``zero_one_labels`` is set (0 maps to -1). Parse
    problems are reported with their 1-based body row number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[-2:] != ["t", "y"]:
            raise DataError(
                f"{path}: header must be x0,...,x{{d-1}},t,y, got {','.join(header)}"
            )
        d = len(header) - 2
        expected = [f"x{j}" for j in range(d)] + ["t", "y"]
        if header != expected:
            raise DataError(
                f"{path}: header must be {','.join(expected)}, got {','.join(header)}"
            )

        allowed = {0.0, 1.0} if zero_one_labels else {-1.0, 1.0}
        xs: list[list[float]] = []
        ts: list[int] = []
        ys: list[float] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d + 2:
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {d + 2}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}: row {row_no}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}: row {row_no}: non-finite value")
            t_raw = values[d]
            if t_raw not in allowed:
                label_set = "{0, 1}" if zero_one_labels else "{-1, +1}"
                raise DataError(
                    f"{path}: row {row_no}: treatment {t_raw!r} outside {label_set}"
                )
            t = int(t_raw) if not zero_one_labels else (1 if t_raw == 1.0 else -1)
            xs.append(values[:d])
            ts.append(t)
            ys.append(values[d + 1])

    if not xs:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(xs), np.array(ts), np.array(ys))


def partition(psi: Sequence[float], t: Sequence[int]) -> IndexPartition:
    """Split 0-based indices by treatment arm and score sign.

    Zero scores must be dropped before calling; they have no side to land on.
    """
    psi = np.asarray(psi, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.int64)
    if psi.shape != t_arr.shape or psi.ndim != 1:
        raise DataError("psi and t must be 1-dimensional and aligned")
    if (psi == 0.0).any():
        bad = int(np.flatnonzero(psi == 0.0)[0])
        raise DataError(f"score at index {bad} is exactly zero; drop it first")
    idx = np.arange(psi.shape[0])
    return IndexPartition(
        i_plus=frozenset(idx[t_arr == 1].tolist()),
        i_minus=frozenset(idx[t_arr == -1].tolist()),
        p=frozenset(idx[psi > 0].tolist()),
        n_set=frozenset(idx[psi < 0].tolist()),
    )


def box_contains(box: Hyperbox, x: Sequence[float]) -> bool:
    """Closed-interval membership test."""
    if len(x) != box.d:
        raise DataError(f"point has dimension {len(x)}, box has {box.d}")
    return all(lo <= v <= hi for lo, v, hi in zip(box.lower, x, box.upper))


def policy_decide(policy: Policy, x: Sequence[float]) -> int:
    """+1 if any box contains ``x`` else -1, negated for flipped policies."""
    if policy.boxes and len(x) != policy.boxes[0].d:
        raise DataError(
            f"point has dimension {len(x)}, policy has {policy.boxes[0].d}"
        )
    raw = 1 if any(box_contains(b, x) for b in policy.boxes) else -1
    return -raw if policy.flipped else raw


def policy_decisions(policy: Policy, xs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`policy_decide` over the rows of ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2:
        raise DataError("expected an n-by-d coordinate matrix")
    if policy.boxes and xs.shape[1] != policy.boxes[0].d:
        raise DataError(
            f"points have dimension {xs.shape[1]}, policy has {policy.boxes[0].d}"
        )
    inside = np.zeros(xs.shape[0], dtype=bool)
    for box in policy.boxes:
        lo = np.asarray(box.lower)
        hi = np.asarray(box.upper)
        inside |= ((xs >= lo) & (xs <= hi)).all(axis=1)
    raw = np.where(inside, 1, -1)
    return -raw if policy.flipped else raw


def box_memberships(boxes: Sequence[Hyperbox], xs: np.ndarray) -> np.ndarray:
    """Boolean matrix: entry (j, i) is True iff box j contains row i of ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.empty((len(boxes), xs.shape[0]), dtype=bool)
    for j, box in enumerate(boxes):
        lo = np.asarray(box.lower)
        hi = np.asarray(box.upper)
        out[j] = ((xs >= lo) & (xs <= hi)).all(axis=1)
    return out


def span_of(xs: np.ndarray, index: Sequence[int] | np.ndarray) -> Hyperbox:
    """Smallest closed box containing the selected rows of ``xs``."""
    pts = np.asarray(xs, dtype=np.float64)[np.asarray(index, dtype=np.intp)]
    if pts.shape[0] == 0:
        raise DataError("cannot span an empty selection")
    return Hyperbox(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


def spanned_boxes(dataset: Dataset, max_n: int = SPANNED_BOXES_GUARD) -> list[Hyperbox]:
    """All distinct boxes spanned by non-empty subsets of the samples.

    The candidate pool behind exhaustive policy search. Guarded because the
    subset count is 2^n - 1.
    """
    n = dataset.n
    if n > max_n:
        raise DataError(f"spanned_boxes guard: n={n} exceeds max_n={max_n}")
    x = dataset.x
    seen: dict[tuple[tuple[float, ...], tuple[float, ...]], None] = {}
    for mask in range(1, 1 << n):
        sel = [i for i in range(n) if mask >> i & 1]
        lo = tuple(x[sel].min(axis=0))
        hi = tuple(x[sel].max(axis=0))
        seen.setdefault((lo, hi), None)
    return [Hyperbox(lo, hi) for lo, hi in seen]

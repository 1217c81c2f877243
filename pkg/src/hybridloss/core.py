"""Label, score and feature primitives shared by every other module.

Score vectors and label distributions are plain 1-D float64 numpy arrays;
the helpers here validate them and implement the deterministic
tie-breaking rule (lowest label id wins) used throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import logsumexp

# Absolute tolerance for deciding that two scores are tied for the maximum.
ARGMAX_TOL = 1e-9
# Absolute tolerance for deciding that two probabilities are tied.
PROB_TIE_TOL = 1e-12
# Allowed deviation of a distribution's total mass from 1.
DIST_SUM_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when a feature id or vector length does not fit its partner."""


def as_scores(scores) -> np.ndarray:
    f = np.asarray(scores, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError(f"score vector must be 1-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("score vector contains non-finite entries")
    return f


def as_distribution(probs) -> np.ndarray:
    """Validate and return a label distribution as a float array."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("a label distribution needs at least two labels")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > DIST_SUM_TOL:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def argmax_with_tiebreak(scores) -> int:
    """Index of the largest score; ties go to the smallest label id."""
    # np.argmax already returns the first occurrence of the maximum.
    return int(np.argmax(as_scores(scores)))


def argmax_set(scores, tol: float = ARGMAX_TOL) -> np.ndarray:
    """All labels whose score lies within ``tol`` of the maximum."""
    f = as_scores(scores)
    return np.flatnonzero(f >= f.max() - tol)


def logsumexp_rows(A) -> np.ndarray:
    """Row-wise log-sum-exp of a 2-D array; rows may hold ``-inf`` but not only ``-inf``.

    A lean replacement for ``scipy.special.logsumexp(A, axis=1)`` on hot paths.
    """
    m = A.max(axis=1)
    return m + np.log(np.exp(A - m[:, None]).sum(axis=1))


def softmax(scores) -> np.ndarray:
    f = as_scores(scores)
    z = np.exp(f - f.max())
    return z / z.sum()


def log_softmax(scores) -> np.ndarray:
    f = as_scores(scores)
    return f - logsumexp(f)


def margin(scores, y: int) -> float:
    """Gap between the score of ``y`` and the best competing score."""
    f = as_scores(scores)
    if f.size < 2:
        raise ValueError("margin needs at least two labels")
    others = np.delete(f, y)
    return float(f[y] - others.max())


def runner_up(scores, y: int) -> int:
    """Best label other than ``y`` (lowest id on ties)."""
    f = as_scores(scores).copy()
    f[y] = -np.inf
    return int(np.argmax(f))


@dataclass(frozen=True)
class SparseFeatureVector:
    """Sparse real feature vector in canonical form.

    ``ids`` is strictly increasing and every value is finite and nonzero.
    Use :meth:`from_pairs` to build one from unsorted, possibly duplicated
    entries.
    """

    ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if ids.ndim != 1 or ids.shape != values.shape:
            raise ValueError("ids and values must be 1-D arrays of equal length")
        if ids.size:
            if ids[0] < 0 or np.any(np.diff(ids) <= 0):
                raise ValueError("feature ids must be non-negative and strictly increasing")
            if not np.all(np.isfinite(values)) or np.any(values == 0):
                raise ValueError("feature values must be finite and nonzero")
        ids.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseFeatureVector":
        acc: dict[int, float] = {}
        for fid, val in pairs:
            acc[int(fid)] = acc.get(int(fid), 0.0) + float(val)
        ids = sorted(i for i, v in acc.items() if v != 0.0)
        return cls(np.array(ids, dtype=np.int64), np.array([acc[i] for i in ids], dtype=np.float64))

    @classmethod
    def empty(cls) -> "SparseFeatureVector":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))

    def __len__(self):
        return int(self.ids.size)

    def max_id(self) -> int:
        return int(self.ids[-1]) if self.ids.size else -1

    def to_dense(self, dim: int) -> np.ndarray:
        if self.max_id() >= dim:
            raise DimensionError(f"feature id {self.max_id()} outside dimension {dim}")
        out = np.zeros(dim)
        out[self.ids] = self.values
        return out


def dot(w, phi: SparseFeatureVector) -> float:
    """Inner product of a dense weight vector with a sparse feature vector."""
    w = np.asarray(w, dtype=np.float64)
    if phi.max_id() >= w.size:
        raise DimensionError(f"feature id {phi.max_id()} outside weight dimension {w.size}")
    return float(w[phi.ids] @ phi.values) if len(phi) else 0.0

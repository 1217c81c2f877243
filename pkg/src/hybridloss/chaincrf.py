"""Linear-chain model: potentials, inference and structured losses.

A labeling ``y = (y_0, ..., y_{L-1})`` with labels in ``0..c-1`` scores::

    score(y) = sum_j unary[j, y_j] + sum_j transition[y_j, y_{j+1}]

and the energy is ``E(y) = -score(y)``. The weight vector stores the unary
weights first, grouped by label (label ``s`` owns the slice
``w[s*n : (s+1)*n]`` over the ``n`` observation features), followed by the
``c*c`` transition weights in row-major (from, to) order.

All dynamic programming runs in log space.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .core import DimensionError, SparseFeatureVector
from .losses import check_alpha


@dataclass(frozen=True)
class ChainPotentials:
    unary: np.ndarray       # (L, c)
    transition: np.ndarray  # (c, c)

    def __post_init__(self):
        u = np.asarray(self.unary, dtype=np.float64)
        t = np.asarray(self.transition, dtype=np.float64)
        if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 2:
            raise ValueError(f"unary must be L x c with L >= 1, c >= 2; got {u.shape}")
        if t.shape != (u.shape[1], u.shape[1]):
            raise ValueError("transition must be c x c")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(t))):
            raise ValueError("potentials must be finite")
        object.__setattr__(self, "unary", u)
        object.__setattr__(self, "transition", t)

    @property
    def length(self) -> int:
        return self.unary.shape[0]

    @property
    def n_labels(self) -> int:
        return self.unary.shape[1]

    def score(self, labels) -> float:
        y = np.asarray(labels, dtype=np.int64)
        s = self.unary[np.arange(y.size), y].sum()
        return float(s + self.transition[y[:-1], y[1:]].sum())


@dataclass(frozen=True)
class ChainInstance:
    """One observed sequence: per-position observation features and gold labels."""

    features: tuple
    labels: np.ndarray

    def __post_init__(self):
        feats = tuple(self.features)
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(feats) != labels.size or labels.size == 0:
            raise ValueError("need one feature vector per gold label and L >= 1")
        if not all(isinstance(f, SparseFeatureVector) for f in feats):
            raise TypeError("features must be SparseFeatureVector instances")
        if np.any(labels < 0):
            raise ValueError("label ids must be non-negative")
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    @cached_property
    def _csr_parts(self):
        indptr = np.zeros(len(self.features) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(f) for f in self.features])
        ids = np.concatenate([f.ids for f in self.features]) if indptr[-1] else np.zeros(0, np.int64)
        vals = np.concatenate([f.values for f in self.features]) if indptr[-1] else np.zeros(0)
        return vals, ids, indptr

    @cached_property
    def max_feature_id(self) -> int:
        return max((f.max_id() for f in self.features), default=-1)

    def matrix(self, n_features: int) -> sp.csr_matrix:
        """Observation features as an (L, n_features) sparse matrix."""
        if self.max_feature_id >= n_features:
            raise DimensionError(
                f"feature id {self.max_feature_id} outside feature space {n_features}")
        return sp.csr_matrix(self._csr_parts, shape=(len(self), n_features))


@dataclass(frozen=True)
class ChainMarginals:
    node: np.ndarray   # (L, c)
    edge: np.ndarray   # (L-1, c, c)
    log_z: float


def weight_dim(n_features: int, c: int) -> int:
    return n_features * c + c * c


def split_weights(w, c: int):
    """View a flat weight vector as (unary (c, n), transition (c, c))."""
    w = np.asarray(w, dtype=np.float64)
    rest = w.size - c * c
    if c < 2 or rest < 0 or rest % c:
        raise DimensionError(f"weight length {w.size} does not fit n*c + c*c with c={c}")
    n = rest // c
    return w[: n * c].reshape(c, n), w[n * c:].reshape(c, c)


def build_potentials(w, inst: ChainInstance, c: int) -> ChainPotentials:
    W_u, T = split_weights(w, c)
    if inst.labels.max() >= c:
        raise ValueError("gold label id outside label range")
    unary = inst.matrix(W_u.shape[1]) @ W_u.T
    return ChainPotentials(np.asarray(unary), T.copy())


def joint_features(inst: ChainInstance, labels, n_features: int, c: int) -> np.ndarray:
    """Dense joint feature vector phi(x, y) under the weight layout above."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size != len(inst):
        raise ValueError("labeling length differs from instance length")
    phi = np.zeros(weight_dim(n_features, c))
    X = inst.matrix(n_features)
    onehot = np.zeros((y.size, c))
    onehot[np.arange(y.size), y] = 1.0
    phi[: n_features * c] = np.asarray((X.T @ onehot).T).ravel()
    trans = phi[n_features * c:].reshape(c, c)
    np.add.at(trans, (y[:-1], y[1:]), 1.0)
    return phi


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------

def viterbi(pot: ChainPotentials) -> np.ndarray:
    """Highest-scoring labeling; ties go to the lowest label id while backtracking."""
    L, c = pot.unary.shape
    delta = pot.unary[0].copy()
    back = np.zeros((L, c), dtype=np.int64)
    for j in range(1, L):
        cand = delta[:, None] + pot.transition      # (from, to)
        back[j] = np.argmax(cand, axis=0)
        delta = cand[back[j], np.arange(c)] + pot.unary[j]
    y = np.zeros(L, dtype=np.int64)
    y[-1] = int(np.argmax(delta))
    for j in range(L - 1, 0, -1):
        y[j - 1] = back[j, y[j]]
    return y


def _lse(a, axis):
    # finite inputs only; lighter than scipy's logsumexp inside the DP loops
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.exp(a - m).sum(axis=axis))


def _forward(pot):
    L, c = pot.unary.shape
    alpha = np.empty((L, c))
    alpha[0] = pot.unary[0]
    for j in range(1, L):
        alpha[j] = pot.unary[j] + _lse(alpha[j - 1][:, None] + pot.transition, axis=0)
    return alpha


def log_partition(pot: ChainPotentials) -> float:
    return float(logsumexp(_forward(pot)[-1]))


def marginals(pot: ChainPotentials) -> ChainMarginals:
    L, c = pot.unary.shape
    alpha = _forward(pot)
    beta = np.zeros((L, c))
    for j in range(L - 2, -1, -1):
        beta[j] = _lse(pot.transition + (pot.unary[j + 1] + beta[j + 1])[None, :], axis=1)
    log_z = float(logsumexp(alpha[-1]))
    node = np.exp(alpha + beta - log_z)
    edge = np.exp(alpha[:-1, :, None] + pot.transition[None, :, :]
                  + (pot.unary[1:] + beta[1:])[:, None, :] - log_z)
    return ChainMarginals(node, edge, log_z)


def hamming(y, y2) -> float:
    y, y2 = np.asarray(y), np.asarray(y2)
    if y.shape != y2.shape:
        raise ValueError("labelings have different lengths")
    return float(np.mean(y != y2))


def loss_augmented_decode(pot: ChainPotentials, gold) -> np.ndarray:
    """argmax_y score(y) + hamming(y, gold), by Viterbi on cost-augmented unaries."""
    gold = np.asarray(gold, dtype=np.int64)
    L = pot.length
    if gold.size != L:
        raise ValueError("gold labeling length differs from chain length")
    cost = np.full(pot.unary.shape, 1.0 / L)
    cost[np.arange(L), gold] = 0.0
    aug = pot.unary + cost
    return viterbi(ChainPotentials(aug, pot.transition))


# --------------------------------------------------------------------------
# structured losses
# --------------------------------------------------------------------------

def _hinge_parts(w, inst, c):
    pot = build_potentials(w, inst, c)
    y_dag = loss_augmented_decode(pot, inst.labels)
    bracket = hamming(y_dag, inst.labels) + pot.score(y_dag) - pot.score(inst.labels)
    return pot, y_dag, bracket


def structured_hinge(w, inst: ChainInstance, c: int) -> float:
    return max(0.0, _hinge_parts(w, inst, c)[2])


def structured_log_loss(w, inst: ChainInstance, c: int) -> float:
    pot = build_potentials(w, inst, c)
    return log_partition(pot) - pot.score(inst.labels)


def structured_hybrid(w, inst: ChainInstance, c: int, alpha: float) -> float:
    alpha = check_alpha(alpha)
    val = 0.0
    if alpha > 0.0:
        val += alpha * structured_log_loss(w, inst, c)
    if alpha < 1.0:
        val += (1.0 - alpha) * structured_hinge(w, inst, c)
    return val


def _unary_part(inst, node_weights, n):
    # unary block of sum_j sum_s node_weights[j, s] * phi_unary(x_j, s), label-major
    return np.asarray((inst.matrix(n).T @ node_weights).T).ravel()


def grad_structured_log(w, inst: ChainInstance, c: int) -> np.ndarray:
    """Expected features under the model minus gold features."""
    W_u, _ = split_weights(w, c)
    n = W_u.shape[1]
    marg = marginals(build_potentials(w, inst, c))
    y = inst.labels
    gold = np.zeros_like(marg.node)
    gold[np.arange(y.size), y] = 1.0
    g = np.zeros(weight_dim(n, c))
    g[: n * c] = _unary_part(inst, marg.node - gold, n)
    trans = g[n * c:].reshape(c, c)
    trans += marg.edge.sum(axis=0)
    np.add.at(trans, (y[:-1], y[1:]), -1.0)
    return g


def subgrad_structured_hinge(w, inst: ChainInstance, c: int) -> np.ndarray:
    W_u, _ = split_weights(w, c)
    n = W_u.shape[1]
    _, y_dag, bracket = _hinge_parts(w, inst, c)
    g = np.zeros(weight_dim(n, c))
    if bracket <= 0.0:
        return g
    y = inst.labels
    L = y.size
    plus = np.zeros((L, c))
    plus[np.arange(L), y_dag] = 1.0
    minus = np.zeros((L, c))
    minus[np.arange(L), y] = 1.0
    g[: n * c] = _unary_part(inst, plus - minus, n)
    trans = g[n * c:].reshape(c, c)
    np.add.at(trans, (y_dag[:-1], y_dag[1:]), 1.0)
    np.add.at(trans, (y[:-1], y[1:]), -1.0)
    return g


def subgrad_structured_hybrid(w, inst: ChainInstance, c: int, alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    g = np.zeros(np.asarray(w).size)
    if alpha > 0.0:
        g += alpha * grad_structured_log(w, inst, c)
    if alpha < 1.0:
        g += (1.0 - alpha) * subgrad_structured_hinge(w, inst, c)
    return g

"""Regularized empirical risk minimization with the hybrid loss.

Two optimizers are provided, both starting from the zero vector:

* ``batch``: full (sub)gradient descent with a backtracking line search on
  the regularized objective; stops after ``epochs`` steps or once an
  epoch lowers the objective by less than 1e-10.
* ``lbfgs``: quasi-Newton (scipy's L-BFGS-B) on a smoothed objective whose
  hinge term uses a soft maximum at temperature ``tau``; ``tau`` is lowered
  from 1 to 1e-4 with warm starts, each stage capped at ``epochs``
  iterations. Multiclass only. The smoothing error is at most
  ``tau * (log(k - 1) + log 2)`` per instance, so the last stage is within
  about 3e-4 of the exact objective, and unlike subgradient descent it
  does not stall at the kinks of the hinge.
* ``stochastic``: Pegasos-style mini-batch subgradient steps
  ``w <- w - (1/(lam*t)) * (lam*w + mean batch subgradient)`` where ``t`` is
  the global step counter. Batches are drawn without replacement from a
  per-epoch shuffle seeded by ``seed``. No projection step is applied.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import chaincrf
from .core import ARGMAX_TOL, logsumexp_rows
from .losses import check_alpha, hybrid_loss_batch

log = logging.getLogger(__name__)

EARLY_STOP_TOL = 1e-10
ARMIJO_C = 1e-4
MIN_STEP = 1e-20


class TrainingDiverged(RuntimeError):
    """The objective became non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1e-4
    alpha: float = 1.0
    epochs: int = 100
    minibatch: int = 10
    seed: int = 0
    mode: str = "batch"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        check_alpha(self.alpha)
        if self.epochs < 1 or self.minibatch < 1:
            raise ValueError("epochs and minibatch must be positive")
        if self.mode not in ("batch", "stochastic", "lbfgs"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TrainReport:
    weights: np.ndarray
    objective_trace: tuple
    epochs_run: int


@dataclass(frozen=True)
class MulticlassData:
    """Weighted multiclass sample.

    Row ``i`` of ``X`` holds the observation features of instance ``i``.
    The joint feature map places them in the block of the instance's label,
    so the weight vector is ``k`` label-major blocks of ``X.shape[1]``.
    """

    X: np.ndarray
    labels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.int64)
        wt = np.asarray(self.weights, dtype=np.float64)
        if X.shape[0] != y.size or y.size != wt.size:
            raise ValueError("X, labels and weights disagree on the number of instances")
        if np.any(wt < 0):
            raise ValueError("instance weights must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "weights", wt)

    @classmethod
    def uniform(cls, X, labels):
        n = len(labels)
        return cls(X, labels, np.full(n, 1.0 / n))

    def __len__(self):
        return self.labels.size


def multiclass_scores(w, X, k: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return X @ np.asarray(w).reshape(k, X.shape[1]).T


def zero_one_error(F, labels, weights=None, ties: str = "average") -> float:
    """Weighted misclassification rate of score rows ``F``.

    ``ties="average"`` scores a row whose maximum is shared (within
    ``ARGMAX_TOL``) by ``t`` labels as correct with probability ``1/t`` when
    the gold label is among them, i.e. the expected error under a uniformly
    random tie-breaker. ``ties="lowest"`` uses the lowest-id tie-breaker.
    """
    F = np.atleast_2d(F)
    labels = np.asarray(labels)
    weights = np.full(labels.size, 1.0 / labels.size) if weights is None else np.asarray(weights)
    rows = np.arange(labels.size)
    if ties == "lowest":
        correct = (np.argmax(F, axis=1) == labels).astype(float)
    elif ties == "average":
        top = F >= F.max(axis=1, keepdims=True) - ARGMAX_TOL
        correct = top[rows, labels] / top.sum(axis=1)
    else:
        raise ValueError(f"unknown tie policy {ties!r}")
    return float(weights @ (1.0 - correct) / weights.sum())


def _descend(obj_grad: Callable, w0: np.ndarray, epochs: int):
    """Gradient descent with backtracking; trace holds the objective after each epoch."""
    w = w0.copy()
    J, g = obj_grad(w)
    if not np.isfinite(J):
        raise TrainingDiverged("objective is not finite at the initial point")
    trace = []
    step = 1.0
    for _ in range(epochs):
        gn2 = float(g @ g)
        if gn2 == 0.0:
            trace.append(J)
            break
        t = min(2.0 * step, 1e6)
        best = None
        while t > MIN_STEP:
            cand = w - t * g
            Jc, gc = obj_grad(cand)
            if not np.isfinite(Jc):
                t *= 0.5
                continue
            if Jc <= J - ARMIJO_C * t * gn2:
                best = (t, cand, Jc, gc)
                break
            if Jc < J and (best is None or Jc < best[2]):
                # remember plain decreases for non-smooth kinks where Armijo fails
                best = (t, cand, Jc, gc)
            t *= 0.5
        if best is None:
            trace.append(J)
            break
        step, w, J_new, g = best
        decrease = J - J_new
        J = J_new
        trace.append(J)
        if decrease < EARLY_STOP_TOL:
            break
    return w, trace


def _pegasos(n_items: int, dim: int, cfg: TrainConfig, batch_subgrad: Callable,
             objective: Callable, on_step: Callable | None, w0=None):
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(dim) if w0 is None else w0.copy()
    trace = []
    t = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n_items)
        for start in range(0, n_items, cfg.minibatch):
            batch = order[start:start + cfg.minibatch]
            t += 1
            sub = batch_subgrad(w, batch)
            if on_step is not None:
                on_step(t, w.copy(), batch.copy(), sub.copy())
            w = w - (1.0 / (cfg.lam * t)) * (cfg.lam * w + sub)
        J = objective(w)
        if not np.isfinite(J):
            raise TrainingDiverged(f"objective became {J} at step {t}")
        trace.append(J)
    return w, trace


# --------------------------------------------------------------------------
# multiclass
# --------------------------------------------------------------------------

def multiclass_objective(w, data: MulticlassData, k: int, lam: float, alpha: float,
                         with_grad: bool = True, ties: str = "lowest"):
    """Weighted hybrid risk plus lam/2 ||w||^2 and, optionally, a subgradient.

    ``ties`` selects the hinge subgradient at tied rivals; see
    :func:`hybridloss.losses.hybrid_loss_batch`.
    """
    F = multiclass_scores(w, data.X, k)
    if with_grad:
        losses, G = hybrid_loss_batch(F, data.labels, alpha, ties=ties)
        grad = ((data.weights[:, None] * G).T @ data.X).ravel() + lam * w
    else:
        losses = hybrid_loss_batch(F, data.labels, alpha, with_grad=False)
    J = float(data.weights @ losses + 0.5 * lam * (w @ w))
    return (J, grad) if with_grad else J


def smoothed_multiclass_objective(w, data: MulticlassData, k: int, lam: float, alpha: float,
                                  tau: float):
    """Objective and gradient with the hinge replaced by a smooth upper bound.

    ``max_{s != y} f_s`` becomes ``tau * logsumexp(f_s / tau)`` and
    ``[z]_+`` becomes ``tau * log(1 + exp(z / tau))``.
    """
    X, y, wt = data.X, data.labels, data.weights
    rows = np.arange(y.size)
    F = multiclass_scores(w, X, k)
    f_true = F[rows, y]
    lse = logsumexp_rows(F)
    G = alpha * np.exp(F - lse[:, None])
    G[rows, y] -= alpha
    losses = alpha * (lse - f_true)
    if alpha < 1.0:
        R = F / tau
        R[rows, y] = -np.inf
        r_lse = logsumexp_rows(R)
        z = (1.0 - f_true) / tau + r_lse
        losses = losses + (1.0 - alpha) * tau * np.logaddexp(0.0, z)
        act = expit(z)
        Gh = act[:, None] * np.exp(R - r_lse[:, None])
        Gh[rows, y] -= act
        G += (1.0 - alpha) * Gh
    J = float(wt @ losses + 0.5 * lam * (w @ w))
    return J, ((wt[:, None] * G).T @ X).ravel() + lam * w


SMOOTHING_TEMPERATURES = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)


def _lbfgs_continuation(data, k, cfg, w0):
    w = w0.copy()
    trace = []
    temps = (None,) if cfg.alpha == 1.0 else SMOOTHING_TEMPERATURES
    for tau in temps:
        if tau is None:
            fun = lambda v: multiclass_objective(v, data, k, cfg.lam, 1.0)   # noqa: E731
        else:
            fun = lambda v, t=tau: smoothed_multiclass_objective(v, data, k, cfg.lam, cfg.alpha, t)  # noqa: E731
        res = minimize(fun, w, jac=True, method="L-BFGS-B",
                       options=dict(maxiter=cfg.epochs, ftol=1e-13, gtol=1e-9))
        w = res.x
        J = multiclass_objective(w, data, k, cfg.lam, cfg.alpha, with_grad=False)
        if not np.isfinite(J):
            raise TrainingDiverged(f"objective became {J}")
        trace.append(J)
    return w, trace


def train_multiclass(data: MulticlassData, k: int, cfg: TrainConfig,
                     init=None) -> TrainReport:
    """Minimize sum_i weight_i * hybrid(f(x_i), y_i) + lam/2 ||w||^2.

    ``init`` overrides the zero starting point, e.g. to warm-start along a
    regularization path; the objective is strictly convex, so the minimizer
    does not depend on it.
    """
    if int(data.labels.max()) >= k:
        raise ValueError("label id outside 0..k-1")
    dim = k * data.X.shape[1]
    w0 = np.zeros(dim) if init is None else np.array(init, dtype=np.float64)
    if w0.shape != (dim,):
        raise ValueError(f"initial weights must have length {dim}")
    if cfg.mode == "lbfgs":
        w, trace = _lbfgs_continuation(data, k, cfg, w0)
    elif cfg.mode == "batch":
        w, trace = _descend(
            # tie-averaged subgradients keep descent going from the all-tied zero start
            lambda v: multiclass_objective(v, data, k, cfg.lam, cfg.alpha, ties="average"),
            w0,
            cfg.epochs)
    else:
        m = len(data)

        def batch_subgrad(v, batch):
            sub = MulticlassData(data.X[batch], data.labels[batch], data.weights[batch] * m / batch.size)
            _, g = multiclass_objective(v, sub, k, 0.0, cfg.alpha)
            return g

        w, trace = _pegasos(m, dim, cfg, batch_subgrad,
                            lambda v: multiclass_objective(v, data, k, cfg.lam, cfg.alpha, False),
                            None, w0)
    log.debug("multiclass training stopped after %d epochs, objective %.6g", len(trace), trace[-1])
    return TrainReport(w, tuple(trace), len(trace))


# --------------------------------------------------------------------------
# chains
# --------------------------------------------------------------------------

def chain_feature_count(data: Sequence[chaincrf.ChainInstance]) -> int:
    return max(inst.max_feature_id for inst in data) + 1


def chain_objective(w, data: Sequence[chaincrf.ChainInstance], c: int, lam: float,
                    alpha: float) -> float:
    """Mean hybrid loss over the chains plus lam/2 ||w||^2."""
    total = sum(chaincrf.structured_hybrid(w, inst, c, alpha) for inst in data)
    return total / len(data) + 0.5 * lam * float(w @ w)


def chain_minibatch_subgradient(w, batch: Sequence[chaincrf.ChainInstance], c: int,
                                alpha: float) -> np.ndarray:
    """Mean hybrid subgradient over ``batch``, summed in instance order."""
    g = np.zeros(np.asarray(w).size)
    for inst in batch:
        g += chaincrf.subgrad_structured_hybrid(w, inst, c, alpha)
    return g / len(batch)


def train_chain(data: Sequence[chaincrf.ChainInstance], c: int, cfg: TrainConfig,
                n_features: int | None = None, on_step: Callable | None = None) -> TrainReport:
    """Train a chain model; ``cfg.mode`` selects Pegasos or batch descent.

    ``on_step(t, w, batch_indices, subgradient)`` is called before every
    stochastic step, mostly for instrumentation in tests.
    """
    data = list(data)
    if not data:
        raise ValueError("no training chains")
    if cfg.mode == "lbfgs":
        raise ValueError("lbfgs mode is only available for multiclass training")
    n = chain_feature_count(data) if n_features is None else int(n_features)
    dim = chaincrf.weight_dim(n, c)
    if cfg.mode == "stochastic":
        w, trace = _pegasos(
            len(data), dim, cfg,
            lambda v, b: chain_minibatch_subgradient(v, [data[i] for i in b], c, cfg.alpha),
            lambda v: chain_objective(v, data, c, cfg.lam, cfg.alpha),
            on_step)
    else:
        def obj_grad(v):
            J = chain_objective(v, data, c, cfg.lam, cfg.alpha)
            return J, chain_minibatch_subgradient(v, data, c, cfg.alpha) + cfg.lam * v
        w, trace = _descend(obj_grad, np.zeros(dim), cfg.epochs)
    log.debug("chain training stopped after %d epochs, objective %.6g", len(trace), trace[-1])
    return TrainReport(w, tuple(trace), len(trace))


def predict_chain(w, inst: chaincrf.ChainInstance, c: int) -> np.ndarray:
    return chaincrf.viterbi(chaincrf.build_potentials(w, inst, c))

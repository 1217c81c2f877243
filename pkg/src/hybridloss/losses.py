"""Multiclass hinge, log and hybrid losses on score vectors.

The hybrid loss mixes the two with a weight ``alpha`` in [0, 1]::

    hybrid(f, y) = alpha * log_loss(f, y) + (1 - alpha) * hinge_loss(f, y)

At the hinge kink (margin exactly 1) the subgradient is taken from the flat
side, i.e. the hinge contributes nothing.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import (ARGMAX_TOL, as_distribution, as_scores, logsumexp_rows, margin, runner_up,
                   softmax)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def hinge_loss(f, y: int) -> float:
    return max(0.0, 1.0 - margin(f, y))


def log_loss(f, y: int) -> float:
    f = as_scores(f)
    return float(logsumexp(f) - f[y])


def hinge_loss_prob(p, y: int) -> float:
    """Hinge loss written in terms of model probabilities.

    Equals ``hinge_loss(f, y)`` whenever ``p == softmax(f)``.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("hinge_loss_prob is undefined for zero probabilities")
    rival = np.delete(p, y).max()
    return max(0.0, 1.0 - float(np.log(p[y]) - np.log(rival)))


def hybrid_loss(f, y: int, alpha: float) -> float:
    alpha = check_alpha(alpha)
    return alpha * log_loss(f, y) + (1.0 - alpha) * hinge_loss(f, y)


def grad_log_loss(f, y: int) -> np.ndarray:
    g = softmax(f)
    g[y] -= 1.0
    return g


def subgrad_hinge_loss(f, y: int) -> np.ndarray:
    f = as_scores(f)
    g = np.zeros_like(f)
    if 1.0 - margin(f, y) > 0.0:
        g[runner_up(f, y)] += 1.0
        g[y] -= 1.0
    return g


def subgrad_hybrid_loss(f, y: int, alpha: float) -> np.ndarray:
    alpha = check_alpha(alpha)
    return alpha * grad_log_loss(f, y) + (1.0 - alpha) * subgrad_hinge_loss(f, y)


def conditional_risk(f, D, alpha: float) -> float:
    """Expected hybrid loss of ``f`` when the label is drawn from ``D``."""
    f = as_scores(f)
    D = as_distribution(D)
    if f.shape != D.shape:
        raise ValueError("score vector and distribution have different lengths")
    alpha = check_alpha(alpha)
    return float(sum(D[y] * hybrid_loss(f, y, alpha) for y in range(f.size)))


def hybrid_loss_batch(F, labels, alpha: float, with_grad: bool = True, ties: str = "lowest"):
    """Per-row hybrid losses (and score gradients) for a score matrix.

    Parameters
    ----------
    F : array, shape (m, k)
        One score vector per row.
    labels : int array, shape (m,)
    alpha : float
    with_grad : bool
        Also return the (m, k) matrix of per-row (sub)gradients.
    ties : {"lowest", "average"}
        Which hinge subgradient to return when several rivals share the top
        competing score. ``"lowest"`` picks the lowest label id, matching
        ``subgrad_hybrid_loss``. ``"average"`` spreads the rival's unit
        weight evenly over all tied rivals (within ``ARGMAX_TOL``). That
        is also a subgradient, and at symmetric ties it is usually a
        descent direction where the lowest-id choice is not.

    Row ``i`` of the result agrees with ``hybrid_loss(F[i], labels[i], alpha)``
    and, with the default ``ties``, ``subgrad_hybrid_loss(F[i], labels[i], alpha)``.
    """
    alpha = check_alpha(alpha)
    F = np.asarray(F, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    m, k = F.shape
    rows = np.arange(m)
    f_true = F[rows, labels]

    lse = logsumexp_rows(F)
    log_part = lse - f_true

    masked = F.copy()
    masked[rows, labels] = -np.inf
    rival = np.argmax(masked, axis=1)
    slack = 1.0 - (f_true - masked[rows, rival])
    active = slack > 0.0
    hinge_part = np.where(active, slack, 0.0)

    losses = alpha * log_part + (1.0 - alpha) * hinge_part
    if not with_grad:
        return losses
    G = alpha * np.exp(F - lse[:, None])
    G[rows, labels] -= alpha
    act = rows[active]
    if ties == "lowest":
        G[act, rival[active]] += 1.0 - alpha
    elif ties == "average":
        top = masked >= masked[rows, rival][:, None] - ARGMAX_TOL
        G[act] += (1.0 - alpha) * top[act] / top[act].sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown tie policy {ties!r}")
    G[act, labels[active]] -= 1.0 - alpha
    return losses, G

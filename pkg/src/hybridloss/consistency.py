"""Conditional Fisher consistency of the hybrid loss, computed numerically.

Given a label distribution ``D`` this module provides

* the dominance statistics and the alpha threshold above which the hybrid
  loss is claimed to be conditionally consistent for ``D``;
* a numerical minimizer of the conditional risk ``E_{y~D} hybrid(f, y)``
  together with an independent brute-force grid minimizer;
* alignment checks and the single-observation probe used to relate
  consistency over a score-table function class to plain consistency.

The minimizer works on the exact (non-smooth) risk in three stages:
smoothed L-BFGS descent from several random starts with the smoothing
temperature driven to zero, coordinate-wise golden-section polishing of the
exact risk, and a tie-snapping pass that re-optimizes with nearly equal
scores forced to be equal. The last stage matters because non-smooth
minimizers typically sit exactly on a tie between labels, and a descent
method only ever gets close to such a point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logsumexp

from .core import ARGMAX_TOL, PROB_TIE_TOL, argmax_set, as_distribution, as_scores
from .losses import check_alpha

MAX_ORACLE_LABELS = 12
# Scores are confined to [-BOX, BOX] so that degenerate D (zero entries)
# still have an attained minimizer; exp(-BOX) is far below any tolerance.
BOX = 40.0
_TEMPERATURES = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
_SNAP_TOL = 1e-4
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class OracleError(RuntimeError):
    """The conditional-risk minimizer failed to converge."""


@dataclass(frozen=True)
class DominanceStats:
    """Largest probability, runner-up probability and the maximizing labels.

    ``d_next`` is ``None`` when every label attains ``d_max``; this stands for
    an infinite runner-up and is never used in arithmetic.
    """

    d_max: float
    d_next: float | None
    y_max_set: frozenset


@dataclass(frozen=True)
class ConsistencyVerdict:
    predicted_consistent: bool
    threshold: float
    dominant: bool


@dataclass(frozen=True)
class AlphaThreshold:
    """Alpha threshold for a distribution; ``threshold`` may be ``-inf``."""

    threshold: float
    dominant: bool
    stats: DominanceStats

    def predicts(self, alpha: float) -> bool:
        return check_alpha(alpha) > self.threshold

    def verdict(self, alpha: float) -> ConsistencyVerdict:
        return ConsistencyVerdict(self.predicts(alpha), self.threshold, self.dominant)


def dominance_stats(D) -> DominanceStats:
    D = as_distribution(D)
    d_max = float(D.max())
    top = np.flatnonzero(D >= d_max - PROB_TIE_TOL)
    rest = np.setdiff1d(np.arange(D.size), top)
    d_next = float(D[rest].max()) if rest.size else None
    return DominanceStats(d_max, d_next, frozenset(int(i) for i in top))


def alpha_threshold(D) -> AlphaThreshold:
    stats = dominance_stats(D)
    dominant = stats.d_max >= 0.5
    if dominant or stats.d_next is None:
        thr = -np.inf
    else:
        thr = 1.0 - (stats.d_max - stats.d_next) / (1.0 - 2.0 * stats.d_max)
    return AlphaThreshold(float(thr), dominant, stats)


def is_aligned(f, D) -> bool:
    """True iff every maximizer of ``f`` also maximizes ``D``."""
    f = as_scores(f)
    D = as_distribution(D)
    if f.shape != D.shape:
        raise ValueError("score vector and distribution have different lengths")
    top_f = set(int(i) for i in argmax_set(f, ARGMAX_TOL))
    return top_f <= dominance_stats(D).y_max_set


# --------------------------------------------------------------------------
# risk evaluation
# --------------------------------------------------------------------------

def risk_matrix(F, D, alpha: float) -> np.ndarray:
    """Exact conditional hybrid risk for every row of a score matrix."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if F.shape[1] != D.size:
        raise ValueError("score vector and distribution have different lengths")
    order = np.argsort(-F, axis=1, kind="stable")
    rows = np.arange(F.shape[0])
    top1 = F[rows, order[:, 0]]
    top2 = F[rows, order[:, 1]]
    # best rival for label y is top2 if y is the (first) argmax, else top1
    rival = np.broadcast_to(top1[:, None], F.shape).copy()
    rival[rows, order[:, 0]] = top2
    hinge = np.maximum(0.0, 1.0 - F + rival)
    logl = logsumexp(F, axis=1)[:, None] - F
    per_label = alpha * logl + (1.0 - alpha) * hinge
    return per_label @ D


def _lse(v):
    m = v.max()
    return m + np.log(np.exp(v - m).sum())


def _exact_risk(f, D, alpha):
    # single-vector fast path of risk_matrix; called in the polishing loops
    i1 = int(np.argmax(f))
    top1 = f[i1]
    rival = np.full_like(f, top1)
    rest = np.delete(f, i1)
    rival[i1] = rest.max()
    hinge = np.maximum(0.0, 1.0 - f + rival)
    return float(alpha * (_lse(f) - D @ f) + (1.0 - alpha) * (D @ hinge))


def _smoothed_risk(f, D, alpha, tau):
    """Smooth convex surrogate within tau*(ln 2 + ln(k-1)) of the exact risk."""
    k = f.size
    lse = _lse(f)
    p = np.exp(f - lse)
    val = alpha * (lse - D @ f)
    grad = alpha * (p - D)
    if alpha < 1.0:
        # soft max over rivals of each label y (rows: y, columns: rival)
        z = np.broadcast_to(f / tau, (k, k)).copy()
        np.fill_diagonal(z, -np.inf)
        zmax = z.max(axis=1, keepdims=True)
        ez = np.exp(z - zmax)
        norm = ez.sum(axis=1, keepdims=True)
        soft_rival = tau * (zmax + np.log(norm))[:, 0]
        w = ez / norm
        s = 1.0 - f + soft_rival
        h = tau * np.logaddexp(0.0, s / tau)
        sig = expit(s / tau)
        val += (1.0 - alpha) * float(D @ h)
        coef = (1.0 - alpha) * D * sig
        grad = grad - coef + coef @ w
    return val, grad


def _descend(x0, D, alpha, M=None):
    """Continuation over smoothing temperatures; ``f = M @ x`` if M given."""
    x = x0.copy()
    bounds = [(-BOX, BOX)] * x.size
    for tau in _TEMPERATURES:
        if M is None:
            fun = lambda v: _smoothed_risk(v, D, alpha, tau)
        else:
            def fun(v):
                val, g = _smoothed_risk(M @ v, D, alpha, tau)
                return val, M.T @ g
        res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 2000, "ftol": 1e-16, "gtol": 1e-12})
        x = res.x
        if alpha == 1.0:
            break
    return x


def _golden(phi, lo, hi, iters=45):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = phi(d)
    return (c, fc) if fc <= fd else (d, fd)


def _polish(x, D, alpha, M=None, sweeps=30):
    """Coordinate-wise golden-section search on the exact risk."""
    expand = (lambda v: v) if M is None else (lambda v: M @ v)
    best = _exact_risk(expand(x), D, alpha)
    width = 1e-2
    for _ in range(sweeps):
        improved = False
        for i in range(x.size):
            def phi(t, i=i):
                y = x.copy()
                y[i] = np.clip(y[i] + t, -BOX, BOX)
                return _exact_risk(expand(y), D, alpha)
            t, val = _golden(phi, -width, width)
            if val < best - 1e-16:
                x = x.copy()
                x[i] = np.clip(x[i] + t, -BOX, BOX)
                best = val
                improved = True
        if not improved:
            width *= 0.1
            if width < 1e-12:
                break
    return x, best


def _tie_groups(f, tol=_SNAP_TOL):
    order = np.argsort(-f, kind="stable")
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if f[a] - f[b] < tol:
            current.append(b)
        else:
            groups.append(current)
            current = [b]
    groups.append(current)
    return groups


def _snap(f, risk, D, alpha):
    """Try forcing near-ties to be exact ties; keep it if the risk allows."""
    groups = _tie_groups(f)
    if all(len(g) == 1 for g in groups):
        return f, risk
    candidates = [groups]
    if len(groups[0]) > 1 and any(len(g) > 1 for g in groups[1:]):
        candidates.append([groups[0]] + [[i] for g in groups[1:] for i in g])
    best_f, best_r = f, risk
    for grp in candidates:
        M = np.zeros((f.size, len(grp)))
        for j, g in enumerate(grp):
            M[g, j] = 1.0
        x0 = np.array([f[g].mean() for g in grp])
        x = _descend(x0, D, alpha, M)
        x, r = _polish(x, D, alpha, M)
        if r <= best_r + 1e-12:
            best_f, best_r = M @ x, r
    return best_f, best_r


def _certified(f, D, alpha, risk):
    """Local optimality check along coordinate and pairwise directions."""
    k = f.size
    dirs = [np.eye(k)[i] for i in range(k)]
    dirs += [np.eye(k)[i] - np.eye(k)[j] for i in range(k) for j in range(i + 1, k)]
    dirs += [-d for d in dirs]
    for h in (1e-3, 1e-6):
        for d in dirs:
            if _exact_risk(f + h * d, D, alpha) < risk - 1e-9:
                return False
    return True


@dataclass(frozen=True)
class RiskMinimum:
    scores: np.ndarray
    risk: float
    restart_risks: tuple = field(default=())


def minimize_conditional_risk(D, alpha: float, restarts: int = 8, seed: int = 0,
                              full: bool = False):
    """Numerically minimize the conditional hybrid risk over score vectors.

    Returns the minimizing score vector shifted so its largest entry is 0
    (or a :class:`RiskMinimum` when ``full`` is true). Raises
    :class:`OracleError` if the restarts disagree by more than 1e-6 or the
    result fails the local optimality check.
    """
    D = as_distribution(D)
    alpha = check_alpha(alpha)
    if D.size > MAX_ORACLE_LABELS:
        raise ValueError(f"oracle supports at most {MAX_ORACLE_LABELS} labels")
    if restarts < 1:
        raise ValueError("need at least one restart")
    res = _minimize_cached(tuple(D.tolist()), alpha, int(restarts), int(seed))
    if full:
        return RiskMinimum(res.scores.copy(), res.risk, res.restart_risks)
    return res.scores.copy()


@lru_cache(maxsize=4096)
def _minimize_cached(D, alpha, restarts, seed):
    # verify_theorem1 and the probe solve the same problem; solve it once
    D = np.array(D)
    k = D.size
    rng = np.random.default_rng(seed)
    results = []
    for r in range(restarts):
        x0 = np.zeros(k) if r == 0 else rng.normal(scale=2.0, size=k)
        x = _descend(x0, D, alpha)
        results.append((_exact_risk(x, D, alpha), x))
    risks = np.array([r for r, _ in results])
    best = int(np.argmin(risks))
    f, risk = _polish(results[best][1], D, alpha)
    f, risk = _snap(f, risk, D, alpha)
    if not _certified(f, D, alpha, risk):
        f, risk = _polish(f, D, alpha)
        f, risk = _snap(f, risk, D, alpha)
        if not _certified(f, D, alpha, risk):
            raise OracleError(f"risk minimizer not certified for D={D}, alpha={alpha}")
    for i in np.flatnonzero(risks > risk + 1e-6):
        # a lagging restart must catch up once polished, else the descent is unreliable
        risks[i] = _polish(results[i][1], D, alpha)[1]
    if np.max(risks) - risk > 1e-6:
        raise OracleError(
            f"restarts disagree: risks span [{risk:.12g}, {np.max(risks):.12g}]")
    f = f - f.max()
    f.setflags(write=False)
    return RiskMinimum(f, risk, tuple(float(v) for v in risks))


def grid_minimize_conditional_risk(D, alpha: float, step: float = 0.01,
                                   radius: float = 3.0, chunk: int = 200_000):
    """Brute-force minimizer over a score grid (independent second oracle).

    The first score is pinned to 0 and the others range over
    ``[-radius, radius]`` in increments of ``step``. Grid points are integer
    multiples of ``step``, so equal integers give exactly equal scores.
    Returns ``(scores normalized to max 0, risk)``.
    """
    D = as_distribution(D)
    alpha = check_alpha(alpha)
    k = D.size
    if k > 4:
        raise ValueError("grid oracle is limited to k <= 4")
    n = int(round(radius / step))
    ticks = np.arange(-n, n + 1)
    total = ticks.size ** (k - 1)
    best_r, best_f = np.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        F = np.zeros((idx.size, k))
        rem = idx
        for j in range(k - 1, 0, -1):
            F[:, j] = ticks[rem % ticks.size] * step
            rem = rem // ticks.size
        r = risk_matrix(F, D, alpha)
        i = int(np.argmin(r))
        if r[i] < best_r:
            best_r, best_f = float(r[i]), F[i].copy()
    return best_f - best_f.max(), best_r


# --------------------------------------------------------------------------
# threshold verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Theorem1Check:
    predicted: bool
    observed: bool
    threshold: float
    alpha: float
    scores: np.ndarray
    risk: float


def verify_theorem1(D, alpha: float, **oracle_kw) -> Theorem1Check:
    """Compare the threshold prediction with the numerically observed alignment."""
    D = as_distribution(D)
    thr = alpha_threshold(D)
    res = minimize_conditional_risk(D, alpha, full=True, **oracle_kw)
    return Theorem1Check(
        predicted=thr.predicts(alpha),
        observed=is_aligned(res.scores, D),
        threshold=thr.threshold,
        alpha=float(alpha),
        scores=res.scores,
        risk=res.risk,
    )


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of minimizing hybrid risk over a score table.

    ``zero_one_risk`` is the misclassification rate under the least
    favourable tie-breaker among the tied top-scoring labels; the classifier
    is consistent only if it attains the minimum for every tie-breaker.
    ``zero_one_risk_lowest_id`` uses this package's own tie-breaker.
    """

    zero_one_risk: float
    zero_one_risk_lowest_id: float
    bayes_risk: float
    attains_minimum: bool
    aligned: bool
    table: np.ndarray


def probe_f_consistency(D, alpha: float, n_inputs: int = 2, **oracle_kw) -> ProbeResult:
    """Single-observation probe over an unconstrained score table.

    The hypothesis class assigns an arbitrary score vector to each of
    ``n_inputs`` inputs (so it can realize any score vector and any unique
    argmax). The data distribution puts all its mass on input 0 with label
    distribution ``D``; the remaining rows carry no mass and stay at zero.
    Minimizing the empirical hybrid risk over the table therefore reduces to
    minimizing the conditional risk of row 0.
    """
    D = as_distribution(D)
    k = D.size
    table = np.zeros((n_inputs, k))
    table[0] = minimize_conditional_risk(D, alpha, **oracle_kw)
    top = argmax_set(table[0], ARGMAX_TOL)
    worst = 1.0 - float(D[top].min())
    lowest = 1.0 - float(D[top[0]])
    bayes = 1.0 - float(D.max())
    return ProbeResult(
        zero_one_risk=worst,
        zero_one_risk_lowest_id=lowest,
        bayes_risk=bayes,
        attains_minimum=worst <= bayes + PROB_TIE_TOL,
        aligned=is_aligned(table[0], D),
        table=table,
    )

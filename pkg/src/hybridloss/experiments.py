"""End-to-end experiment drivers behind the command-line interface.

Each ``cmd_*`` function returns an :class:`ExperimentReport`; writing it to
disk is left to the caller.

Report schemas (CSV columns, in order):

* exp1: ``k, loss, alpha, error, error_lowest_id, objective, epochs_run``
* exp2: ``record, rho, m, loss, lambda, alpha, val_accuracy, test_accuracy,
  pair, wins, losses, ties``; ``record`` is ``accuracy`` for the per-dataset
  rows and ``pairwise`` for the three win/loss summaries
* chunk: ``loss, alpha, accuracy, precision, recall, f1`` (percent)
* dominance: ``record, rank, p_gold, p_best, n_sentences,
  non_dominant_fraction``; ``record`` is ``sorted`` or ``summary``
* consistency: ``record, trial, k, D, d_max, d_next, threshold, alpha,
  predicted, observed, probe_attains_minimum, zero_one_risk, bayes_risk,
  risk, violation, error`` and a final ``summary`` row with counts
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import chaincrf
from .consistency import (OracleError, alpha_threshold, dominance_stats, probe_f_consistency,
                          verify_theorem1)
from .dataio import features as feats
from .dataio.corpus import read_column_corpus
from .dataio.metrics import chunk_metrics
from .dataio.modelfile import ModelFile, load_model, save_model
from .dataio.synth import gen_exp1, gen_exp2
from .report import ExperimentReport
from .training import (MulticlassData, TrainConfig, multiclass_scores, predict_chain,
                       train_chain, train_multiclass, zero_one_error)

log = logging.getLogger(__name__)

LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1)
ALPHA_GRID = (0.5, 0.7, 0.9, 0.95, 0.99, 1.0)
EXP2_RHOS = tuple(round(0.1 * i, 1) for i in range(1, 11))
EXP2_SIZES = (30, 60, 100, 300, 600, 1000)
LOSS_ALPHA = {"hinge": 0.0, "log": 1.0}
VAL_FRACTION = 0.2


def _loss_alpha(loss: str, alpha: float | None) -> float | None:
    if loss in LOSS_ALPHA:
        return LOSS_ALPHA[loss]
    if loss != "hybrid":
        raise ValueError(f"unknown loss {loss!r}; choose hinge, log or hybrid")
    return alpha


# --------------------------------------------------------------------------
# multiclass experiments
# --------------------------------------------------------------------------

def cmd_exp1(alpha: float = 0.5, lam: float = 1e-4, k_min: int = 3, k_max: int = 10,
             epochs: int = 2000, seed: int = 0) -> ExperimentReport:
    """Error of hinge, log and hybrid training on the single-input populations.

    ``error`` is the expected weighted 0-1 error under a uniformly random
    choice among tied top scores; ``error_lowest_id`` breaks ties towards
    the lowest label id instead.
    """
    if not 3 <= k_min <= k_max <= 10:
        raise ValueError("need 3 <= k_min <= k_max <= 10")
    rep = ExperimentReport("exp1", seed, dict(alpha=alpha, lam=lam, k_min=k_min, k_max=k_max,
                                              epochs=epochs))
    for k in range(k_min, k_max + 1):
        data = gen_exp1(k)
        for loss in ("hinge", "log", "hybrid"):
            a = _loss_alpha(loss, alpha)
            res = train_multiclass(data, k, TrainConfig(lam=lam, alpha=a, epochs=epochs, seed=seed))
            F = multiclass_scores(res.weights, data.X, k)
            rep.add(k=k, loss=loss, alpha=a,
                    error=zero_one_error(F, data.labels, data.weights),
                    error_lowest_id=zero_one_error(F, data.labels, data.weights, ties="lowest"),
                    objective=res.objective_trace[-1], epochs_run=res.epochs_run)
    return rep


def standardize(train: MulticlassData, *others: MulticlassData):
    """Z-score features with training-split statistics and append a bias feature.

    Constant training columns keep unit scale. Returns the transformed
    ``train`` followed by the transformed ``others``.
    """
    mu = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    sd[sd == 0.0] = 1.0

    def apply(d):
        X = np.hstack([(d.X - mu) / sd, np.ones((len(d), 1))])
        return MulticlassData(X, d.labels, d.weights)

    return [apply(train)] + [apply(d) for d in others]


def _accuracy(w, data: MulticlassData, k: int) -> float:
    return 1.0 - zero_one_error(multiclass_scores(w, data.X, k), data.labels, data.weights)


def _select_and_test(train, val, test, k, lam_grid, alpha_grid, epochs, seed):
    fits = {}
    for a in alpha_grid:
        w = None
        # warm start along a path of decreasing regularization
        for lam in sorted(lam_grid, reverse=True):
            cfg = TrainConfig(lam=lam, alpha=a, epochs=epochs, seed=seed, mode="lbfgs")
            w = train_multiclass(train, k, cfg, init=w).weights
            fits[lam, a] = w
    best = None
    for lam in lam_grid:
        for a in alpha_grid:
            acc = _accuracy(fits[lam, a], val, k)
            if best is None or acc > best[0]:
                best = (acc, lam, a)
    acc, lam, a = best
    return dict(lam=lam, alpha=a, val_accuracy=acc,
                test_accuracy=_accuracy(fits[lam, a], test, k))


def _pairwise(rep, first, second):
    a = [r["test_accuracy"] for r in rep.select(record="accuracy", loss=first)]
    b = [r["test_accuracy"] for r in rep.select(record="accuracy", loss=second)]
    wins = sum(x > y for x, y in zip(a, b))
    losses = sum(x < y for x, y in zip(a, b))
    rep.add(record="pairwise", pair=f"{first}_vs_{second}", wins=wins, losses=losses,
            ties=len(a) - wins - losses)


def cmd_exp2(seed: int = 0, rhos=EXP2_RHOS, sizes=EXP2_SIZES, lam_grid=LAMBDA_GRID,
             alpha_grid=ALPHA_GRID, epochs: int = 500) -> ExperimentReport:
    """Mixtures of non-dominant and Gaussian instances, one dataset per (rho, m).

    For each dataset and loss, lambda (and alpha for the hybrid loss) is
    chosen by validation accuracy, the first grid point winning ties, and
    the chosen model's test accuracy is reported. Accuracies use the
    random tie-breaker expectation. Features are standardized on the
    training split and a bias feature is appended; models are fitted in
    ``lbfgs`` mode, each temperature stage capped at ``epochs`` iterations.
    """
    cfg = dict(rhos=list(rhos), sizes=list(sizes), lam_grid=list(lam_grid),
               alpha_grid=list(alpha_grid), epochs=epochs)
    rep = ExperimentReport("exp2", seed, cfg)
    k = 5
    for rho in rhos:
        for m in sizes:
            train, val, test = standardize(*gen_exp2(rho, m, seed))
            for loss in ("hinge", "log", "hybrid"):
                grid = alpha_grid if loss == "hybrid" else (LOSS_ALPHA[loss],)
                out = _select_and_test(train, val, test, k, lam_grid, grid, epochs, seed)
                rep.add(record="accuracy", rho=rho, m=m, loss=loss, **{"lambda": out["lam"]},
                        alpha=out["alpha"], val_accuracy=out["val_accuracy"],
                        test_accuracy=out["test_accuracy"])
            log.info("exp2 rho=%s m=%s done", rho, m)
    _pairwise(rep, "hybrid", "hinge")
    _pairwise(rep, "hybrid", "log")
    _pairwise(rep, "hinge", "log")
    return rep


# --------------------------------------------------------------------------
# chunking
# --------------------------------------------------------------------------

def _fit_chain(corpus, alpha, lam, epochs, minibatch, seed):
    fc = feats.featurize(corpus, "build")
    cfg = TrainConfig(lam=lam, alpha=alpha, epochs=epochs, minibatch=minibatch, seed=seed,
                      mode="stochastic")
    w = train_chain(fc.instances, len(fc.labels), cfg, n_features=len(fc.features)).weights
    return fc, w


def _evaluate_chain(fc, w, corpus):
    ev = feats.featurize(corpus, "frozen", fc.features, fc.labels)
    c = len(fc.labels)
    pred = [fc.labels.decode(predict_chain(w, inst, c)) for inst in ev.instances]
    return chunk_metrics(corpus.tags(), pred)


def cmd_chunk(train_path, test_path, loss: str = "hybrid", alpha: float | None = None,
              lam: float = 1e-3, epochs: int = 30, minibatch: int = 10, seed: int = 0,
              val_path=None, alpha_grid=ALPHA_GRID, model_out=None) -> ExperimentReport:
    """Train a chain tagger on one corpus and score chunking on another.

    With ``loss="hybrid"`` and no ``alpha``, alpha is chosen by chunk F1 on
    ``val_path`` or, failing that, on the last 20% of the training
    sentences; the final model is then retrained on the full training set.
    """
    a = _loss_alpha(loss, alpha)
    train = read_column_corpus(train_path)
    test = read_column_corpus(test_path)
    if len(train) == 0:
        raise ValueError("training corpus is empty")
    cfg = dict(train=str(train_path), test=str(test_path), loss=loss, lam=lam, epochs=epochs,
               minibatch=minibatch)
    if a is None:
        if val_path is not None:
            fit_part, val = train, read_column_corpus(val_path)
        else:
            n_val = int(len(train) * VAL_FRACTION)
            if n_val == 0:
                raise ValueError("too few training sentences to hold out a validation split")
            cut = len(train) - n_val
            fit_part, val = train.subset(range(cut)), train.subset(range(cut, len(train)))
        scores = []
        for cand in alpha_grid:
            fc, w = _fit_chain(fit_part, cand, lam, epochs, minibatch, seed)
            scores.append(_evaluate_chain(fc, w, val).f1)
        a = alpha_grid[int(np.argmax(scores))]
        cfg["alpha_selection"] = [[x, s] for x, s in zip(alpha_grid, scores)]
    fc, w = _fit_chain(train, a, lam, epochs, minibatch, seed)
    s = _evaluate_chain(fc, w, test)
    rep = ExperimentReport("chunk", seed, cfg)
    rep.add(loss=loss, alpha=a, accuracy=s.accuracy, precision=s.precision, recall=s.recall,
            f1=s.f1)
    if model_out is not None:
        save_model(ModelFile("chain", fc.labels.names, tuple(fc.features.names), w), model_out)
    return rep


def cmd_dominance(model_path, corpus_path, seed: int | None = None) -> ExperimentReport:
    """Gold-label and best-label probabilities of a chain model, sorted ascending.

    A sentence is non-dominant when its most likely labeling has probability
    below 1/2.
    """
    model = load_model(model_path)
    if model.kind != "chain":
        raise ValueError(f"expected a chain model, got {model.kind}")
    c = model.n_labels
    if model.weights.size != chaincrf.weight_dim(len(model.features), c):
        raise ValueError("model weights do not match its feature and label counts")
    corpus = read_column_corpus(corpus_path)
    fc = feats.featurize(corpus, "frozen", feats.FeatureDictionary.from_names(model.features),
                         feats.LabelAlphabet(model.labels))
    p_gold, p_best = [], []
    for inst in fc.instances:
        pot = chaincrf.build_potentials(model.weights, inst, c)
        log_z = chaincrf.log_partition(pot)
        p_gold.append(np.exp(pot.score(inst.labels) - log_z))
        p_best.append(np.exp(pot.score(chaincrf.viterbi(pot)) - log_z))
    rep = ExperimentReport("dominance", seed, dict(model=str(model_path), corpus=str(corpus_path)))
    for rank, (g, b) in enumerate(zip(sorted(p_gold), sorted(p_best))):
        rep.add(record="sorted", rank=rank, p_gold=g, p_best=b)
    n = len(p_best)
    frac = float(np.mean(np.array(p_best) < 0.5)) if n else 0.0
    rep.add(record="summary", n_sentences=n, non_dominant_fraction=frac)
    return rep


# --------------------------------------------------------------------------
# consistency
# --------------------------------------------------------------------------

ANCHORS = (((0.4, 0.3, 0.3), 0.0),)


def _fmt_dist(D) -> str:
    return ";".join(f"{p:.6g}" for p in D)


def _consistency_row(rep, trial, D, alpha):
    D = np.asarray(D, dtype=np.float64)
    stats = dominance_stats(D)
    row = dict(record="trial", trial=trial, k=D.size, D=_fmt_dist(D), d_max=stats.d_max,
               d_next=stats.d_next, alpha=alpha)
    try:
        chk = verify_theorem1(D, alpha)
        probe = probe_f_consistency(D, alpha)
    except OracleError as exc:
        rep.add(**row, error=str(exc))
        return None
    violation = chk.predicted and not chk.observed
    rep.add(**row, threshold=chk.threshold, predicted=chk.predicted, observed=chk.observed,
            probe_attains_minimum=probe.attains_minimum, zero_one_risk=probe.zero_one_risk,
            bayes_risk=probe.bayes_risk, risk=chk.risk, violation=violation)
    return chk.predicted, violation


def cmd_consistency(k_max: int = 8, trials: int = 500, seed: int = 0) -> ExperimentReport:
    """Check the alpha threshold's sufficiency claim on random distributions.

    Anchor rows come first (trial ids below zero). Each random trial draws
    ``k`` uniformly from 3..k_max, ``D`` from the flat Dirichlet and alpha
    uniformly from the open interval between max(threshold, 0) and 1, so
    that every random trial tests the claim.
    """
    if not 3 <= k_max <= 8:
        raise ValueError("k_max must lie in 3..8")
    if trials < 0:
        raise ValueError("trials must be non-negative")
    rep = ExperimentReport("consistency", seed, dict(k_max=k_max, trials=trials))
    outcomes = []
    for i, (D, alpha) in enumerate(ANCHORS):
        outcomes.append(_consistency_row(rep, i - len(ANCHORS), D, alpha))
    rng = np.random.default_rng(seed)
    for t in range(trials):
        k = int(rng.integers(3, k_max + 1))
        D = rng.dirichlet(np.ones(k))
        lo = max(0.0, alpha_threshold(D).threshold)
        u = rng.random()
        alpha = lo + (1.0 - lo) * (1.0 - u)   # 1 - u lies in (0, 1]
        if alpha <= lo:
            alpha = float(np.nextafter(lo, 1.0))
        outcomes.append(_consistency_row(rep, t, D, float(alpha)))
    done = [o for o in outcomes if o is not None]
    rep.add(record="summary", trials=len(outcomes),
            predicted_count=sum(p for p, _ in done),
            violations=sum(v for _, v in done),
            oracle_failures=len(outcomes) - len(done))
    return rep


def consistency_failed(rep: ExperimentReport) -> bool:
    summary = rep.select(record="summary")[-1]
    return summary["violations"] > 0 or summary["oracle_failures"] > 0


def bundled_corpus(name: str) -> Path:
    """Path of a corpus file shipped with the package (``chunk_train.txt``, ``chunk_test.txt``)."""
    return Path(__file__).with_name("data") / name

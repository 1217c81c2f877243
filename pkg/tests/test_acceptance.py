"""Acceptance suite: one test per criterion, summarized at the end of the run.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import itertools
import time

import numpy as np
import pytest

from hybridloss import chaincrf as cc
from hybridloss import experiments as ex
from hybridloss.cli import main
from hybridloss.consistency import grid_minimize_conditional_risk, minimize_conditional_risk
from hybridloss.core import argmax_set
from hybridloss.dataio.corpus import read_column_corpus
from hybridloss.dataio.features import featurize
from hybridloss.dataio.modelfile import ModelFile, load_model, save_model
from hybridloss.losses import grad_log_loss, hybrid_loss, log_loss, subgrad_hybrid_loss

from conftest import assert_grad_close, central_difference, random_instance


def by_loss(rows, loss):
    return sorted((r for r in rows if r["loss"] == loss), key=lambda r: r["k"])


@pytest.mark.acceptance(1, "error vs number of labels on the single-input population")
def test_error_vs_number_of_labels():
    start = time.perf_counter()
    rep = ex.cmd_exp1(alpha=0.5, k_min=3, k_max=10)
    assert time.perf_counter() - start < 60
    for loss in ("log", "hybrid"):
        errors = [r["error"] for r in by_loss(rep.rows, loss)]
        assert len(errors) == 8
        np.testing.assert_allclose(errors, 0.54, atol=0.01)
    hinge = [r["error"] for r in by_loss(rep.rows, "hinge")]
    assert np.all(np.diff(hinge) >= 0)
    assert hinge[-1] > hinge[0]


@pytest.mark.acceptance(2, "alpha above the threshold always yields an aligned risk minimizer")
def test_threshold_sufficiency():
    start = time.perf_counter()
    rep = ex.cmd_consistency(k_max=8, trials=500, seed=0)
    elapsed = time.perf_counter() - start
    trials = [r for r in rep.select(record="trial") if r["trial"] >= 0]
    assert len(trials) == 500
    assert all(r["predicted"] for r in trials)
    summary = rep.select(record="summary")[0]
    assert summary["oracle_failures"] == 0
    misaligned = [(r["D"], r["alpha"]) for r in trials if not r["observed"]]
    assert not misaligned, f"{len(misaligned)} of 500 minimizers not aligned, e.g. {misaligned[:3]}"
    assert elapsed < 300


@pytest.mark.acceptance(3, "hinge minimizer on a non-dominant distribution is not aligned")
def test_hinge_non_dominant_witness():
    D = (0.4, 0.3, 0.3)
    descent = minimize_conditional_risk(D, 0.0)
    grid, _ = grid_minimize_conditional_risk(D, 0.0)
    for scores in (descent, grid):
        assert argmax_set(scores).tolist() != [0]


def enumerate_scores(pot):
    L, c = pot.unary.shape
    Y = np.array(list(itertools.product(range(c), repeat=L)))
    s = pot.unary[np.arange(L), Y].sum(axis=1)
    if L > 1:
        s = s + pot.transition[Y[:, :-1], Y[:, 1:]].sum(axis=1)
    return Y, s


@pytest.mark.acceptance(4, "chain inference matches exhaustive enumeration")
def test_inference_matches_enumeration():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for L, c in itertools.product(range(1, 7), range(2, 5)):
        for _ in range(100):
            pot = cc.ChainPotentials(rng.normal(scale=2, size=(L, c)), rng.normal(scale=2, size=(c, c)))
            gold = rng.integers(0, c, size=L)
            Y, s = enumerate_scores(pot)
            np.testing.assert_array_equal(cc.viterbi(pot), Y[np.argmax(s)])
            m = s.max()
            log_z = m + np.log(np.exp(s - m).sum())
            np.testing.assert_allclose(cc.log_partition(pot), log_z, rtol=1e-8)
            p = np.exp(s - log_z)
            node = np.zeros((L, c))
            edge = np.zeros((L - 1, c, c))
            for j in range(L):
                np.add.at(node[j], Y[:, j], p)
            for j in range(L - 1):
                np.add.at(edge[j], (Y[:, j], Y[:, j + 1]), p)
            marg = cc.marginals(pot)
            np.testing.assert_allclose(marg.node, node, rtol=1e-8)
            np.testing.assert_allclose(marg.edge, edge, rtol=1e-8)
            aug = s + (Y != gold).mean(axis=1)
            np.testing.assert_array_equal(cc.loss_augmented_decode(pot, gold), Y[np.argmax(aug)])
    assert time.perf_counter() - start < 60


def differentiable_hybrid_point(f, y, gap=1e-3):
    rivals = np.delete(f, y)
    top = np.sort(rivals)
    return abs(1 + top[-1] - f[y]) > gap and top[-1] - top[-2] > gap


def differentiable_chain_hinge_point(w, inst, c, gap=1e-3):
    pot = cc.build_potentials(w, inst, c)
    Y, s = enumerate_scores(pot)
    aug = np.sort(s + (Y != inst.labels).mean(axis=1))
    return aug[-1] - pot.score(inst.labels) > gap and aug[-1] - aug[-2] > gap


@pytest.mark.acceptance(5, "analytic gradients match central finite differences")
def test_gradients_match_finite_differences():
    rng = np.random.default_rng(77)
    for _ in range(50):
        f, y = rng.normal(scale=2, size=4), int(rng.integers(4))
        assert_grad_close(grad_log_loss(f, y), central_difference(lambda v: log_loss(v, y), f))

    checked = 0
    while checked < 50:
        f, y, a = rng.normal(scale=2, size=4), int(rng.integers(4)), float(rng.random())
        if not differentiable_hybrid_point(f, y):
            continue
        assert_grad_close(subgrad_hybrid_loss(f, y, a),
                          central_difference(lambda v: hybrid_loss(v, y, a), f))
        checked += 1

    n, c = 5, 3
    for _ in range(50):
        inst = random_instance(rng, 3, c, n)
        w = rng.normal(size=cc.weight_dim(n, c))
        assert_grad_close(cc.grad_structured_log(w, inst, c),
                          central_difference(lambda v: cc.structured_log_loss(v, inst, c), w))

    n, c = 5, 2
    checked = 0
    while checked < 50:
        inst = random_instance(rng, 3, c, n)
        w = rng.normal(size=cc.weight_dim(n, c))
        if not differentiable_chain_hinge_point(w, inst, c):
            continue
        assert_grad_close(cc.subgrad_structured_hinge(w, inst, c),
                          central_difference(lambda v: cc.structured_hinge(v, inst, c), w))
        checked += 1


@pytest.mark.slow
@pytest.mark.acceptance(6, "hybrid wins at least as often as it loses on the mixture sweep")
def test_mixture_sweep_direction():
    start = time.perf_counter()
    rep = ex.cmd_exp2(seed=0)
    elapsed = time.perf_counter() - start
    assert len(rep.select(record="accuracy")) == 180
    vs_hinge = rep.select(record="pairwise", pair="hybrid_vs_hinge")[0]
    vs_log = rep.select(record="pairwise", pair="hybrid_vs_log")[0]
    print(f"hybrid vs hinge {vs_hinge['wins']}/{vs_hinge['losses']}, "
          f"hybrid vs log {vs_log['wins']}/{vs_log['losses']}, {elapsed:.0f} s")
    assert vs_hinge["wins"] >= vs_hinge["losses"]
    assert vs_log["wins"] >= vs_log["losses"]
    assert elapsed < 1800


@pytest.mark.acceptance(7, "all losses tag the bundled chunking corpus accurately")
def test_chunking_bundled_corpus():
    start = time.perf_counter()
    train, test = ex.bundled_corpus("chunk_train.txt"), ex.bundled_corpus("chunk_test.txt")
    assert len(read_column_corpus(train)) == 200
    scores = {loss: ex.cmd_chunk(train, test, loss=loss, epochs=30).rows[0]
              for loss in ("hinge", "log", "hybrid")}
    for row in scores.values():
        assert row["accuracy"] >= 95.0
    assert scores["hybrid"]["f1"] >= min(scores["hinge"]["f1"], scores["log"]["f1"]) - 0.5
    assert time.perf_counter() - start < 300


@pytest.mark.acceptance(8, "every command is byte-reproducible for a fixed seed")
def test_cli_determinism(tmp_path):
    model = tmp_path / "model.bin"
    commands = {
        "exp1": ["exp1", "--seed", "3"],
        "exp2": ["exp2", "--seed", "3", "--rhos", "0.2", "0.9", "--sizes", "30", "100",
                 "--lambda", "1e-3", "1e-1", "--alpha", "0.5", "0.95"],
        "chunk": ["chunk", "--seed", "3", "--loss", "hybrid", "--alpha-grid", "0.5", "0.9",
                  "--epochs", "10", "--model-out", str(model)],
        "dominance": ["dominance", "--seed", "3", "--model", str(model)],
        "consistency": ["consistency", "--seed", "3", "--trials", "25"],
    }
    for name, argv in commands.items():
        outputs = []
        for run in range(2):
            out = tmp_path / f"{name}{run}.csv"
            code = main(argv + ["--out", str(out)])
            assert code in (0, 1) and out.exists()
            outputs.append(out.read_bytes())
            if name == "chunk":
                outputs.append(model.read_bytes())
        assert outputs[0] == outputs[len(outputs) // 2], name
        js = [tmp_path / f"{name}{run}.json" for run in range(2)]
        for path in js:
            main(argv + ["--json", "--out", str(path)])
        assert js[0].read_bytes() == js[1].read_bytes(), name


@pytest.mark.acceptance(9, "model files round-trip bit-exactly and featurization is deterministic")
def test_round_trips(tmp_path):
    rng = np.random.default_rng(9)
    corpus_path = ex.bundled_corpus("chunk_train.txt")
    a = featurize(read_column_corpus(corpus_path))
    b = featurize(read_column_corpus(corpus_path))
    assert a.features.names == b.features.names and a.labels == b.labels
    for x, y in zip(a.instances, b.instances):
        np.testing.assert_array_equal(x.labels, y.labels)
        for u, v in zip(x.features, y.features):
            assert u.ids.tobytes() == v.ids.tobytes() and u.values.tobytes() == v.values.tobytes()

    c, n = len(a.labels), len(a.features)
    weights = rng.normal(size=cc.weight_dim(n, c)) * np.exp(rng.normal(scale=20, size=cc.weight_dim(n, c)))
    model = ModelFile("chain", a.labels.names, a.features.names, weights)
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.weights.tobytes() == weights.tobytes()
    assert back.labels == model.labels and back.features == model.features
    save_model(back, tmp_path / "m2.bin")
    assert (tmp_path / "m.bin").read_bytes() == (tmp_path / "m2.bin").read_bytes()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))

"""Synthetic data generators.

Normal variates are drawn by inversion: a PCG64 stream supplies 53-bit
uniforms on the open interval (0, 1), which are mapped through the inverse
standard normal CDF (``scipy.special.ndtri``). The algorithm is fixed so
that datasets are identical on every platform and numpy version that keeps
PCG64's integer stream stable.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from ..training import MulticlassData
from .corpus import ColumnCorpus, Token

EXP1_TOP = 0.46
EXP2_K = 5
EXP2_DIM = 100
EXP2_SD = 0.6
EXP2_NON_DOMINANT = (0.4, 0.15, 0.15, 0.15, 0.15)
EXP2_HELDOUT = 1000


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    bits = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (bits + 0.5) / 2.0**53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    return ndtri(open_uniform(rng, size))


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def gen_exp1(k: int) -> MulticlassData:
    """One weighted instance per label, all sharing the observation (1, 1).

    Label 0 carries weight 0.46 and the others share 0.54 equally, so the
    weighted empirical risk is exactly the population conditional risk.
    """
    if not 3 <= k <= 10:
        raise ValueError("k must lie in 3..10")
    weights = np.full(k, (1.0 - EXP1_TOP) / (k - 1))
    weights[0] = EXP1_TOP
    return MulticlassData(np.ones((k, 2)), np.arange(k), weights)


def non_dominant_point() -> np.ndarray:
    return np.full(EXP2_DIM, 1.0 / np.sqrt(EXP2_DIM))


def _exp2_sample(rng: np.random.Generator, rho: float, m: int) -> MulticlassData:
    n_nd = int(round(rho * m))
    X = np.empty((m, EXP2_DIM))
    y = np.empty(m, dtype=np.int64)
    # inverse-CDF draw from the non-dominant label distribution
    cdf = np.cumsum(EXP2_NON_DOMINANT)
    y[:n_nd] = np.minimum(np.searchsorted(cdf, open_uniform(rng, n_nd)), EXP2_K - 1)
    X[:n_nd] = non_dominant_point()
    n_dom = m - n_nd
    y[n_nd:] = rng.integers(0, EXP2_K, size=n_dom)
    X[n_nd:] = (1.0 + y[n_nd:, None]) + EXP2_SD * standard_normal(rng, (n_dom, EXP2_DIM))
    order = rng.permutation(m)
    return MulticlassData.uniform(X[order], y[order])


def gen_exp2(rho: float, m: int, seed: int):
    """(train, validation, test) mixtures of non-dominant and Gaussian instances.

    A fraction ``rho`` (rounded to a whole count) of each split shares the
    constant observation ``non_dominant_point()`` with labels drawn from
    (0.4, 0.15, 0.15, 0.15, 0.15); the rest have a uniform label ``y`` and
    coordinates drawn from Normal(1 + y, 0.6). Validation and test sets hold
    1000 instances and depend only on ``(rho, seed)``, so every training size
    is evaluated against the same held-out data.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if m < 1:
        raise ValueError("m must be positive")
    rkey = int(round(rho * 1_000_000))
    train = _exp2_sample(_stream(seed, 0, rkey, m), rho, m)
    val = _exp2_sample(_stream(seed, 1, rkey), rho, EXP2_HELDOUT)
    test = _exp2_sample(_stream(seed, 2, rkey), rho, EXP2_HELDOUT)
    return train, val, test


# --------------------------------------------------------------------------
# chunking corpus from a hidden Markov chain over BIO tags
# --------------------------------------------------------------------------

CHUNK_TAGS = ("O", "B-NP", "I-NP", "B-VP", "I-VP", "B-PP")

_START = {"B-NP": 0.75, "B-PP": 0.15, "O": 0.10}
_TRANSITIONS = {
    "O": {"B-NP": 0.60, "B-VP": 0.20, "B-PP": 0.15, "O": 0.05},
    "B-NP": {"I-NP": 0.75, "B-VP": 0.15, "B-PP": 0.05, "O": 0.05},
    "I-NP": {"I-NP": 0.35, "B-VP": 0.35, "B-PP": 0.15, "O": 0.13, "B-NP": 0.02},
    "B-VP": {"I-VP": 0.35, "B-NP": 0.40, "B-PP": 0.15, "O": 0.10},
    "I-VP": {"B-NP": 0.60, "B-PP": 0.20, "O": 0.20},
    "B-PP": {"B-NP": 1.00},
}
_POS = {
    "O": {".": 0.5, ",": 0.3, "CC": 0.2},
    "B-NP": {"DT": 0.55, "PRP": 0.20, "NN": 0.10, "JJ": 0.10, "NNP": 0.05},
    "I-NP": {"NN": 0.60, "JJ": 0.25, "NNS": 0.15},
    "B-VP": {"VBD": 0.4, "VBZ": 0.3, "MD": 0.3},
    "I-VP": {"VB": 0.6, "RB": 0.4},
    "B-PP": {"IN": 1.0},
}
_WORDS = {
    ".": [".", "!"],
    ",": [","],
    "CC": ["and", "but", "or"],
    "DT": ["the", "a", "this", "that", "every", "some"],
    "PRP": ["he", "she", "it", "they", "we"],
    "NN": ["dog", "market", "report", "price", "plan", "house", "company", "year",
           "river", "teacher", "engine", "letter", "garden", "city", "run"],
    "NNS": ["dogs", "prices", "plans", "houses", "years", "letters", "engines", "cities"],
    "NNP": ["Paris", "Smith", "Acme", "Monday", "Ontario"],
    "JJ": ["big", "old", "new", "quiet", "green", "strong", "early", "final"],
    "VBD": ["said", "saw", "bought", "made", "took", "found", "wrote"],
    "VBZ": ["says", "sees", "buys", "makes", "takes", "finds", "writes"],
    "MD": ["will", "can", "may", "should"],
    "VB": ["see", "buy", "make", "take", "find", "write", "run", "plan"],
    "RB": ["quickly", "often", "never", "also", "soon"],
    "IN": ["in", "on", "of", "with", "near", "for"],
}
CHUNK_MIN_LEN = 5
CHUNK_MAX_LEN = 18
BUNDLED_TRAIN = (200, 20240)   # (sentences, seed) of the bundled training file
BUNDLED_TEST = (100, 20241)


def _draw(rng, table: dict) -> str:
    keys = list(table)
    p = np.array([table[key] for key in keys])
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def gen_chunk_corpus(n_sentences: int, seed: int) -> ColumnCorpus:
    """Sample a BIO chunking corpus from a fixed tag chain.

    Tags follow a first-order Markov chain over O, B-NP, I-NP, B-VP, I-VP and
    B-PP; each tag emits a POS tag, which emits a word. A few words appear
    under two POS tags to keep the task from being a pure lookup. The first
    word of each sentence is capitalized.
    """
    rng = np.random.default_rng(int(seed))
    sentences = []
    for _ in range(int(n_sentences)):
        length = int(rng.integers(CHUNK_MIN_LEN, CHUNK_MAX_LEN + 1))
        tag = _draw(rng, _START)
        toks = []
        for j in range(length):
            if j:
                tag = _draw(rng, _TRANSITIONS[tag])
            pos = _draw(rng, _POS[tag])
            words = _WORDS[pos]
            word = words[int(rng.integers(len(words)))]
            if j == 0:
                word = word[:1].upper() + word[1:]
            toks.append(Token(word, pos, tag))
        sentences.append(tuple(toks))
    return ColumnCorpus(tuple(sentences))

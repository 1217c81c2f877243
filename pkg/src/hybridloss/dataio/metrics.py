"""Token accuracy and chunk-level precision/recall/F1 for BIO tags.

A chunk starts at ``B-X`` and extends over the following ``I-X`` tags. An
``I-X`` that does not continue a chunk of type ``X`` opens a new chunk, the
convention of the CoNLL ``conlleval`` script.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

_TAG = re.compile(r"^(?:O|[BI]-\S+)$")


@dataclass(frozen=True)
class ChunkScores:
    accuracy: float
    precision: float
    recall: float
    f1: float


def _check(tag):
    if not _TAG.match(tag):
        raise ValueError(f"malformed BIO tag {tag!r}")


def extract_chunks(tags) -> set:
    """Set of (start, end_exclusive, type) spans."""
    chunks = set()
    start, kind = None, None
    for i, tag in enumerate(list(tags) + ["O"]):
        _check(tag)
        prefix, _, typ = tag.partition("-")
        continues = prefix == "I" and kind == typ
        if start is not None and not continues:
            chunks.add((start, i, kind))
            start, kind = None, None
        if prefix == "B" or (prefix == "I" and not continues):
            start, kind = i, typ
    return chunks


def _as_sentences(seq):
    seq = list(seq)
    if seq and isinstance(seq[0], str):
        return [seq]
    return [list(s) for s in seq]


def chunk_metrics(gold, predicted) -> ChunkScores:
    """Scores in percent. Accepts one tag sequence or a list of sentences."""
    gold_s, pred_s = _as_sentences(gold), _as_sentences(predicted)
    if len(gold_s) != len(pred_s) or any(len(g) != len(p) for g, p in zip(gold_s, pred_s)):
        raise ValueError("gold and predicted tag sequences differ in length")
    n_tok = n_match = n_gold = n_pred = n_correct = 0
    for g, p in zip(gold_s, pred_s):
        n_tok += len(g)
        n_match += sum(a == b for a, b in zip(g, p))
        gc, pc = extract_chunks(g), extract_chunks(p)
        n_gold += len(gc)
        n_pred += len(pc)
        n_correct += len(gc & pc)
    acc = 100.0 * n_match / n_tok if n_tok else 0.0
    prec = 100.0 * n_correct / n_pred if n_pred else 0.0
    rec = 100.0 * n_correct / n_gold if n_gold else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return ChunkScores(acc, prec, rec, f1)

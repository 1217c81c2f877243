"""Reader and writer for three-column (word, POS, chunk tag) corpora.

Sentences are separated by blank lines, as in the CoNLL-2000 chunking files.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple


class CorpusParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


class Token(NamedTuple):
    word: str
    pos: str
    tag: str


@dataclass(frozen=True)
class ColumnCorpus:
    sentences: tuple

    def __len__(self):
        return len(self.sentences)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def tags(self):
        return [[t.tag for t in s] for s in self.sentences]

    def subset(self, indices) -> "ColumnCorpus":
        return ColumnCorpus(tuple(self.sentences[i] for i in indices))


def parse_column_text(text: str) -> ColumnCorpus:
    sentences, current = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            if current:
                sentences.append(tuple(current))
                current = []
            continue
        cols = line.split()
        if len(cols) != 3:
            raise CorpusParseError(lineno, raw, f"expected 3 columns, found {len(cols)}")
        current.append(Token(*cols))
    if current:
        sentences.append(tuple(current))
    return ColumnCorpus(tuple(sentences))


def read_column_corpus(path) -> ColumnCorpus:
    return parse_column_text(Path(path).read_text(encoding="utf-8"))


def format_column_corpus(corpus: ColumnCorpus) -> str:
    blocks = ["\n".join(" ".join(tok) for tok in sent) for sent in corpus.sentences]
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def write_column_corpus(corpus: ColumnCorpus, path) -> None:
    Path(path).write_text(format_column_corpus(corpus), encoding="utf-8")

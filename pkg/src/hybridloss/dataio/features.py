"""Built-in token feature template and the feature/label dictionaries.

Every token fires binary features for its word, lowercased word, prefixes
and suffixes of length 1 to 3 (only those no longer than the word), its POS
tag, and the words and POS tags at offsets -2, -1, +1 and +2, padded with
boundary symbols. Feature id 0 is reserved for out-of-vocabulary features:
in frozen mode any unseen feature string maps there.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..chaincrf import ChainInstance
from ..core import SparseFeatureVector
from .corpus import ColumnCorpus

OOV = "<OOV>"
OOV_ID = 0
_OFFSETS = (-2, -1, 1, 2)


def token_features(sentence, j: int) -> list[str]:
    word, pos = sentence[j].word, sentence[j].pos
    feats = [f"w={word}", f"lw={word.lower()}"]
    for n in range(1, 4):
        if n <= len(word):
            feats.append(f"pre{n}={word[:n]}")
            feats.append(f"suf{n}={word[-n:]}")
    feats.append(f"pos={pos}")
    for off in _OFFSETS:
        i = j + off
        if 0 <= i < len(sentence):
            w, p = sentence[i].word, sentence[i].pos
        else:
            w = p = "<BOS>" if i < 0 else "<EOS>"
        feats.append(f"w[{off:+d}]={w}")
        feats.append(f"pos[{off:+d}]={p}")
    return feats


@dataclass
class FeatureDictionary:
    """Feature-string to id map; ids follow insertion order."""

    names: list = field(default_factory=lambda: [OOV])
    index: dict = field(default_factory=lambda: {OOV: OOV_ID})

    @classmethod
    def from_names(cls, names):
        names = list(names)
        if not names or names[0] != OOV:
            raise ValueError(f"feature list must start with {OOV!r}")
        return cls(names, {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.names)

    def lookup(self, name: str, grow: bool) -> int:
        fid = self.index.get(name)
        if fid is None:
            if not grow:
                return OOV_ID
            fid = len(self.names)
            self.index[name] = fid
            self.names.append(name)
        return fid

    def to_bytes(self) -> bytes:
        return "\n".join(self.names).encode("utf-8")


@dataclass(frozen=True)
class LabelAlphabet:
    names: tuple

    @classmethod
    def from_corpus(cls, corpus: ColumnCorpus):
        return cls(tuple(sorted({t.tag for s in corpus.sentences for t in s})))

    def __len__(self):
        return len(self.names)

    def encode(self, tag: str) -> int:
        try:
            return self.names.index(tag)
        except ValueError:
            raise ValueError(f"tag {tag!r} not in the label alphabet {self.names}") from None

    def decode(self, ids) -> list[str]:
        return [self.names[int(i)] for i in ids]


@dataclass(frozen=True)
class FeaturizedCorpus:
    instances: list
    features: FeatureDictionary
    labels: LabelAlphabet


def featurize(corpus: ColumnCorpus, mode: str = "build", features: FeatureDictionary = None,
              labels: LabelAlphabet = None) -> FeaturizedCorpus:
    """Turn a corpus into chain instances.

    ``mode="build"`` creates fresh dictionaries from this corpus;
    ``mode="frozen"`` requires existing ``features`` and ``labels`` and maps
    unseen feature strings to the OOV id.
    """
    if mode == "build":
        features = FeatureDictionary()
        labels = LabelAlphabet.from_corpus(corpus)
    elif mode == "frozen":
        if features is None or labels is None:
            raise ValueError("frozen featurization needs existing dictionaries")
    else:
        raise ValueError(f"unknown featurization mode {mode!r}")
    grow = mode == "build"
    instances = []
    for sent in corpus.sentences:
        vecs = []
        for j in range(len(sent)):
            ids = [features.lookup(name, grow) for name in token_features(sent, j)]
            vecs.append(SparseFeatureVector.from_pairs((i, 1.0) for i in ids))
        gold = [labels.encode(tok.tag) for tok in sent]
        instances.append(ChainInstance(tuple(vecs), gold))
    return FeaturizedCorpus(instances, features, labels)

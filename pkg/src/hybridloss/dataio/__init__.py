"""Corpora, feature extraction, synthetic data, chunk metrics and model files."""
from .corpus import ColumnCorpus, CorpusParseError, Token, read_column_corpus, write_column_corpus
from .features import FeatureDictionary, LabelAlphabet, featurize
from .metrics import ChunkScores, chunk_metrics
from .modelfile import ModelFile, load_model, save_model
from .synth import gen_chunk_corpus, gen_exp1, gen_exp2

__all__ = [
    "ColumnCorpus", "CorpusParseError", "Token", "read_column_corpus", "write_column_corpus",
    "FeatureDictionary", "LabelAlphabet", "featurize", "ChunkScores", "chunk_metrics",
    "ModelFile", "load_model", "save_model", "gen_chunk_corpus", "gen_exp1", "gen_exp2",
]

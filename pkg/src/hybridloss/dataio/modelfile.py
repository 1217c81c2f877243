"""Versioned little-endian binary model files.

Layout::

    magic     4 bytes   b"HYBL"
    version   uint16
    kind      uint8     0 = multiclass, 1 = chain
    reserved  uint8     0
    n_labels  uint32
    n_feats   uint32
    n_weights uint64
    strings   n_labels label names then n_feats feature names,
              each as uint32 byte length + UTF-8 bytes
    weights   n_weights float64
    checksum  8 bytes   BLAKE2b-64 of everything above

The version is checked before the checksum so that files from another
format version are reported as such rather than as corrupt.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"HYBL"
FORMAT_VERSION = 1
KINDS = ("multiclass", "chain")
_HEADER = struct.Struct("<4sHBBIIQ")
_CHECKSUM_BYTES = 8


class ModelFileError(ValueError):
    """Malformed or truncated model file."""


class ModelVersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


@dataclass(frozen=True)
class ModelFile:
    kind: str
    labels: tuple
    features: tuple
    weights: np.ndarray
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def n_labels(self) -> int:
        return len(self.labels)


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()


def model_to_bytes(model: ModelFile) -> bytes:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, KINDS.index(model.kind), 0,
                          len(model.labels), len(model.features), model.weights.size)]
    for s in model.labels + model.features:
        b = s.encode("utf-8")
        parts.append(struct.pack("<I", len(b)))
        parts.append(b)
    parts.append(model.weights.astype("<f8").tobytes())
    payload = b"".join(parts)
    return payload + _checksum(payload)


def model_from_bytes(data: bytes) -> ModelFile:
    if len(data) < _HEADER.size + _CHECKSUM_BYTES:
        raise ModelFileError("file too short to be a model")
    magic, version, kind, _, n_labels, n_feats, n_weights = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFileError("bad magic bytes")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version}, expected {FORMAT_VERSION}")
    payload, check = data[:-_CHECKSUM_BYTES], data[-_CHECKSUM_BYTES:]
    if _checksum(payload) != check:
        raise ChecksumError("checksum mismatch (truncated or corrupt file)")
    if kind >= len(KINDS):
        raise ModelFileError(f"unknown model kind code {kind}")
    pos = _HEADER.size
    strings = []
    try:
        for _ in range(n_labels + n_feats):
            (n,) = struct.unpack_from("<I", payload, pos)
            pos += 4
            if pos + n > len(payload):
                raise ModelFileError("string table overruns the file")
            strings.append(payload[pos:pos + n].decode("utf-8"))
            pos += n
    except struct.error as exc:
        raise ModelFileError("string table overruns the file") from exc
    if len(payload) - pos != 8 * n_weights:
        raise ModelFileError("weight block size does not match the header")
    weights = np.frombuffer(payload, dtype="<f8", count=n_weights, offset=pos).astype(np.float64)
    return ModelFile(KINDS[kind], tuple(strings[:n_labels]), tuple(strings[n_labels:]), weights,
                     version)


def save_model(model: ModelFile, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> ModelFile:
    return model_from_bytes(Path(path).read_bytes())

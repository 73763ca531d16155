"""PFV1 feature files, ingestion of externally computed features, and the TOP rule.

PFV1 layout (little-endian)::

    b"PFV1" | u32 dimension | u32 row count
    per row: u32 id byte-length | UTF-8 id | dimension x float32

Deep-network activations (Pool5/FC6/FC7/FC8 exports, Object Bank vectors) are
never computed here; they arrive as PFV1 files and are validated on read.
Layer names follow the ``C-``/``H-``/``P-`` prefix convention, e.g. ``H-Pool5``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (BadMagic, DimensionMismatch, DuplicatePhotoId, IoFailure,
                     LengthMismatch, TruncatedFile)

MAGIC = b"PFV1"
_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")

# Declared widths of the built-in low-level features.
FEATURE_DIMS = {"lab30": 30, "gist": 512, "surfbow500": 500}


@dataclass
class FeatureMatrix:
    """Named real matrix with one float32 row per photo id."""

    feature_name: str
    ids: list[str]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.ids):
            raise ValueError(f"values must be ({len(self.ids)}, dim), got {self.values.shape}")
        if len(set(self.ids)) != len(self.ids):
            raise DuplicatePhotoId("photo ids in a feature matrix must be unique")
        self._index = {pid: i for i, pid in enumerate(self.ids)}

    @classmethod
    def empty(cls, feature_name, dimension):
        return cls(feature_name, [], np.zeros((0, dimension), dtype=np.float32))

    @classmethod
    def from_rows(cls, feature_name, rows: dict, dimension=None):
        ids = list(rows)
        if not ids:
            return cls.empty(feature_name, dimension or 0)
        return cls(feature_name, ids, np.stack([np.asarray(rows[i]) for i in ids]))

    @property
    def dimension(self):
        return self.values.shape[1]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, photo_id):
        return photo_id in self._index

    def row(self, photo_id):
        return self.values[self._index[photo_id]]

    def take(self, photo_ids: Sequence[str]) -> np.ndarray:
        """Stack the rows for ``photo_ids`` in the given order (KeyError if absent)."""
        idx = [self._index[p] for p in photo_ids]
        return self.values[idx]

    def subset(self, photo_ids):
        photo_ids = list(photo_ids)
        return FeatureMatrix(self.feature_name, photo_ids, self.take(photo_ids))

    def renamed(self, feature_name):
        return FeatureMatrix(feature_name, list(self.ids), self.values)


def encode_feature_file(matrix: FeatureMatrix) -> bytes:
    if not np.all(np.isfinite(matrix.values)):
        raise ValueError("feature values must all be finite")
    parts = [_HEADER.pack(MAGIC, matrix.dimension, len(matrix))]
    data = np.ascontiguousarray(matrix.values, dtype="<f4")
    for i, pid in enumerate(matrix.ids):
        raw = pid.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
        parts.append(data[i].tobytes())
    return b"".join(parts)


def write_feature_file(matrix: FeatureMatrix, path):
    payload = encode_feature_file(matrix)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def decode_feature_file(buf: bytes, feature_name="", expected_dimension=None) -> FeatureMatrix:
    if len(buf) < _HEADER.size:
        if buf[:4] != MAGIC[:len(buf[:4])]:
            raise BadMagic("not a PFV1 file")
        raise TruncatedFile("file shorter than the PFV1 header", row=None)
    magic, dim, n_rows = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if expected_dimension is not None and dim != expected_dimension:
        raise DimensionMismatch(f"file dimension {dim} != expected {expected_dimension}")
    ids = []
    values = np.empty((n_rows, dim), dtype=np.float32)
    off = _HEADER.size
    row_bytes = 4 * dim
    for r in range(n_rows):
        if off + 4 > len(buf):
            raise TruncatedFile(f"truncated at row {r} (id length)", row=r)
        (n_id,) = _U32.unpack_from(buf, off)
        off += 4
        if off + n_id + row_bytes > len(buf):
            raise TruncatedFile(f"truncated at row {r}", row=r)
        ids.append(buf[off:off + n_id].decode("utf-8"))
        off += n_id
        values[r] = np.frombuffer(buf, dtype="<f4", count=dim, offset=off)
        off += row_bytes
    if off != len(buf):
        raise IoFailure(f"{len(buf) - off} trailing bytes after last row")
    if len(set(ids)) != len(ids):
        raise DuplicatePhotoId("duplicate photo ids in feature file")
    return FeatureMatrix(feature_name, ids, values)


def read_feature_file(path, expected_dimension=None, feature_name=None) -> FeatureMatrix:
    if feature_name is None:
        feature_name = os.path.splitext(os.path.basename(str(path)))[0]
    with open(path, "rb") as fh:
        buf = fh.read()
    return decode_feature_file(buf, feature_name, expected_dimension)


def feature_file_size(ids, dimension):
    return 12 + sum(4 + len(p.encode("utf-8")) + 4 * dimension for p in ids)


def ingest(in_path, feature_name, out_path, expected_dimension=None) -> FeatureMatrix:
    """Validate an externally produced PFV1 export and store it under ``feature_name``."""
    mat = read_feature_file(in_path, expected_dimension, feature_name)
    if not np.all(np.isfinite(mat.values)):
        raise ValueError(f"{in_path} contains non-finite values")
    write_feature_file(mat, out_path)
    return mat


@dataclass(frozen=True)
class AuthorIndex:
    """Ordered author ids; position i is output dimension i of a classifier."""

    authors: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.authors)) != len(self.authors):
            raise ValueError("author index contains duplicates")

    def __len__(self):
        return len(self.authors)

    def __getitem__(self, i):
        return self.authors[i]

    def position(self, author_id):
        return self.authors.index(author_id)


def top_rule_classify(fc8_row, index: AuthorIndex) -> str:
    """Author at the argmax of a network's output vector (first maximum wins)."""
    v = np.asarray(fc8_row)
    if v.ndim != 1 or v.shape[0] != len(index):
        raise LengthMismatch(f"vector length {v.shape} != author index length {len(index)}")
    return index[int(np.argmax(v))]

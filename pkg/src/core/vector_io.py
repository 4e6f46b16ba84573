"""
Vector file I/O
fvecs / bvecs / ivecs readers and writers: each record is a little-endian
int32 dimension followed by d elements (float32, uint8 or int32)
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.core.errors import (FormatError, InconsistentDimensionError, InvalidArgumentError,
                             TruncatedFileError)

logger = logging.getLogger(__name__)

ELEMENT_TYPES = {
    'fvecs': np.dtype('<f4'),
    'bvecs': np.dtype('u1'),
    'ivecs': np.dtype('<i4'),
}

PathLike = Union[str, Path]


def kind_for_path(path: PathLike, kind: Optional[str] = None) -> str:
    """Element kind from an explicit name or the file suffix"""
    kind = kind or Path(path).suffix.lstrip('.').lower()
    if kind not in ELEMENT_TYPES:
        raise InvalidArgumentError(f"unknown vector file kind {kind!r}; expected one of {sorted(ELEMENT_TYPES)}")
    return kind


def _scan_records(raw: np.ndarray, d: int, width: int, path: PathLike) -> None:
    """Walk records one by one to name the first defect; only called on a bad length"""
    offset = 0
    record = 0
    while offset < raw.size:
        if offset + 4 > raw.size:
            raise TruncatedFileError(f"{path}: record {record} header cut short at byte {offset}")
        dim = int(raw[offset:offset + 4].view('<i4')[0])
        if dim != d:
            raise InconsistentDimensionError(f"{path}: record {record} has d={dim}, expected d={d}")
        if offset + 4 + d * width > raw.size:
            raise TruncatedFileError(f"{path}: record {record} truncated at byte {raw.size}")
        offset += 4 + d * width
        record += 1


def read_vectors(path: PathLike, kind: Optional[str] = None, limit: Optional[int] = None) -> np.ndarray:
    """
    Read a whole vector file into an (n, d) matrix of the element type.

    Raises InconsistentDimensionError when records disagree on d and
    TruncatedFileError on a trailing partial record.
    """
    kind = kind_for_path(path, kind)
    dtype = ELEMENT_TYPES[kind]
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.empty((0, 0), dtype=dtype)
    if raw.size < 4:
        raise TruncatedFileError(f"{path}: {raw.size} bytes cannot hold a dimension header")

    d = int(raw[:4].view('<i4')[0])
    if d <= 0:
        raise FormatError(f"{path}: first record declares d={d}")
    record_size = 4 + d * dtype.itemsize
    if raw.size % record_size:
        _scan_records(raw, d, dtype.itemsize, path)

    rows = raw.reshape(-1, record_size)
    if limit is not None:
        rows = rows[:limit]
    dims = np.ascontiguousarray(rows[:, :4]).view('<i4').ravel()
    bad = np.flatnonzero(dims != d)
    if bad.size:
        raise InconsistentDimensionError(f"{path}: record {bad[0]} has d={dims[bad[0]]}, expected d={d}")

    vectors = np.ascontiguousarray(rows[:, 4:]).view(dtype).reshape(rows.shape[0], d)
    logger.info(f"Read {vectors.shape[0]} x {d} {kind} vectors from {path}")
    return vectors


def write_vectors(path: PathLike, vectors, kind: Optional[str] = None) -> None:
    kind = kind_for_path(path, kind)
    dtype = ELEMENT_TYPES[kind]
    vectors = np.asarray(vectors)
    if vectors.ndim != 2:
        raise InvalidArgumentError(f"vectors must be a 2-D matrix, got shape {vectors.shape}")
    n, d = vectors.shape
    records = np.empty(n, dtype=[('d', '<i4'), ('values', dtype, (d,))])
    records['d'] = d
    records['values'] = vectors
    records.tofile(path)
    logger.info(f"Wrote {n} x {d} {kind} vectors to {path}")

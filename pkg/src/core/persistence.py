"""
Index persistence
Little-endian binary format: magic "DETL", u32 version, params, projector,
breakpoints, one preorder node stream per tree, dataset fingerprint
"""

import logging
import math
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from src.core.de_tree import DeTree, DeTreeNode, NodePrefix
from src.core.encoder import BreakpointTable
from src.core.errors import (FingerprintMismatchError, FormatError, InvalidArgumentError,
                             MagicMismatchError, TruncatedFileError, VersionMismatchError)
from src.core.index import DetIndex, dataset_fingerprint
from src.core.input_validator import InputValidator
from src.core.params import LshParams
from src.core.projection import PaaProjector, sample_hash_family

logger = logging.getLogger(__name__)

MAGIC = b"DETL"
FORMAT_VERSION = 1

PROJECTOR_LSH = 0
PROJECTOR_PAA = 1
NODE_INTERNAL = 0
NODE_LEAF = 1

_PARAMS = struct.Struct('<IIdddddIdIdI')
_PROJECTOR = struct.Struct('<BQIIIQ')
_SHAPE = struct.Struct('<QI')


class _Writer:
    def __init__(self):
        self.parts: List[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        self.parts.append(struct.pack(fmt, *values))

    def array(self, values: np.ndarray, dtype: str) -> None:
        self.parts.append(np.ascontiguousarray(values, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b''.join(self.parts)


class _Reader:
    """Cursor over the serialized bytes; every read checks the remaining length"""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def _take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise TruncatedFileError(f"index file truncated while reading {what} at byte {self.offset}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, layout: struct.Struct, what: str) -> tuple:
        return layout.unpack(self._take(layout.size, what))

    def scalar(self, fmt: str, what: str):
        return struct.unpack(fmt, self._take(struct.calcsize(fmt), what))[0]

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        dtype = np.dtype(dtype)
        return np.frombuffer(self._take(dtype.itemsize * count, what), dtype=dtype)


def _write_node(out: _Writer, tree: DeTree, node: DeTreeNode) -> None:
    if node.is_leaf:
        positions = np.asarray(node.positions, dtype=np.int64)
        out.pack('<BI', NODE_LEAF, len(positions))
        out.array(positions, '<u4')
        out.array(tree.symbols[positions], 'u1')
    else:
        out.pack('<BH', NODE_INTERNAL, node.split_dim)
        _write_node(out, tree, node.children[0])
        _write_node(out, tree, node.children[1])


def serialize_index(index: DetIndex) -> bytes:
    p = index.params
    projector = index.projector
    out = _Writer()
    out.parts.append(MAGIC)
    out.pack('<I', FORMAT_VERSION)
    out.parts.append(_PARAMS.pack(p.K, p.L, p.c, p.beta, p.epsilon, p.alpha1, p.alpha2,
                                  p.n_regions, p.sample_fraction, p.leaf_capacity,
                                  math.nan if p.r_min is None else p.r_min, p.k))
    kind = PROJECTOR_PAA if index.det_only else PROJECTOR_LSH
    family_seed = getattr(projector, 'seed', 0)
    out.parts.append(_PROJECTOR.pack(kind, family_seed, projector.d, projector.K, projector.L, index.seed))
    out.parts.append(_SHAPE.pack(index.n, index.d))

    out.pack('<I', index.table.sample_size)
    out.array(index.table.boundaries, '<f8')

    for tree in index.trees:
        out.pack('<II', tree.max_size, len(tree.root_slots))
        for slot in sorted(tree.root_slots):
            out.pack('<I', slot)
            _write_node(out, tree, tree.root_slots[slot])

    out.pack('<Q', index.fingerprint)
    return out.getvalue()


def _read_node(reader: _Reader, prefix: NodePrefix, K: int, symbols: np.ndarray,
               seen: np.ndarray) -> DeTreeNode:
    kind = reader.scalar('<B', "node kind")
    if kind == NODE_LEAF:
        count = reader.scalar('<I', "leaf size")
        positions = reader.array('<u4', count, "leaf positions").astype(np.int64)
        leaf_symbols = reader.array('u1', count * K, "leaf symbols").reshape(count, K)
        if positions.size and (positions.max() >= seen.size or seen[positions].any()):
            raise FormatError("leaf positions out of range or repeated")
        seen[positions] = True
        symbols[positions] = leaf_symbols
        return DeTreeNode(prefix=prefix, positions=positions.tolist())
    if kind != NODE_INTERNAL:
        raise FormatError(f"unknown node kind {kind}")
    dim = reader.scalar('<H', "split dimension")
    if dim >= K:
        raise FormatError(f"split dimension {dim} outside [0, {K})")
    left = _read_node(reader, prefix.child(dim, 0), K, symbols, seen)
    right = _read_node(reader, prefix.child(dim, 1), K, symbols, seen)
    return DeTreeNode(prefix=prefix, split_dim=dim, children=(left, right))


def deserialize_index(data: bytes, dataset) -> DetIndex:
    """Rebuild an index from bytes, verifying the dataset fingerprint"""
    reader = _Reader(data)
    magic = reader._take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise MagicMismatchError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.scalar('<I', "version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version} unsupported (expected {FORMAT_VERSION})")

    (K, L, c, beta, epsilon, alpha1, alpha2, n_regions, sample_fraction,
     leaf_capacity, r_min, k) = reader.unpack(_PARAMS, "params")
    try:
        params = LshParams(K=K, L=L, c=c, beta=beta, epsilon=epsilon, alpha1=alpha1, alpha2=alpha2,
                           n_regions=n_regions, sample_fraction=sample_fraction,
                           leaf_capacity=leaf_capacity, r_min=None if math.isnan(r_min) else r_min, k=k)
    except InvalidArgumentError as e:
        raise FormatError(f"corrupt params section: {e}") from e
    kind, family_seed, d, proj_K, proj_L, seed = reader.unpack(_PROJECTOR, "projector")
    n, data_d = reader.unpack(_SHAPE, "dataset shape")

    dataset = InputValidator.matrix(dataset)
    if dataset.shape != (n, data_d):
        raise FingerprintMismatchError(
            f"index was built on a {n} x {data_d} dataset, got {dataset.shape[0]} x {dataset.shape[1]}"
        )

    if kind == PROJECTOR_LSH:
        projector = sample_hash_family(d, proj_K, proj_L, family_seed)
    elif kind == PROJECTOR_PAA:
        projector = PaaProjector(d=d, K=proj_K)
    else:
        raise FormatError(f"unknown projector kind {kind}")

    sample_size = reader.scalar('<I', "sample size")
    boundaries = reader.array('<f8', proj_L * K * (n_regions + 1), "breakpoints")
    table = BreakpointTable(boundaries=boundaries.reshape(proj_L, K, n_regions + 1).copy(),
                            n_regions=n_regions, sample_size=sample_size)

    trees = []
    for space in range(proj_L):
        max_size, n_slots = reader.unpack(struct.Struct('<II'), "tree header")
        symbols = np.zeros((n, K), dtype=np.uint8)
        seen = np.zeros(n, dtype=bool)
        tree = DeTree(symbols, max_size=max_size, n_regions=n_regions, space_index=space)
        for _ in range(n_slots):
            slot = reader.scalar('<I', "root slot")
            tree.root_slots[slot] = _read_node(reader, NodePrefix.for_root_slot(slot, K), K, symbols, seen)
        if not seen.all():
            raise FormatError(f"tree {space} covers {int(seen.sum())} of {n} points")
        trees.append(tree.freeze(table.rows(space)))

    stored = reader.scalar('<Q', "fingerprint")
    if reader.offset != len(data):
        raise FormatError(f"{len(data) - reader.offset} trailing bytes after the fingerprint")
    actual = dataset_fingerprint(dataset)
    if stored != actual:
        raise FingerprintMismatchError(f"dataset fingerprint {actual:016x} does not match index {stored:016x}")

    return DetIndex(params=params, projector=projector, table=table, trees=trees,
                    dataset=dataset, fingerprint=stored, seed=seed)


def save_index(index: DetIndex, path: Union[str, Path]) -> int:
    """Write the index; returns the number of bytes written"""
    data = serialize_index(index)
    Path(path).write_bytes(data)
    logger.info(f"Saved index ({len(data)} bytes) to {path}")
    return len(data)


def load_index(path: Union[str, Path], dataset) -> DetIndex:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"index file not found: {path}")
    index = deserialize_index(path.read_bytes(), dataset)
    logger.info(f"Loaded {'DET-ONLY' if index.det_only else 'DET-LSH'} index from {path}")
    return index


def index_nbytes(index: DetIndex) -> int:
    """Size of the serialized index"""
    return len(serialize_index(index))

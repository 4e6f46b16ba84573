"""
DE-Tree: dynamic encoding tree
Root with 2^K one-bit children, binary refinements of one dimension per split,
leaves of (iSAX symbols, position) entries. Bound math against the breakpoint
rows drives both the exact and the priority-queue range queries.
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple

import numpy as np

from src.core.errors import InvalidArgumentError, UnsplittableLeafError
from src.core.input_validator import InputValidator

logger = logging.getLogger(__name__)

# positions -> stop?  (True ends the traversal)
CandidateSink = Callable[[np.ndarray], bool]
# positions -> (m, K) projected coordinates
ProjectedLookup = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NodePrefix:
    """Per dimension: bits of the symbol fixed so far and their value"""
    bits_used: np.ndarray
    value: np.ndarray

    @classmethod
    def for_root_slot(cls, slot: int, K: int) -> 'NodePrefix':
        # dimension 0 is the most significant bit of the slot index
        bits = (slot >> (K - 1 - np.arange(K))) & 1
        return cls(bits_used=np.ones(K, dtype=np.int64), value=bits.astype(np.int64))

    def child(self, dim: int, bit: int) -> 'NodePrefix':
        bits_used = self.bits_used.copy()
        value = self.value.copy()
        bits_used[dim] += 1
        value[dim] = (value[dim] << 1) | bit
        return NodePrefix(bits_used=bits_used, value=value)

    def label(self, symbol_bits: int) -> str:
        parts = []
        for b, v in zip(self.bits_used.tolist(), self.value.tolist()):
            text = format(v, f'0{b}b') if b else ''
            parts.append(text + ('*' if b < symbol_bits else ''))
        return '[' + ','.join(parts) + ']'


@dataclass(eq=False)
class DeTreeNode:
    prefix: NodePrefix
    split_dim: int = -1
    children: Optional[Tuple['DeTreeNode', 'DeTreeNode']] = None
    positions: list = field(default_factory=list)
    node_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def kind(self) -> str:
        return 'leaf' if self.is_leaf else 'internal'

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class LeafEntry:
    symbols: np.ndarray
    position: int


def _interval_arrays(bits_used: np.ndarray, value: np.ndarray, rows: np.ndarray):
    """Vectorized node intervals; bits_used/value have trailing dimension K"""
    n_regions = rows.shape[1] - 1
    symbol_bits = n_regions.bit_length() - 1
    shift = symbol_bits - bits_used
    region_lo = value << shift
    region_hi = ((value + 1) << shift) - 1
    dims = np.arange(rows.shape[0])
    lo = rows[dims, region_lo]
    hi = rows[dims, region_hi + 1]
    lo = np.where(region_lo == 0, -np.inf, lo)
    hi = np.where(region_hi == n_regions - 1, np.inf, hi)
    return lo, hi


def _box_mindist(q: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    penalty = np.maximum(np.maximum(lo - q, q - hi), 0.0)
    return np.sqrt(np.sum(penalty * penalty, axis=-1))


def _box_maxdist(q: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    far = np.maximum(np.abs(q - lo), np.abs(q - hi))
    return np.sqrt(np.sum(far * far, axis=-1))


def node_interval(node: DeTreeNode, dim: int, rows: np.ndarray) -> Tuple[float, float]:
    """(lo, hi) covered by the node prefix in one dimension; outer edges are infinite"""
    if not 0 <= dim < rows.shape[0]:
        raise InvalidArgumentError(f"dimension {dim} outside [0, {rows.shape[0]})")
    lo, hi = _interval_arrays(node.prefix.bits_used, node.prefix.value, rows)
    return float(lo[dim]), float(hi[dim])


def mindist(q_proj: np.ndarray, node: DeTreeNode, rows: np.ndarray) -> float:
    lo, hi = _interval_arrays(node.prefix.bits_used, node.prefix.value, rows)
    return float(_box_mindist(np.asarray(q_proj, dtype=np.float64), lo, hi))


def maxdist(q_proj: np.ndarray, node: DeTreeNode, rows: np.ndarray) -> float:
    lo, hi = _interval_arrays(node.prefix.bits_used, node.prefix.value, rows)
    return float(_box_maxdist(np.asarray(q_proj, dtype=np.float64), lo, hi))


def split_leaf(leaf: DeTreeNode, symbols: np.ndarray, symbol_bits: int = 8) -> DeTreeNode:
    """
    Turn a leaf into an internal node over the dimension whose next bit divides
    its entries most evenly (lowest dimension on ties). The node is modified in
    place and returned.
    """
    if not leaf.is_leaf:
        raise InvalidArgumentError("only leaves can be split")
    splittable = leaf.prefix.bits_used < symbol_bits
    if not splittable.any():
        raise UnsplittableLeafError(f"leaf {leaf.prefix.label(symbol_bits)} has no bits left")

    positions = np.asarray(leaf.positions, dtype=np.int64)
    entry_symbols = symbols[positions].astype(np.int64)
    shift = np.where(splittable, symbol_bits - leaf.prefix.bits_used - 1, 0)
    next_bits = (entry_symbols >> shift) & 1
    ones = next_bits.sum(axis=0)
    balance = np.abs(len(positions) - 2 * ones)
    balance = np.where(splittable, balance, np.iinfo(np.int64).max)
    dim = int(np.argmin(balance))

    goes_right = next_bits[:, dim].astype(bool)
    left = DeTreeNode(prefix=leaf.prefix.child(dim, 0), positions=positions[~goes_right].tolist())
    right = DeTreeNode(prefix=leaf.prefix.child(dim, 1), positions=positions[goes_right].tolist())
    leaf.split_dim = dim
    leaf.children = (left, right)
    leaf.positions = []
    return leaf


class DeTree:
    """One DE-Tree over the symbols of a single projected space"""

    def __init__(self, symbols: np.ndarray, max_size: int, n_regions: int = 256, space_index: int = 0):
        self.symbols = symbols
        self.n, self.K = symbols.shape
        self.max_size = max_size
        self.n_regions = n_regions
        self.symbol_bits = n_regions.bit_length() - 1
        self.space_index = space_index
        self.root_slots: Dict[int, DeTreeNode] = {}
        self.rows: Optional[np.ndarray] = None
        self.overflow_leaves = 0
        self._nodes: List[DeTreeNode] = []

    # -- construction -------------------------------------------------------

    def root_slot(self, symbol_row: np.ndarray) -> int:
        top = (symbol_row.astype(np.int64) >> (self.symbol_bits - 1)) & 1
        return int(np.dot(top, 1 << (self.K - 1 - np.arange(self.K))))

    def _descend(self, node: DeTreeNode, symbol_row: np.ndarray) -> DeTreeNode:
        while not node.is_leaf:
            dim = node.split_dim
            shift = self.symbol_bits - int(node.prefix.bits_used[dim]) - 1
            node = node.children[(int(symbol_row[dim]) >> shift) & 1]
        return node

    def insert(self, position: int, slot: Optional[int] = None) -> None:
        symbol_row = self.symbols[position]
        if slot is None:
            slot = self.root_slot(symbol_row)
        node = self.root_slots.get(slot)
        if node is None:
            node = DeTreeNode(prefix=NodePrefix.for_root_slot(slot, self.K))
            self.root_slots[slot] = node
        target = self._descend(node, symbol_row)
        while len(target) >= self.max_size:
            try:
                split_leaf(target, self.symbols, self.symbol_bits)
            except UnsplittableLeafError:
                break
            target = self._descend(target, symbol_row)
        target.positions.append(position)

    # -- traversal ----------------------------------------------------------

    def iter_nodes(self) -> Iterator[DeTreeNode]:
        """Preorder: root children by slot index, then left before right"""
        for slot in sorted(self.root_slots):
            stack = [self.root_slots[slot]]
            while stack:
                node = stack.pop()
                yield node
                if not node.is_leaf:
                    stack.append(node.children[1])
                    stack.append(node.children[0])

    def leaves(self) -> List[DeTreeNode]:
        return [node for node in self.iter_nodes() if node.is_leaf]

    def leaf_entries(self, leaf: DeTreeNode) -> List[LeafEntry]:
        return [LeafEntry(symbols=self.symbols[p], position=int(p)) for p in leaf.positions]

    def ancestors(self, node: DeTreeNode) -> List[DeTreeNode]:
        """Root child down to the parent of node"""
        chain = []
        for root in self.root_slots.values():
            path = self._path_to(root, node)
            if path is not None:
                chain = path[:-1]
                break
        return chain

    def _path_to(self, current: DeTreeNode, target: DeTreeNode) -> Optional[List[DeTreeNode]]:
        if current is target:
            return [current]
        if current.is_leaf:
            return None
        for child in current.children:
            path = self._path_to(child, target)
            if path is not None:
                return [current] + path
        return None

    # -- bounds -------------------------------------------------------------

    def freeze(self, rows: np.ndarray) -> 'DeTree':
        """Number nodes in preorder and precompute every node's interval box"""
        if rows.shape != (self.K, self.n_regions + 1):
            raise InvalidArgumentError(
                f"breakpoint rows have shape {rows.shape}, expected {(self.K, self.n_regions + 1)}"
            )
        self.rows = rows
        self._nodes = list(self.iter_nodes())
        for node_id, node in enumerate(self._nodes):
            node.node_id = node_id

        bits_used = np.stack([node.prefix.bits_used for node in self._nodes])
        values = np.stack([node.prefix.value for node in self._nodes])
        self._lo, self._hi = _interval_arrays(bits_used, values, rows)

        self._is_leaf = np.array([node.is_leaf for node in self._nodes], dtype=bool)
        self._children = np.full((len(self._nodes), 2), -1, dtype=np.int64)
        for node in self._nodes:
            if not node.is_leaf:
                self._children[node.node_id] = (node.children[0].node_id, node.children[1].node_id)
        self._root_ids = [self.root_slots[slot].node_id for slot in sorted(self.root_slots)]

        leaf_ids = np.flatnonzero(self._is_leaf)
        sizes = np.array([len(self._nodes[i]) for i in leaf_ids], dtype=np.int64)
        self._leaf_ids = leaf_ids
        self._leaf_offsets = np.concatenate([[0], np.cumsum(sizes)])
        self._leaf_positions = np.concatenate(
            [np.asarray(self._nodes[i].positions, dtype=np.int64) for i in leaf_ids]
        ) if len(leaf_ids) else np.empty(0, dtype=np.int64)
        self._leaf_slot = np.full(len(self._nodes), -1, dtype=np.int64)
        self._leaf_slot[leaf_ids] = np.arange(len(leaf_ids))
        self._leaf_lo = self._lo[leaf_ids]
        self._leaf_hi = self._hi[leaf_ids]

        self.overflow_leaves = int(np.sum(sizes > self.max_size))
        if self.overflow_leaves:
            logger.warning(f"Tree {self.space_index}: {self.overflow_leaves} unsplittable overflow leaves")
        return self

    @property
    def frozen(self) -> bool:
        return self.rows is not None

    def _require_frozen(self):
        if not self.frozen:
            raise InvalidArgumentError("tree has no breakpoint rows attached; call freeze() first")

    @property
    def leaf_count(self) -> int:
        self._require_frozen()
        return len(self._leaf_ids)

    def node(self, node_id: int) -> DeTreeNode:
        return self._nodes[node_id]

    def node_bounds(self, node_id: int) -> Tuple[np.ndarray, np.ndarray]:
        self._require_frozen()
        return self._lo[node_id], self._hi[node_id]

    def leaf_positions(self, leaf_index: int) -> np.ndarray:
        """Positions of the leaf_index-th leaf in preorder"""
        return self._leaf_positions[self._leaf_offsets[leaf_index]:self._leaf_offsets[leaf_index + 1]]

    def node_mindists(self, q_proj: np.ndarray) -> np.ndarray:
        self._require_frozen()
        return _box_mindist(q_proj, self._lo, self._hi)

    def leaf_mindists(self, q_proj: np.ndarray) -> np.ndarray:
        self._require_frozen()
        return _box_mindist(q_proj, self._leaf_lo, self._leaf_hi)

    def leaf_maxdists(self, q_proj: np.ndarray) -> np.ndarray:
        self._require_frozen()
        return _box_maxdist(q_proj, self._leaf_lo, self._leaf_hi)

    def positions_within(self, q_proj: np.ndarray, radius: float) -> np.ndarray:
        """Every position held by a leaf with mindist <= radius (full drain, no order)"""
        mask = self.leaf_mindists(q_proj) <= radius
        return self._leaf_positions[np.repeat(mask, np.diff(self._leaf_offsets))]


def build_tree(symbols: np.ndarray, K: int, max_size: int = 128, n_regions: int = 256,
               rows: Optional[np.ndarray] = None, space_index: int = 0) -> DeTree:
    """
    Insert every row of an (n, K) symbol matrix, splitting full leaves before
    each insertion. Passing the space's breakpoint rows freezes the tree for
    queries.
    """
    K = InputValidator.projected_dim(K)
    max_size = InputValidator.positive_int(max_size, "max_size")
    n_regions = InputValidator.regions(n_regions)
    symbols = np.asarray(symbols)
    if symbols.ndim != 2 or symbols.shape[1] != K:
        raise InvalidArgumentError(f"symbols have shape {symbols.shape}, expected (n, {K})")
    if symbols.size and int(symbols.max()) >= n_regions:
        raise InvalidArgumentError(f"symbol value {int(symbols.max())} >= N_r={n_regions}")

    tree = DeTree(symbols.astype(np.uint8, copy=False), max_size=max_size,
                  n_regions=n_regions, space_index=space_index)
    top = (symbols.astype(np.int64) >> (tree.symbol_bits - 1)) & 1
    slots = top @ (1 << (K - 1 - np.arange(K)))
    for position, slot in enumerate(slots.tolist()):
        tree.insert(position, slot)

    if rows is not None:
        tree.freeze(rows)
    logger.debug(f"Built tree {space_index}: {len(tree.root_slots)} root slots in use")
    return tree


def range_query_exact(tree: DeTree, q_proj: np.ndarray, radius: float,
                      projected_lookup: ProjectedLookup) -> Set[int]:
    """
    All positions whose projected distance to q_proj is <= radius.

    Subtrees with mindist > radius are pruned, leaves with maxdist <= radius
    are taken whole, the rest are checked point by point via projected_lookup.
    """
    radius = InputValidator.non_negative_real(radius, "radius")
    q_proj = np.asarray(q_proj, dtype=np.float64)
    node_min = tree.node_mindists(q_proj)
    found = []
    stack = list(reversed(tree._root_ids))
    while stack:
        node_id = stack.pop()
        if node_min[node_id] > radius:
            continue
        if tree._is_leaf[node_id]:
            leaf_index = tree._leaf_slot[node_id]
            positions = tree.leaf_positions(leaf_index)
            if positions.size == 0:
                continue
            lo, hi = tree._lo[node_id], tree._hi[node_id]
            if _box_maxdist(q_proj, lo, hi) <= radius:
                found.append(positions)
            else:
                projected = np.asarray(projected_lookup(positions), dtype=np.float64)
                diff = projected - q_proj
                dist = np.sqrt(np.sum(diff * diff, axis=1))
                found.append(positions[dist <= radius])
        else:
            left, right = tree._children[node_id]
            stack.append(right)
            stack.append(left)
    if not found:
        return set()
    return set(np.concatenate(found).tolist())


def range_query_optimized(tree: DeTree, q_proj: np.ndarray, radius: float,
                          sink: CandidateSink) -> bool:
    """
    Emit whole leaves with mindist <= radius in ascending mindist order.
    Returns True when the sink asked to stop.
    """
    radius = InputValidator.non_negative_real(radius, "radius")
    leaf_min = tree.leaf_mindists(np.asarray(q_proj, dtype=np.float64))
    selected = np.flatnonzero(leaf_min <= radius)
    queue = list(zip(leaf_min[selected].tolist(), selected.tolist()))
    heapq.heapify(queue)
    while queue:
        _, leaf_index = heapq.heappop(queue)
        positions = tree.leaf_positions(leaf_index)
        if positions.size and sink(positions):
            return True
    return False

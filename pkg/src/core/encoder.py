"""
Dynamic encoding
Sample-based breakpoint selection (QuickSelect + divide-and-conquer) and
iSAX symbol encoding of every projected coordinate
"""

import math
import logging
from dataclasses import dataclass, field

import numpy as np

from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator
from src.core.projection import ProjectedDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BreakpointTable:
    """boundaries[i, j] is the ascending row B_ij of N_r + 1 breakpoints"""
    boundaries: np.ndarray = field(repr=False)
    n_regions: int
    sample_size: int

    def __post_init__(self):
        if self.boundaries.ndim != 3 or self.boundaries.shape[2] != self.n_regions + 1:
            raise InvalidArgumentError(
                f"breakpoint table shape {self.boundaries.shape} does not hold {self.n_regions + 1} edges per row"
            )
        self.boundaries.setflags(write=False)

    @property
    def L(self) -> int:
        return self.boundaries.shape[0]

    @property
    def K(self) -> int:
        return self.boundaries.shape[1]

    def rows(self, space: int) -> np.ndarray:
        """(K, N_r + 1) breakpoint rows for one projected space"""
        return self.boundaries[space]


@dataclass(frozen=True)
class EncodedDataset:
    """symbols[i, z, j] in [0, N_r - 1]"""
    symbols: np.ndarray = field(repr=False)
    n_regions: int

    @property
    def L(self) -> int:
        return self.symbols.shape[0]

    @property
    def n(self) -> int:
        return self.symbols.shape[1]

    @property
    def K(self) -> int:
        return self.symbols.shape[2]


def sample_size_for(n: int, n_regions: int, sample_fraction: float) -> int:
    """n_s = max(ceil(fraction * n), N_r); must not exceed n"""
    n_s = max(math.ceil(sample_fraction * n), n_regions)
    if n_s > n:
        raise InvalidArgumentError(
            f"sample too small for region count: n={n} points cannot supply {n_regions} regions"
        )
    return n_s


def row_breakpoints(sample: np.ndarray, n_regions: int) -> np.ndarray:
    """
    Breakpoints of one row sample via rounds of QuickSelect.

    Round z partitions each of the 2^(z-1) segments left by the previous round
    around its middle target, so after log2(N_r) rounds the order statistics
    C_sorted[f*m - 1] (f = floor(n_s / N_r), m = 1..N_r-1) sit at their sorted
    positions. The array is reordered in place.
    """
    n_s = sample.shape[0]
    f = n_s // n_regions
    if f < 1:
        raise InvalidArgumentError(f"sample of {n_s} values cannot supply {n_regions} regions")

    breakpoints = np.empty(n_regions + 1, dtype=np.float64)
    # (low ordinal, high ordinal, segment start, segment end), ordinals exclusive
    work = [(0, n_regions, 0, n_s)]
    while work:
        lo, hi, start, end = work.pop()
        if hi - lo < 2:
            continue
        mid = (lo + hi) // 2
        target = f * mid - 1
        sample[start:end].partition(target - start)
        breakpoints[mid] = sample[target]
        work.append((mid, hi, target + 1, end))
        work.append((lo, mid, start, target))

    breakpoints[0] = sample[:f].min()
    breakpoints[n_regions] = sample[f * (n_regions - 1):].max()
    return breakpoints


def row_breakpoints_sorted(sample: np.ndarray, n_regions: int) -> np.ndarray:
    """Complete-sorting scheme: B(z) = C_sorted(floor(n_s/N_r) * (z - 1))"""
    n_s = sample.shape[0]
    f = n_s // n_regions
    if f < 1:
        raise InvalidArgumentError(f"sample of {n_s} values cannot supply {n_regions} regions")
    ordered = np.sort(sample)
    breakpoints = np.empty(n_regions + 1, dtype=np.float64)
    breakpoints[1:n_regions] = ordered[f * np.arange(1, n_regions) - 1]
    breakpoints[0] = ordered[0]
    breakpoints[n_regions] = ordered[-1]
    return breakpoints


def _select(projected: ProjectedDataset, n_regions: int, sample_fraction: float,
            seed: int, row_fn) -> BreakpointTable:
    n_regions = InputValidator.regions(n_regions)
    sample_fraction = InputValidator.probability(sample_fraction, "sample_fraction")
    values = projected.values
    L, n, K = values.shape
    n_s = sample_size_for(n, n_regions, sample_fraction)

    rng = np.random.default_rng(seed)
    boundaries = np.empty((L, K, n_regions + 1), dtype=np.float64)
    for i in range(L):
        # one shuffled index sample per space, shared by its K rows
        picked = rng.permutation(n)[:n_s]
        gathered = values[i, picked, :]
        for j in range(K):
            row_sample = np.ascontiguousarray(gathered[:, j])
            boundaries[i, j] = row_fn(row_sample, n_regions)

    logger.debug(f"Selected breakpoints for L={L} K={K} N_r={n_regions} from n_s={n_s}")
    return BreakpointTable(boundaries=boundaries, n_regions=n_regions, sample_size=n_s)


def select_breakpoints(projected: ProjectedDataset, n_regions: int = 256,
                       sample_fraction: float = 0.1, seed: int = 0) -> BreakpointTable:
    return _select(projected, n_regions, sample_fraction, seed, row_breakpoints)


def select_breakpoints_sorted(projected: ProjectedDataset, n_regions: int = 256,
                              sample_fraction: float = 0.1, seed: int = 0) -> BreakpointTable:
    """Baseline with the same sampling, full sort per row"""
    return _select(projected, n_regions, sample_fraction, seed, row_breakpoints_sorted)


def locate_region(value, row: np.ndarray, n_regions: int):
    """
    Zero-based region b with B(b) <= value <= B(b+1).

    Ties on a boundary go to the lower region; values outside the sampled
    range clamp to region 0 or N_r - 1. Works elementwise on arrays.
    """
    index = np.searchsorted(row, value, side='left') - 1
    clipped = np.clip(index, 0, n_regions - 1)
    if np.ndim(clipped) == 0:
        return int(clipped)
    return clipped


def encode_dataset(projected: ProjectedDataset, table: BreakpointTable) -> EncodedDataset:
    values = projected.values
    L, n, K = values.shape
    if (table.L, table.K) != (L, K):
        raise InvalidArgumentError(
            f"breakpoint table covers (L={table.L}, K={table.K}) but projections are (L={L}, K={K})"
        )
    symbols = np.empty((L, n, K), dtype=np.uint8)
    for i in range(L):
        for j in range(K):
            symbols[i, :, j] = locate_region(values[i, :, j], table.boundaries[i, j], table.n_regions)
    return EncodedDataset(symbols=symbols, n_regions=table.n_regions)

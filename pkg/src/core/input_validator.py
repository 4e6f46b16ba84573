"""
Input Validation Module
Checks scalar parameters, vectors and matrices before they reach the index
"""

import math
import logging
from typing import Optional

import numpy as np

from src.core.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class InputValidator:
    """Argument validation shared by every DET-LSH operation"""

    # Root fanout is 2^K slots, anything above this is not materializable
    MAX_PROJECTED_DIM = 24

    # 8-bit iSAX alphabet
    MAX_REGIONS = 256

    @classmethod
    def positive_int(cls, value, name: str) -> int:
        """Validate a strictly positive integer"""
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise InvalidArgumentError(f"{name} must be an integer, got {type(value).__name__}")
        if value < 1:
            raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
        return int(value)

    @classmethod
    def probability(cls, value: float, name: str, allow_one: bool = True) -> float:
        """Validate a level in (0, 1] (or (0, 1) when allow_one is False)"""
        value = float(value)
        upper_ok = value <= 1.0 if allow_one else value < 1.0
        if not (value > 0.0 and upper_ok) or math.isnan(value):
            bound = "(0, 1]" if allow_one else "(0, 1)"
            raise InvalidArgumentError(f"{name} must lie in {bound}, got {value}")
        return value

    @classmethod
    def positive_real(cls, value: float, name: str, strict_lower: float = 0.0) -> float:
        """Validate a finite real strictly greater than strict_lower"""
        value = float(value)
        if not math.isfinite(value) or value <= strict_lower:
            raise InvalidArgumentError(f"{name} must be a finite value > {strict_lower}, got {value}")
        return value

    @classmethod
    def non_negative_real(cls, value: float, name: str) -> float:
        value = float(value)
        if math.isnan(value) or value < 0.0:
            raise InvalidArgumentError(f"{name} must be >= 0, got {value}")
        return value

    @classmethod
    def regions(cls, n_regions: int) -> int:
        """Validate N_r: a power of two in [2, 256]"""
        n_regions = cls.positive_int(n_regions, "n_regions")
        if n_regions < 2 or n_regions > cls.MAX_REGIONS or n_regions & (n_regions - 1):
            raise InvalidArgumentError(
                f"n_regions must be a power of two in [2, {cls.MAX_REGIONS}], got {n_regions}"
            )
        return n_regions

    @classmethod
    def projected_dim(cls, K: int) -> int:
        K = cls.positive_int(K, "K")
        if K > cls.MAX_PROJECTED_DIM:
            raise InvalidArgumentError(
                f"K={K} exceeds {cls.MAX_PROJECTED_DIM}: root fanout 2^K is not materializable"
            )
        return K

    @classmethod
    def vector(cls, point, d: Optional[int] = None, name: str = "point") -> np.ndarray:
        """Coerce to a 1-D float64 array, optionally checking its length"""
        arr = np.asarray(point, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {arr.shape}")
        if d is not None and arr.shape[0] != d:
            raise InvalidArgumentError(f"{name} has {arr.shape[0]} entries, expected {d}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"{name} contains non-finite values")
        return arr

    @classmethod
    def matrix(cls, data, d: Optional[int] = None, name: str = "dataset") -> np.ndarray:
        """Check a non-empty 2-D matrix; the dtype is left untouched"""
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise InvalidArgumentError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise InvalidArgumentError(f"{name} is empty")
        if d is not None and arr.shape[1] != d:
            raise InvalidArgumentError(f"{name} rows have width {arr.shape[1]}, expected {d}")
        return arr

    @classmethod
    def top_k(cls, k: int, n: int) -> int:
        k = cls.positive_int(k, "k")
        if k > n:
            raise InvalidArgumentError(f"k={k} exceeds dataset cardinality n={n}")
        return k

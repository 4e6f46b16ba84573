"""
Theory-driven DET-LSH parameters
alpha1, alpha2, epsilon and beta from (K, c, L)
"""

import math
import logging
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from src.core.chi2 import chi2_quantile, chi2_upper_tail
from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator

logger = logging.getLogger(__name__)


class DerivedParams(NamedTuple):
    alpha1: float
    alpha2: float
    epsilon: float
    beta: float


def derive_params(K: int, c: float, L: int) -> DerivedParams:
    """
    alpha1 = exp(-1/L), epsilon^2 = chi2_{alpha1}(K) = c^2 * chi2_{alpha2}(K),
    beta = 2 * (1 - alpha2^L).
    """
    K = InputValidator.positive_int(K, "K")
    L = InputValidator.positive_int(L, "L")
    c = float(c)
    if not c > 1.0 or not math.isfinite(c):
        raise InvalidArgumentError(f"approximation ratio c must be > 1, got {c}")

    alpha1 = math.exp(-1.0 / L)
    epsilon_sq = chi2_quantile(alpha1, K)
    alpha2 = chi2_upper_tail(epsilon_sq / (c * c), K)
    beta = 2.0 * (1.0 - alpha2 ** L)
    return DerivedParams(alpha1=alpha1, alpha2=alpha2, epsilon=math.sqrt(epsilon_sq), beta=beta)


@dataclass(frozen=True)
class LshParams:
    """Immutable parameter set shared by the build and the queries"""
    K: int
    L: int
    c: float
    beta: float
    epsilon: float
    alpha1: float
    alpha2: float
    n_regions: int = 256
    sample_fraction: float = 0.1
    leaf_capacity: int = 128
    r_min: Optional[float] = None
    k: int = 50

    def __post_init__(self):
        InputValidator.projected_dim(self.K)
        InputValidator.positive_int(self.L, "L")
        InputValidator.positive_real(self.c, "c", strict_lower=1.0)
        InputValidator.probability(self.beta, "beta", allow_one=False)
        InputValidator.positive_real(self.epsilon, "epsilon")
        InputValidator.probability(self.alpha1, "alpha1", allow_one=False)
        InputValidator.probability(self.alpha2, "alpha2")
        InputValidator.regions(self.n_regions)
        InputValidator.probability(self.sample_fraction, "sample_fraction")
        InputValidator.positive_int(self.leaf_capacity, "leaf_capacity")
        InputValidator.positive_int(self.k, "k")
        if self.r_min is not None:
            InputValidator.positive_real(self.r_min, "r_min")

    @classmethod
    def create(cls,
               K: int = 16,
               L: int = 4,
               c: float = 1.5,
               beta: Optional[float] = None,
               n_regions: int = 256,
               sample_fraction: float = 0.1,
               leaf_capacity: int = 128,
               r_min: Optional[float] = None,
               k: int = 50) -> 'LshParams':
        """Derive alpha1/alpha2/epsilon/beta; an explicit beta overrides the derived one"""
        derived = derive_params(K, c, L)
        if beta is None:
            if derived.beta >= 1.0:
                raise InvalidArgumentError(
                    f"derived beta {derived.beta:.4f} >= 1 for (K={K}, c={c}, L={L}): the candidate budget "
                    f"would exceed the dataset; raise c or K, lower L, or pass beta explicitly"
                )
            beta = derived.beta
        else:
            logger.debug(f"beta override {beta} (derived {derived.beta:.6f})")
        return cls(K=K, L=L, c=c, beta=beta, epsilon=derived.epsilon,
                   alpha1=derived.alpha1, alpha2=derived.alpha2,
                   n_regions=n_regions, sample_fraction=sample_fraction,
                   leaf_capacity=leaf_capacity, r_min=r_min, k=k)

    @classmethod
    def benchmark_profile(cls, **overrides) -> 'LshParams':
        """Experiment defaults: K=16, L=4, c=1.5, beta=0.1"""
        settings = {'K': 16, 'L': 4, 'c': 1.5, 'beta': 0.1}
        settings.update(overrides)
        return cls.create(**settings)

    def with_updates(self, **changes) -> 'LshParams':
        return replace(self, **changes)

    def candidate_budget(self, n: int, k: int) -> int:
        """ceil(beta*n + k), capped at n"""
        # tolerance keeps an exact integer product from rounding up
        budget = math.ceil(self.beta * n + k - 1e-9)
        return max(1, min(budget, n))

    @property
    def symbol_bits(self) -> int:
        return self.n_regions.bit_length() - 1

"""
Settings Management
Index defaults and runtime options from environment variables, benchmark runs from JSON
"""

import os
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from src.core.errors import InvalidArgumentError
from src.core.params import LshParams

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _optional_float(name: str) -> Optional[float]:
    value = os.getenv(name)
    return float(value) if value not in (None, '') else None


@dataclass
class IndexSettings:
    """Index build defaults from environment"""
    K: int = 16
    L: int = 4
    c: float = 1.5
    beta: Optional[float] = None
    n_regions: int = 256
    leaf_capacity: int = 128
    sample_fraction: float = 0.1
    seed: int = 42
    k: int = 50

    @classmethod
    def from_env(cls) -> 'IndexSettings':
        """Load index defaults from DETLSH_* variables"""
        return cls(
            K=int(os.getenv('DETLSH_K', 16)),
            L=int(os.getenv('DETLSH_L', 4)),
            c=float(os.getenv('DETLSH_C', 1.5)),
            beta=_optional_float('DETLSH_BETA'),
            n_regions=int(os.getenv('DETLSH_REGIONS', 256)),
            leaf_capacity=int(os.getenv('DETLSH_LEAF', 128)),
            sample_fraction=float(os.getenv('DETLSH_SAMPLE', 0.1)),
            seed=int(os.getenv('DETLSH_SEED', 42)),
            k=int(os.getenv('DETLSH_K_NN', 50))
        )

    def to_params(self, **overrides) -> LshParams:
        """LshParams from these settings; non-None overrides win"""
        settings = {
            'K': self.K, 'L': self.L, 'c': self.c, 'beta': self.beta,
            'n_regions': self.n_regions, 'sample_fraction': self.sample_fraction,
            'leaf_capacity': self.leaf_capacity, 'k': self.k,
        }
        settings.update({key: value for key, value in overrides.items() if value is not None})
        return LshParams.create(**settings)


@dataclass
class RuntimeSettings:
    """Logging, cache and worker options from environment"""
    log_level: str = 'INFO'
    log_file: Optional[str] = None
    cache_dir: str = '.detlsh_cache'
    workers: int = 1

    @classmethod
    def from_env(cls) -> 'RuntimeSettings':
        return cls(
            log_level=os.getenv('DETLSH_LOG_LEVEL', 'INFO').upper(),
            log_file=os.getenv('DETLSH_LOG_FILE') or None,
            cache_dir=os.getenv('DETLSH_CACHE_DIR', '.detlsh_cache'),
            workers=int(os.getenv('DETLSH_WORKERS', 1))
        )


@dataclass
class SyntheticSpec:
    n: int = 100_000
    d: int = 128
    clusters: int = 10
    spread: float = 1.0
    seed: int = 42


@dataclass
class BenchmarkConfig:
    """One benchmark run as described by a JSON config file"""
    dataset: str = 'synthetic'
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    queries: Optional[str] = None
    holdout: int = 100
    k: int = 50
    methods: List[str] = field(default_factory=lambda: ['det-lsh', 'det-only', 'brute-force'])
    params: Dict[str, Any] = field(default_factory=dict)
    beta_sweep: List[float] = field(default_factory=list)
    workers: int = 1
    seed: int = 42
    csv: Optional[str] = None
    cache_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BenchmarkConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown benchmark config keys: {sorted(unknown)}")
        data = dict(data)
        if 'synthetic' in data:
            data['synthetic'] = SyntheticSpec(**data['synthetic'])
        return cls(**data)

    @classmethod
    def from_file(cls, filepath: Union[str, Path]) -> 'BenchmarkConfig':
        """Load a benchmark config from JSON"""
        filepath = Path(filepath)
        if not filepath.exists():
            raise FileNotFoundError(f"benchmark config not found: {filepath}")
        with open(filepath, 'r') as f:
            data = json.load(f)
        return cls.from_dict(data)


# Singleton instances
_index_settings = None
_runtime_settings = None


def get_index_settings() -> IndexSettings:
    """Get index settings singleton"""
    global _index_settings
    if _index_settings is None:
        _index_settings = IndexSettings.from_env()
    return _index_settings


def get_runtime_settings() -> RuntimeSettings:
    """Get runtime settings singleton"""
    global _runtime_settings
    if _runtime_settings is None:
        _runtime_settings = RuntimeSettings.from_env()
    return _runtime_settings


def configure_logging(level: str = 'INFO', log_file: Optional[str] = None) -> None:
    """Install the root handlers once for a command-line run"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )

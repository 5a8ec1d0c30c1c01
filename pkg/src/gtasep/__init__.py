"""Exact results, matrix-product checks, brute-force oracle and Monte Carlo for the
generalized TASEP on a ring."""

from .core import (
    ClusterDecomposition,
    DomainError,
    GtasepError,
    ModelParams,
    RepresentationError,
    RingConfig,
    cluster_count,
    decompose,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterDecomposition",
    "DomainError",
    "GtasepError",
    "ModelParams",
    "RepresentationError",
    "RingConfig",
    "cluster_count",
    "decompose",
    "__version__",
]

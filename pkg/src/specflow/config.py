"""Configuration module for specflow.

Public API for configuration access. Resolution logic lives in config_resolver.py.

Resolution order (highest → lowest priority):
  explicit argument → environment → hardcoded
"""

__all__ = [
    "HARDCODED_DEFAULTS",
    "get_max_refine",
    "get_structural_tol",
    "get_eigen_tol",
    "get_rank_tol",
    "get_circle_samples",
    "get_max_margin",
    "get_max_concurrency",
]

from specflow.config_resolver import (
    HARDCODED_DEFAULTS as HARDCODED_DEFAULTS,
)
from specflow.config_resolver import (
    _get_merged_defaults as _get_merged_defaults,
)
from specflow.config_resolver import (
    _merge_defaults as _merge_defaults,
)
from specflow.config_resolver import (
    _read_env_defaults as _read_env_defaults,
)


def get_max_refine() -> int:
    """Get the bisection cap for spectral flow and winding refinement.

    Returns:
        Maximum number of bisection levels per segment (default: 14)

    Raises:
        ConfigurationError: If env var value is not a valid positive integer

    Environment Variable:
        SPECFLOW_MAX_REFINE: Bisection cap
    """
    return _get_merged_defaults().max_refine  # type: ignore[return-value]


def get_structural_tol() -> float:
    """Get the tolerance for structural identities (unitarity, symmetry flags).

    Environment Variable:
        SPECFLOW_STRUCTURAL_TOL (default: 1e-10)
    """
    return _get_merged_defaults().structural_tol  # type: ignore[return-value]


def get_eigen_tol() -> float:
    """Get the eigenvalue convergence tolerance.

    Environment Variable:
        SPECFLOW_EIGEN_TOL (default: 1e-9)
    """
    return _get_merged_defaults().eigen_tol  # type: ignore[return-value]


def get_rank_tol() -> float:
    """Get the tolerance for rank and kernel decisions.

    Environment Variable:
        SPECFLOW_RANK_TOL (default: 1e-8)
    """
    return _get_merged_defaults().rank_tol  # type: ignore[return-value]


def get_circle_samples() -> int:
    """Get the number of unit-circle points used to sample background symbols.

    Environment Variable:
        SPECFLOW_CIRCLE_SAMPLES (default: 1024)
    """
    return _get_merged_defaults().circle_samples  # type: ignore[return-value]


def get_max_margin() -> int:
    """Get the largest window margin tried by adaptive enlargement.

    Environment Variable:
        SPECFLOW_MAX_MARGIN (default: 256)
    """
    return _get_merged_defaults().max_margin  # type: ignore[return-value]


def get_max_concurrency() -> int:
    """Get the worker pool size used by corpus verification.

    Environment Variable:
        SPECFLOW_MAX_CONCURRENCY (default: 4)
    """
    return _get_merged_defaults().max_concurrency  # type: ignore[return-value]


"""Configuration resolution engine for specflow.

Contains the merge logic and environment variable parsing.
Public API (getters) stays in config.py.

Resolution order (highest → lowest priority):
  explicit argument → environment → hardcoded
"""

import logging
import math
import os
from typing import Any

from specflow.exceptions import ConfigurationError
from specflow.types import NumericalDefaults

logger = logging.getLogger(__name__)

HARDCODED_DEFAULTS = NumericalDefaults(
    max_refine=14,
    structural_tol=1e-10,
    eigen_tol=1e-9,
    rank_tol=1e-8,
    circle_samples=1024,
    max_margin=256,
    max_concurrency=4,
)


def _merge_defaults(base: NumericalDefaults, *overlays: NumericalDefaults) -> NumericalDefaults:
    """Merge numerical defaults: non-None values from later overlays win."""
    result = base.model_dump()
    for overlay in overlays:
        for field, value in overlay.model_dump().items():
            if value is not None:
                result[field] = value
    return NumericalDefaults(**result)


# ---------------------------------------------------------------------------
# Environment variable parsing
# ---------------------------------------------------------------------------


def _read_env_defaults() -> NumericalDefaults:
    """Read numerical defaults from SPECFLOW_* environment variables.

    Only populates fields where the corresponding env var is set.
    """
    kwargs: dict[str, Any] = {}

    for env_var, field, label in (
        ("SPECFLOW_MAX_REFINE", "max_refine", "max refine"),
        ("SPECFLOW_CIRCLE_SAMPLES", "circle_samples", "circle samples"),
        ("SPECFLOW_MAX_MARGIN", "max_margin", "max margin"),
        ("SPECFLOW_MAX_CONCURRENCY", "max_concurrency", "max concurrency"),
    ):
        raw = os.getenv(env_var)
        if raw is None:
            continue
        try:
            v = int(raw)
        except ValueError:
            raise ConfigurationError(
                f"Invalid {label} value: {raw!r}", config_key=env_var
            ) from None
        if v <= 0:
            raise ConfigurationError(
                f"{label.capitalize()} must be positive, got {v}", config_key=env_var
            )
        kwargs[field] = v

    for env_var, field, label in (
        ("SPECFLOW_STRUCTURAL_TOL", "structural_tol", "structural tolerance"),
        ("SPECFLOW_EIGEN_TOL", "eigen_tol", "eigenvalue tolerance"),
        ("SPECFLOW_RANK_TOL", "rank_tol", "rank tolerance"),
    ):
        raw = os.getenv(env_var)
        if raw is None:
            continue
        try:
            fv = float(raw)
        except ValueError:
            raise ConfigurationError(
                f"Invalid {label} value: {raw!r}", config_key=env_var
            ) from None
        if not math.isfinite(fv):
            raise ConfigurationError(
                f"{label.capitalize()} must be a finite number, got {fv}", config_key=env_var
            )
        if fv <= 0:
            raise ConfigurationError(
                f"{label.capitalize()} must be positive, got {fv}", config_key=env_var
            )
        kwargs[field] = fv

    if kwargs:
        logger.debug("Environment overrides: %s", kwargs)
    return NumericalDefaults(**kwargs)


# ---------------------------------------------------------------------------
# Merged defaults (stateless; reads env fresh each call)
# ---------------------------------------------------------------------------


def _get_merged_defaults() -> NumericalDefaults:
    """Return HARDCODED_DEFAULTS merged with environment overrides.

    Reads env vars fresh each call so tests can patch os.environ.
    """
    return _merge_defaults(HARDCODED_DEFAULTS, _read_env_defaults())

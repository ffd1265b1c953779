# tests/fixtures.py
"""Reusable operator builders and corpus cases for tests."""

from pathlib import Path

import numpy as np

from specflow.operator_core import (
    LatticeOperator,
    finite_operator,
    hermitian_function,
    identity,
)
from specflow.serialization import loads_operators
from specflow.types import CorpusCase, ExpectedValues

# ---------------------------------------------------------------------------
# Reusable test constants
# ---------------------------------------------------------------------------

ATOL = 1e-10
DATA_DIR = Path(__file__).parent / "data"


def load_operator_fixture(name: str) -> dict[str, LatticeOperator]:
    """Named operators from tests/data/<name>.json."""
    return loads_operators((DATA_DIR / f"{name}.json").read_text())


def random_hermitian(seed: int, size: int, scale: float = 1.0) -> np.ndarray:
    """Seeded complex Hermitian matrix with spectral norm ``scale``."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    herm = (raw + raw.conj().T) / 2
    return herm * (scale / np.linalg.norm(herm, 2))


def finite_unitary(
    seed: int, sites: int, lo: int = 0, *, fiber_dim: int = 1, domain="full"
) -> LatticeOperator:
    """1 + finite, unitary: exp(iH) with H supported on ``sites`` sites from ``lo``."""
    herm = finite_operator(
        random_hermitian(seed, sites * fiber_dim, 2.0), lo, fiber_dim=fiber_dim, domain=domain
    )
    return hermitian_function(herm, lambda w: np.exp(1j * w))


def damped(op: LatticeOperator, seed: int, strength: float = 0.5) -> LatticeOperator:
    """op . (1 - strength * rank-one projection), still a contraction of the same index."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    proj = finite_operator(strength * np.outer(v, v.conj()), 0, domain=op.domain)
    return op @ (identity(op.fiber_dim, op.domain) - proj)


def make_case(**overrides) -> CorpusCase:
    """Build a CorpusCase with sensible defaults (T = S, Halmos dilation)."""
    fields = {
        "id": "shift",
        "seed": 7,
        "family": "shift",
        "shift_power": 1,
        "dilation": "halmos",
        "expected": ExpectedValues(index=1, flow=-1),
    }
    fields.update(overrides)
    return CorpusCase(**fields)


def make_odd_case(**overrides) -> CorpusCase:
    """Odd case diag(S, S*) with the U0 dilation unless overridden."""
    fields = {
        "id": "odd",
        "seed": 11,
        "family": "odd",
        "shift_power": 1,
        "symmetry_class": "odd",
        "dilation": "u0",
        "expected": ExpectedValues(index=0, z2=1, flow=0, z2_flow=1),
    }
    fields.update(overrides)
    return CorpusCase(**fields)

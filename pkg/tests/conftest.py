# tests/conftest.py
"""Root conftest: shared fixtures visible to all test suites (unit + integration).

Fixtures here are available in tests/unit/ and tests/integration/ without
any additional imports.
"""

import os

import pytest

from specflow.corpus import build_case
from specflow.operator_core import SymmetryContext, shift, standard_involution


@pytest.fixture(autouse=True)
def _clean_case_cache():
    """Clear the per-case operator cache before and after each test."""
    build_case.cache_clear()
    yield
    build_case.cache_clear()


@pytest.fixture(autouse=True)
def _no_specflow_env(monkeypatch):
    """Drop SPECFLOW_* overrides inherited from the developer's shell."""
    for key in [k for k in os.environ if k.startswith("SPECFLOW_")]:
        monkeypatch.delenv(key)


@pytest.fixture
def ctx2() -> SymmetryContext:
    """Standard real structure on fiber 2: J = 1, I = [[0, -1], [1, 0]]."""
    return SymmetryContext.standard(2)


@pytest.fixture
def bilateral_shift():
    return shift(1)


@pytest.fixture
def involution():
    """F = +1 on sites >= 0, -1 on sites < 0 (fiber 1)."""
    return standard_involution(1)

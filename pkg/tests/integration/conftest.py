# tests/integration/conftest.py
"""Shared fixtures for integration tests.

No operator mocking: fixtures generate real seeded corpora and every check
regenerates its operators from the recipe.
"""

import pytest

from specflow.corpus import generate_corpus
from specflow.types import Corpus


@pytest.fixture(scope="session")
def plain_corpus() -> Corpus:
    """Twelve plain cases: shift powers, polar-damped and rotated contractions."""
    return generate_corpus(12, 2024, "plain")


@pytest.fixture(scope="session")
def odd_corpus() -> Corpus:
    """Eight odd symmetric cases, half of them diag(S^n, S*^n) and half Siegel samples."""
    return generate_corpus(8, 7, "odd")


@pytest.fixture(scope="session")
def wide_plain_corpus() -> Corpus:
    """A hundred plain cases for the acceptance-scale suites."""
    return generate_corpus(100, 31, "plain")


@pytest.fixture(scope="session")
def wide_odd_corpus() -> Corpus:
    """Fifty odd symmetric cases for the acceptance-scale suites."""
    return generate_corpus(50, 71, "odd")

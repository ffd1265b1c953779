# tests/integration/test_acceptance_scale.py
"""Theorem checks at acceptance scale: hundreds of cases, every dilation kind."""

import pytest

from specflow.corpus import build_case
from specflow.flow import canonical_path, phi_equivalence_check, random_theta_path, spectral_flow
from specflow.operator_core import standard_involution
from specflow.types import DilationKind, Theorem
from specflow.verify import run_case

pytestmark = [pytest.mark.slow, pytest.mark.integration]

PLAIN_DILATIONS: tuple[DilationKind, ...] = ("halmos", "polar", "randomized")


def _not_passed(cases, theorem: Theorem):
    results = [run_case(c, theorem) for c in cases]
    return [
        (r.case_id, r.status, r.formatted_error if r.error else r.values)
        for r in results
        if r.status != "passed"
    ]


class TestIndexFlowAtScale:
    """Sf(F, U* F U) = -Ind(T) on every plain case under each dilation."""

    @pytest.mark.parametrize("dilation", PLAIN_DILATIONS)
    def test_every_dilation(self, wide_plain_corpus, dilation):
        cases = [c.model_copy(update={"dilation": dilation}) for c in wide_plain_corpus.cases]
        assert len(cases) >= 100
        assert _not_passed(cases, "t31") == []

    def test_pair_index_route_agrees(self, wide_plain_corpus):
        for case in wide_plain_corpus.cases:
            values = run_case(case, "t31").values
            assert values["pair_index_flow"] == values["flow"] == -values["index"], case.id


class TestOddAtScale:
    """Z2 index, Z2 pairing and Kramers degeneracy on fifty odd symmetric cases."""

    @pytest.mark.parametrize("theorem", ["t71", "z2pair", "kramers"])
    def test_odd_theorems(self, wide_odd_corpus, theorem):
        assert _not_passed(wide_odd_corpus.cases, theorem) == []


class TestHomotopyAtScale:
    """Random loops added to the canonical path never change the flow."""

    def test_twenty_cases_twenty_seeds(self, wide_plain_corpus):
        for case in wide_plain_corpus.cases[:20]:
            ops = build_case(case)
            f = standard_involution(ops.dilation.fiber_dim)
            canonical = spectral_flow(canonical_path(f, ops.dilation)).flow
            for seed in range(20):
                report = spectral_flow(random_theta_path(f, ops.dilation, seed))
                assert report.flow == canonical, (case.id, seed)
                assert report.diagnostics.refinement_check == canonical, (case.id, seed)


class TestPairingsAtScale:
    """Even triangle and the exponential of the spectral flow on thirty cases each."""

    def test_even_triangle(self, wide_plain_corpus):
        assert _not_passed(wide_plain_corpus.cases[:30], "t44") == []

    def test_phi_equivalence(self, wide_plain_corpus):
        for case in wide_plain_corpus.cases[30:60]:
            ops = build_case(case)
            path = canonical_path(standard_involution(ops.dilation.fiber_dim), ops.dilation)
            report = phi_equivalence_check(path)
            assert report.passed, (case.id, report.flow, report.winding)

"""Tests for spectral flow paths, the flow engine and winding numbers."""

import math

import numpy as np
import pytest

from specflow.dilation import odd_symmetric_dilation_u0
from specflow.exceptions import (
    ConvergenceError,
    GapError,
    NotCompactError,
    NotSelfAdjointError,
    PhaseStepError,
    SpectralCollisionError,
    SymmetryError,
)
from specflow.flow import (
    OperatorPath,
    PathTerm,
    Profile,
    UnitaryPath,
    canonical_path,
    default_steps,
    kramers_check,
    kramers_partner,
    phi_equivalence_check,
    phi_map,
    random_theta_path,
    sf_pair,
    sf_via_pair_index,
    spectral_flow,
    winding_number,
    z2_flow_of_path,
    z2_spectral_flow,
)
from specflow.operator_core import (
    distance,
    fiber_constant,
    finite_operator,
    identity,
    kron_fiber,
    shift,
    site_projection,
    standard_involution,
)
from tests.fixtures import ATOL, finite_unitary, random_hermitian


def _phase_loop(turns: float, grid=(0.0, 0.25, 0.5, 0.75, 1.0)) -> UnitaryPath:
    p0 = site_projection(0, domain="full")
    return UnitaryPath(
        grid=grid,
        evaluate=lambda s: identity() + p0.scaled(np.exp(2j * np.pi * turns * s) - 1),
    )


class TestProfile:
    """Tests for Profile."""

    def test_linear_is_clamped(self):
        p = Profile()
        assert p(-1.0) == 0.0
        assert p(0.25) == 0.25
        assert p(2.0) == 1.0

    def test_sine_vanishes_at_ends(self):
        p = Profile(kind="sine")
        assert p(0.0) == pytest.approx(0.0)
        assert p(0.5) == pytest.approx(1.0)
        assert p(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_hat(self):
        p = Profile(kind="hat", knots=(0.2, 0.5, 0.6))
        assert p(0.1) == 0.0
        assert p(0.35) == pytest.approx(0.5)
        assert p(0.5) == 1.0
        assert p(0.55) == pytest.approx(0.5)
        assert p.lipschitz == pytest.approx(10.0)

    def test_shift_offsets_value(self):
        assert Profile(shift=0.5)(0.0) == -0.5

    def test_lipschitz_scales_with_support(self):
        assert Profile(kind="sine", stop=0.5).lipschitz == pytest.approx(2 * math.pi)

    def test_placed_maps_onto_outer_interval(self):
        placed = Profile().placed((0.5, 1.0), (0.0, 1.0))
        assert placed(0.5) == 0.0
        assert placed(0.75) == pytest.approx(0.5)
        assert placed(0.2) == 0.0

    def test_rejects_empty_support(self):
        with pytest.raises(ValueError, match="start < stop"):
            Profile(start=0.5, stop=0.5)

    def test_hat_needs_knots(self):
        with pytest.raises(ValueError, match="needs knots"):
            Profile(kind="hat")


class TestOperatorPath:
    """Tests for OperatorPath and its builders."""

    def test_rejects_non_finite_term(self, bilateral_shift):
        with pytest.raises(NotCompactError):
            PathTerm(profile=Profile(), operator=bilateral_shift)

    def test_rejects_unsorted_grid(self, involution):
        with pytest.raises(ValueError, match="strictly increasing"):
            OperatorPath(base=involution, grid=(0.0, 0.5, 0.5, 1.0))

    def test_odd_path_needs_context(self, involution):
        with pytest.raises(ValueError, match="symmetry context"):
            OperatorPath(base=involution, tag="odd")

    def test_canonical_endpoints(self, involution, bilateral_shift):
        path = canonical_path(involution, bilateral_shift)
        residuals = path.validate_endpoints()
        assert residuals["start"] < ATOL
        assert residuals["end"] < ATOL
        assert residuals["self_adjoint"] < ATOL

    def test_default_steps_even_and_at_least_eight(self, involution, bilateral_shift):
        path = canonical_path(involution, bilateral_shift)
        assert len(path.grid) - 1 == default_steps(path.terms[0].operator)
        assert (len(path.grid) - 1) % 2 == 0
        assert len(path.grid) >= 9

    def test_odd_step_count_rounded_up(self, involution, bilateral_shift):
        assert len(canonical_path(involution, bilateral_shift, steps=5).grid) == 7

    def test_canonical_requires_finite_commutator(self):
        f = fiber_constant(np.diag([1.0, -1.0]))
        swap = fiber_constant([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(NotCompactError, match=r"\[F, U\]"):
            canonical_path(f, swap)

    def test_canonical_requires_involution(self, bilateral_shift):
        with pytest.raises(NotSelfAdjointError):
            canonical_path(bilateral_shift, bilateral_shift)

    def test_refined_and_restricted_grids(self, involution, bilateral_shift):
        path = canonical_path(involution, bilateral_shift, steps=4)
        assert path.refined(3).grid[:4] == pytest.approx((0.0, 1 / 12, 2 / 12, 3 / 12))
        assert path.restrict(0.1, 0.5).grid == (0.1, 0.25, 0.5)
        with pytest.raises(ValueError, match="not inside"):
            path.restrict(0.5, 1.5)

    def test_concatenate_adds_flows(self, involution, bilateral_shift):
        first = canonical_path(involution, bilateral_shift)
        second = canonical_path(first.node(1.0), bilateral_shift)
        joined = first.concatenate(second)
        assert joined.grid[0] == 0.0 and joined.grid[-1] == 1.0
        expected_end = shift(2).adjoint() @ involution @ shift(2)
        assert distance(joined.node(1.0), expected_end) < ATOL
        assert spectral_flow(joined).flow == -2

    def test_concatenate_rejects_gap(self, involution, bilateral_shift):
        path = canonical_path(involution, bilateral_shift)
        with pytest.raises(ValueError, match="do not meet"):
            path.concatenate(path)


class TestSpectralFlow:
    """Tests for spectral_flow() and sf_pair()."""

    @pytest.mark.parametrize(("power", "expected"), [(1, -1), (-1, 1), (2, -2), (0, 0)])
    def test_shift_powers(self, involution, power, expected):
        assert sf_pair(involution, shift(power)) == expected

    def test_report_diagnostics(self, involution, bilateral_shift):
        report = spectral_flow(canonical_path(involution, bilateral_shift))
        assert report.flow == -1
        assert report.flow_mod2 is None
        assert report.diagnostics.endpoint_count == -1
        assert report.diagnostics.refinement_check == -1
        assert report.diagnostics.downward_crossings >= 1
        assert report.diagnostics.downward_crossings - report.diagnostics.upward_crossings == 1
        assert sum(seg.contribution for seg in report.segments) == report.flow

    def test_independent_of_grid(self, involution):
        path = canonical_path(involution, shift(-2), steps=8)
        assert spectral_flow(path).flow == spectral_flow(path.refined(3)).flow == 2

    def test_curves_stay_in_gap(self, involution, bilateral_shift):
        report = spectral_flow(canonical_path(involution, bilateral_shift))
        assert all(abs(v) < 1 for point in report.curves for v in point.eigenvalues)
        assert [point.s for point in report.curves] == report.grid

    def test_csv_rows(self, involution, bilateral_shift):
        rows = spectral_flow(canonical_path(involution, bilateral_shift)).to_csv_rows()
        assert rows[0][0] == "s"
        assert len({len(row) for row in rows}) == 1

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_path_same_flow(self, involution, seed):
        u = shift(1)
        path = random_theta_path(involution, u, seed)
        assert len(path.terms) == 3
        assert spectral_flow(path).flow == -1
        assert distance(path.node(1.0), u.adjoint() @ involution @ u) < ATOL

    def test_finite_unitary_has_zero_flow(self, involution):
        assert sf_pair(involution, finite_unitary(4, 4, lo=-2)) == 0

    def test_matches_pair_index(self, involution):
        for power in (1, -1, 2):
            path = canonical_path(involution, shift(power))
            assert sf_via_pair_index(path) == spectral_flow(path).flow

    @pytest.mark.parametrize("power", [2, -1])
    def test_endpoint_count_ignores_margin(self, involution, power):
        """n(F_0 <= 0) - n(F_1 <= 0) on the window widened by 0..20 sites is the flow."""
        path = canonical_path(involution, shift(power))
        flow = spectral_flow(path).flow
        lo, hi = path.window
        for margin in range(21):
            start, stop = (
                np.linalg.eigvalsh(path.node(s).dense(lo - margin, hi + margin))
                for s in (path.start, path.stop)
            )
            assert np.count_nonzero(start <= 0) - np.count_nonzero(stop <= 0) == flow == -power

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    @pytest.mark.parametrize("power", [1, -2])
    def test_locally_constant_in_the_base(self, involution, seed, power):
        """Moving the base by a finite Hermitian of norm 0.05 keeps the flow."""
        path = canonical_path(involution, shift(power))
        lo, hi = path.window
        bump = finite_operator(random_hermitian(seed, hi - lo + 1, 0.05), lo)
        moved = path.model_copy(update={"base": path.base + bump})
        assert spectral_flow(moved).flow == spectral_flow(path).flow == -power

    def test_non_self_adjoint_term(self, involution):
        term = PathTerm(profile=Profile(), operator=finite_operator([[0, 1], [0, 0]], 0))
        with pytest.raises(NotSelfAdjointError):
            spectral_flow(OperatorPath(base=involution, terms=(term,)))

    def test_base_without_gap(self):
        with pytest.raises(GapError):
            spectral_flow(OperatorPath(base=identity().scaled(0.5)))

    def test_unresolved_segment(self, involution, bilateral_shift):
        path = canonical_path(involution, bilateral_shift, steps=2)
        with pytest.raises(SpectralCollisionError) as exc_info:
            spectral_flow(path, max_refine=0)
        assert exc_info.value.level == 0


class TestZ2SpectralFlow:
    """Tests for the Z2-valued flow on odd paths."""

    def test_u0_has_odd_flow(self, ctx2):
        assert z2_spectral_flow(standard_involution(2), odd_symmetric_dilation_u0(), ctx2) == 1

    def test_integer_flow_of_u0_vanishes(self):
        assert sf_pair(standard_involution(2), odd_symmetric_dilation_u0()) == 0

    def test_odd_path_is_reflection_symmetric(self, ctx2):
        u0 = odd_symmetric_dilation_u0()
        path = canonical_path(standard_involution(2), u0, tag="odd", ctx=ctx2)
        assert path.validate_endpoints()["odd_reflection"] < ATOL
        assert spectral_flow(path.restrict(0.0, 0.5)).flow_mod2 == z2_flow_of_path(path)

    def test_random_odd_path_keeps_z2(self, ctx2):
        u0 = odd_symmetric_dilation_u0()
        path = random_theta_path(standard_involution(2), u0, 3, tag="odd", ctx=ctx2)
        assert path.validate_endpoints()["odd_reflection"] < 1e-9
        assert z2_flow_of_path(path) == 1

    def test_requires_odd_symmetric_unitary(self, ctx2):
        with pytest.raises(SymmetryError):
            z2_spectral_flow(standard_involution(2), kron_fiber(shift(1), np.eye(2)), ctx2)

    def test_plain_path_rejected(self, involution, bilateral_shift):
        with pytest.raises(SymmetryError):
            z2_flow_of_path(canonical_path(involution, bilateral_shift))


class TestKramers:
    """Tests for kramers_partner() and kramers_check()."""

    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
    def test_u0_path_is_evenly_degenerate(self, ctx2, s):
        u0 = odd_symmetric_dilation_u0()
        path = canonical_path(standard_involution(2), u0, tag="odd", ctx=ctx2)
        report = kramers_check(path.node(s), ctx2, kramers_partner(u0, ctx2, s))
        assert report.passed

    def test_midpoint_zero_mode_is_doubled(self, ctx2):
        u0 = odd_symmetric_dilation_u0()
        path = canonical_path(standard_involution(2), u0, tag="odd", ctx=ctx2)
        report = kramers_check(path.node(0.5), ctx2, kramers_partner(u0, ctx2, 0.5))
        assert report.has_degenerate_gap_eigenvalue()

    def test_partner_only_at_symmetric_points(self, ctx2):
        with pytest.raises(ValueError, match="no Kramers partner"):
            kramers_partner(odd_symmetric_dilation_u0(), ctx2, 0.25)


class TestWindingNumber:
    """Tests for winding_number() and the phi map."""

    @pytest.mark.parametrize("turns", [1, -1, 2])
    def test_phase_loops(self, turns):
        assert winding_number(_phase_loop(turns)) == turns

    def test_constant_loop(self):
        assert winding_number(_phase_loop(0)) == 0

    def test_open_path_rejected(self):
        with pytest.raises(ConvergenceError, match="not an integer"):
            winding_number(_phase_loop(0.5))

    def test_coarse_step_at_zero_refinement(self):
        with pytest.raises(PhaseStepError):
            winding_number(_phase_loop(1, grid=(0.0, 0.5, 1.0)), max_refine=0)

    def test_node_must_be_identity_plus_finite(self, bilateral_shift):
        loop = UnitaryPath(grid=(0.0, 1.0), evaluate=lambda s: bilateral_shift)
        with pytest.raises(NotCompactError):
            winding_number(loop)

    def test_phi_of_involution_is_identity(self, involution):
        assert distance(phi_map(involution), identity()) < ATOL

    @pytest.mark.parametrize("power", [1, -1, 2])
    def test_phi_equivalence(self, involution, power):
        report = phi_equivalence_check(canonical_path(involution, shift(power)))
        assert report.passed
        assert report.flow == -power

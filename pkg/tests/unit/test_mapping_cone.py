"""Tests for mapping cone lifts and index pairings."""

import logging

import numpy as np
import pytest

from specflow.dilation import odd_symmetric_dilation_u0
from specflow.exceptions import (
    ConvergenceError,
    NotProjectionError,
    PairingMismatchError,
    SymmetryError,
)
from specflow.flow import sf_pair, spectral_flow
from specflow.mapping_cone import (
    cone_membership,
    cone_path,
    even_triangle,
    exp_map,
    graded_even_pairing,
    graded_module_check,
    lift_projection,
    lift_unitary,
    linear_lift,
    odd_pairing_identity,
    pairing_even,
    pairing_odd,
    pairing_sign,
    siegel_sample,
    unitary_lift_path,
    z2_pairing,
    z2_pairing_identity,
)
from specflow.operator_core import (
    classify_symmetry,
    distance,
    fiber_block_matrix,
    finite_operator,
    half_projection,
    identity,
    kron_fiber,
    norm_bound,
    projection_residual,
    shift,
    standard_involution,
    zero_operator,
)
from tests.fixtures import ATOL


@pytest.fixture
def boundary_projection():
    """Rank-one projection onto (e_-1 + e_0) / sqrt(2), straddling the F boundary."""
    return finite_operator(0.5 * np.ones((2, 2)), -1)


@pytest.fixture
def banded_projection():
    """P = (1 + H) / 2 with H = [[0, S*], [S, 0]]: a projection with non-local backgrounds."""
    z = zero_operator()
    h = fiber_block_matrix([[z, shift(-1)], [shift(1), z]])
    return h.plus_identity().scaled(0.5)


class TestLiftProjection:
    """Tests for lift_projection()."""

    def test_starts_at_projection(self, boundary_projection, involution):
        lifted = lift_projection(boundary_projection, involution, 0.0)
        assert distance(lifted, boundary_projection) < ATOL

    def test_ends_at_conjugated_projection(self, boundary_projection, involution):
        expected = involution @ boundary_projection @ involution
        assert distance(lift_projection(boundary_projection, involution, 1.0), expected) < ATOL

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.8])
    def test_every_node_is_a_projection(self, boundary_projection, involution, s):
        assert projection_residual(lift_projection(boundary_projection, involution, s)) < ATOL

    def test_rejects_non_projection(self, involution):
        with pytest.raises(NotProjectionError):
            lift_projection(finite_operator([[0.5]], 0), involution, 0.5)


class TestLiftUnitary:
    """Tests for lift_unitary() and unitary_lift_path()."""

    def test_endpoints(self, involution, bilateral_shift):
        assert distance(lift_unitary(bilateral_shift, involution, 0.0), bilateral_shift) < ATOL
        expected = involution @ bilateral_shift @ involution
        assert distance(lift_unitary(bilateral_shift, involution, 1.0), expected) < ATOL

    def test_nodes_are_unitary(self, involution, bilateral_shift):
        v = lift_unitary(bilateral_shift, involution, 0.4)
        assert norm_bound(v.adjoint() @ v - identity()) < 1e-9

    @pytest.mark.parametrize("power", [1, -2])
    def test_half_sine_path_has_canonical_flow(self, involution, power):
        u = shift(power)
        assert spectral_flow(unitary_lift_path(u, involution)).flow == sf_pair(involution, u)


class TestExpMap:
    """Tests for exp_map()."""

    def test_loop_closes_for_local_projection(self, bilateral_shift):
        p = half_projection()
        assert distance(exp_map(p, bilateral_shift, 0.0), identity()) < ATOL
        assert distance(exp_map(p, bilateral_shift, 1.0), identity()) < ATOL

    def test_midpoint_phase(self, bilateral_shift):
        """At s = 1/2 the boundary site carries exp(2 pi i / 2) = -1."""
        u = exp_map(half_projection(), bilateral_shift, 0.5)
        assert u.window == (0, 0)
        assert u.perturbation[0, 0] == pytest.approx(-2.0)

    def test_banded_background_truncates_tail(self, banded_projection):
        f = standard_involution(2)
        assert projection_residual(banded_projection) < ATOL
        assert distance(exp_map(banded_projection, f, 1.0), identity(2)) < 1e-9
        mid = exp_map(banded_projection, f, 0.5)
        assert norm_bound(mid.adjoint() @ mid - identity(2)) < 1e-9

    def test_banded_background_respects_margin(self, banded_projection):
        with pytest.raises(ConvergenceError):
            exp_map(banded_projection, standard_involution(2), 0.5, max_margin=1)


class TestConeMembership:
    """Tests for linear_lift(), cone_path() and cone_membership()."""

    def test_linear_lift_endpoints(self, involution, bilateral_shift):
        assert distance(linear_lift(bilateral_shift, involution, 0.0), bilateral_shift) < ATOL
        end = involution.adjoint() @ bilateral_shift @ involution
        assert distance(linear_lift(bilateral_shift, involution, 1.0), end) < ATOL

    def test_linear_path_is_in_cone(self, involution, bilateral_shift):
        report = cone_membership(cone_path(bilateral_shift, involution), involution)
        assert report.passed
        assert report.reflection_residual is None

    def test_wrong_endpoint_fails(self, involution, bilateral_shift):
        nodes = [(0.0, bilateral_shift), (1.0, bilateral_shift)]
        assert not cone_membership(nodes, involution).passed

    def test_real_cone_with_reflection(self, ctx2):
        f = standard_involution(2)
        report = cone_membership(cone_path(identity(2), f), f, ctx2, tag="real_I")
        assert report.passed
        assert report.reflection_residual == pytest.approx(0.0)

    def test_real_cone_needs_context(self, involution):
        with pytest.raises(ValueError, match="context with I"):
            cone_membership(cone_path(identity(), involution), involution, tag="real_I")

    def test_empty_nodes(self, involution):
        with pytest.raises(ValueError, match="at least one node"):
            cone_membership([], involution)


class TestPairings:
    """Tests for the odd, even and Z2 pairings."""

    def test_signs_are_calibrated_on_the_shift(self, caplog):
        pairing_sign.cache_clear()
        with caplog.at_level(logging.INFO, logger="specflow.mapping_cone"):
            assert pairing_sign("odd") == -1
            assert pairing_sign("even") == -1
        assert "calibrated" in caplog.text

    @pytest.mark.parametrize("power", [-2, -1, 1, 3])
    def test_odd_pairing_is_shift_index(self, involution, power):
        assert pairing_odd(involution, shift(power)) == power

    def test_odd_identity(self, involution):
        assert odd_pairing_identity(involution, shift(2)) == (2, -2)

    def test_even_pairing_of_shift(self, bilateral_shift):
        assert pairing_even(half_projection(), bilateral_shift) == 1

    @pytest.mark.parametrize("power", [1, 2, -1])
    def test_even_triangle(self, power):
        pairing, winding, flow = even_triangle(half_projection(), shift(power))
        assert (pairing, winding, flow) == (power, -power, -power)

    def test_graded_even_pairing(self, bilateral_shift):
        p = half_projection()
        assert graded_even_pairing(p, p, bilateral_shift) == 1
        q = p - finite_operator([[1.0]], 0)
        assert graded_even_pairing(p, q, bilateral_shift) == pairing_even(q, bilateral_shift) + 1

    def test_z2_pairing_of_u0(self, ctx2):
        assert z2_pairing(half_projection(2), odd_symmetric_dilation_u0(), ctx2) == 1

    def test_z2_pairing_requires_odd_symmetry(self, ctx2):
        with pytest.raises(SymmetryError):
            z2_pairing(half_projection(2), kron_fiber(shift(1), np.eye(2)), ctx2)

    def test_z2_identity_of_u0(self, ctx2):
        assert z2_pairing_identity(half_projection(2), odd_symmetric_dilation_u0(), ctx2) == (1, 1)

    def test_z2_identity_mismatch(self, ctx2, monkeypatch):
        monkeypatch.setattr("specflow.mapping_cone.z2_spectral_flow", lambda *args, **kwargs: 0)
        with pytest.raises(PairingMismatchError, match="z2 pairing mismatch") as exc_info:
            z2_pairing_identity(half_projection(2), odd_symmetric_dilation_u0(), ctx2)
        assert (exc_info.value.pairing, exc_info.value.flow) == (1, 0)


class TestGradedModule:
    """Tests for graded_module_check()."""

    def test_unitary_gives_graded_involution(self, bilateral_shift):
        report = graded_module_check(bilateral_shift, samples=[half_projection(), identity()])
        assert report.passed
        assert report.sample_residuals == [pytest.approx(0.0), pytest.approx(0.0)]

    def test_non_unitary_fails(self, bilateral_shift):
        report = graded_module_check(bilateral_shift.scaled(0.5))
        assert not report.passed
        assert report.involution > 0.5


class TestSiegelSample:
    """Tests for siegel_sample()."""

    def test_is_odd_symmetric(self, ctx2):
        a = kron_fiber(shift(1), np.array([[1.0, 2.0], [0.0, 1j]]))
        assert "odd_symmetric" in classify_symmetry(siegel_sample(a, ctx2), ctx2)

"""Mapping cone representatives, their lifts and index pairings.

A cone element over the involution F is a path s -> A_s with A_s - A_0
finite-window and A_1 = F* A_0 F. Projections P give even elements through
``lift_projection`` and ``exp_map``; unitaries U give odd elements through
``lift_unitary``. The pairings with F are Fredholm indices of Toeplitz-type
compressions and agree with the spectral flow up to a sign fixed once on the
bilateral shift.
"""

__all__ = [
    "lift_projection",
    "lift_unitary",
    "unitary_lift_path",
    "exp_map",
    "cone_membership",
    "linear_lift",
    "cone_path",
    "pairing_odd",
    "pairing_even",
    "pairing_sign",
    "z2_pairing",
    "z2_pairing_identity",
    "graded_even_pairing",
    "odd_pairing_identity",
    "even_triangle",
    "graded_module_check",
    "siegel_sample",
]

import logging
import math
from collections.abc import Sequence
from functools import cache
from typing import Literal

import numpy as np
import scipy.linalg as sla

from specflow.config import get_max_margin, get_structural_tol
from specflow.exceptions import (
    ConvergenceError,
    NotCompactError,
    NotProjectionError,
    PairingMismatchError,
    SymmetryError,
)
from specflow.flow import (
    OperatorPath,
    PathTerm,
    Profile,
    UnitaryPath,
    canonical_path,
    default_steps,
    sf_pair,
    spectral_flow,
    winding_number,
    z2_spectral_flow,
)
from specflow.fredholm import fredholm_index, pair_index, z2_index
from specflow.operator_core import (
    LatticeOperator,
    SymmetryContext,
    background_norm,
    classify_symmetry,
    distance,
    fiber_constant,
    fiber_sandwich,
    finite_operator,
    finite_part,
    half_projection,
    hermitian_function,
    identity,
    kron_fiber,
    norm_bound,
    projection_residual,
    shift,
    standard_involution,
)
from specflow.types import ConeReport, GradedModuleReport

logger = logging.getLogger(__name__)

type PairingKind = Literal["odd", "even"]

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_EXP_TAIL = 1e-12


def _check_projection(p: LatticeOperator, tol: float) -> None:
    residual = projection_residual(p)
    if residual > tol:
        raise NotProjectionError("P is not an orthogonal projection", residual=residual)


def _check_commutator(a: LatticeOperator, f: LatticeOperator, tol: float) -> LatticeOperator:
    commutator = a @ f - f @ a
    residual = background_norm(commutator)
    if residual > tol:
        raise NotCompactError("[A, F] is not finite-window", residual=residual)
    return finite_part(commutator)


def _range_projection(f: LatticeOperator) -> LatticeOperator:
    """Q = (F + 1) / 2."""
    return f.plus_identity().scaled(0.5)


# ---------------------------------------------------------------------------
# Lifts
# ---------------------------------------------------------------------------


def lift_projection(p: LatticeOperator, f: LatticeOperator, s: float) -> LatticeOperator:
    """P_s = sum over Q-blocks of P with phases e^{+-i pi s} on the off-diagonal blocks.

    P_0 = P, every P_s is a projection, and P_s - P is finite.
    """
    tol = get_structural_tol()
    _check_projection(p, tol)
    _check_commutator(p, f, tol)
    q = _range_projection(f)
    qc = identity(f.fiber_dim, f.domain) - q
    phase = complex(math.cos(math.pi * s), math.sin(math.pi * s))
    return (
        q @ p @ q
        + (q @ p @ qc).scaled(phase)
        + (qc @ p @ q).scaled(phase.conjugate())
        + qc @ p @ qc
    )


def _lift_generator(unitary: LatticeOperator, f: LatticeOperator) -> LatticeOperator:
    """K = U*[F, U], finite by assumption."""
    commutator = _check_commutator(f, unitary, get_structural_tol())
    return finite_part(unitary.adjoint() @ commutator)


def lift_unitary(unitary: LatticeOperator, f: LatticeOperator, s: float) -> LatticeOperator:
    """V_s = U exp((i pi / 2)(F - 1 + s K)) F with K = U*[F, U].

    V_0 = U and the self-adjoint part of V_s is sin(pi/2 (F + s K)).
    """
    generator = _lift_generator(unitary, f)
    arg = f.plus_identity(-1.0) + generator.scaled(s)
    return unitary @ hermitian_function(arg, lambda w: np.exp(0.5j * np.pi * w)) @ f


def unitary_lift_path(
    unitary: LatticeOperator, f: LatticeOperator, steps: int | None = None
) -> OperatorPath:
    """s -> Re V_s = sin(pi/2 F_s) as a half-sine path over the canonical one."""
    generator = _lift_generator(unitary, f)
    steps = default_steps(generator) if steps is None else steps
    return OperatorPath(
        base=f,
        terms=(PathTerm(profile=Profile(kind="linear"), operator=generator),),
        grid=tuple(j / steps for j in range(steps + 1)),
        companion=unitary,
        calculus="half_sine",
    )


def _exp_projection_background(x: LatticeOperator, max_margin: int) -> LatticeOperator:
    """exp(2 pi i X) for X with banded projection-valued backgrounds.

    The backgrounds exponentiate to 1, so the result is 1 plus a tail that
    decays away from the window; the margin grows until that tail is below
    the cutoff on a ring far from the truncation edge.
    """
    d = x.fiber_dim
    thetas = 2 * np.pi * np.arange(64) / 64
    for sym in x.symbols():
        values = sym.evaluate(thetas)
        defect = float(np.max(np.abs(values @ values - values), initial=0.0))
        if defect > get_structural_tol():
            raise NotProjectionError("background symbol is not projection-valued", residual=defect)
    lo, hi = x.window if x.window_size else (0, 0)
    margin = 4 * max(x.bandwidth, 1)
    iterations = 0
    while margin <= max_margin:
        outer_lo = lo - 2 * margin
        if x.domain == "half":
            outer_lo = max(outer_lo, 0)
        outer_hi = hi + 2 * margin
        full = sla.expm(2j * np.pi * x.dense(outer_lo, outer_hi)) - np.eye(
            (outer_hi - outer_lo + 1) * d
        )
        keep_lo = max(lo - margin, outer_lo)
        keep_hi = hi + margin
        sl = slice((keep_lo - outer_lo) * d, (keep_hi - outer_lo + 1) * d)
        kept = full[sl, sl]
        per_site = np.abs(kept).reshape(keep_hi - keep_lo + 1, d, -1).max(axis=(1, 2))
        sites = np.arange(keep_lo, keep_hi + 1)
        ring = (sites < lo - margin // 2) | (sites > hi + margin // 2)
        tail = float(per_site[ring].max(initial=0.0))
        logger.debug("exp_map margin=%d tail=%.3e", margin, tail)
        if tail < _EXP_TAIL:
            one = identity(d, x.domain)
            return one + finite_operator(kept, keep_lo, fiber_dim=d, domain=x.domain)
        margin *= 2
        iterations += 1
    raise ConvergenceError(
        f"exp tail did not drop below {_EXP_TAIL} up to margin {max_margin}", iterations=iterations
    )


def exp_map(
    p: LatticeOperator, f: LatticeOperator, s: float, max_margin: int | None = None
) -> LatticeOperator:
    """exp(2 pi i (P + s F*[P, F])), a loop of unitaries equal to 1 at s = 0 and s = 1."""
    tol = get_structural_tol()
    _check_projection(p, tol)
    commutator = _check_commutator(p, f, tol)
    x = p + finite_part(f.adjoint() @ commutator).scaled(s)
    if x.is_local:
        return hermitian_function(x, lambda w: np.exp(2j * np.pi * w))
    return _exp_projection_background(x, get_max_margin() if max_margin is None else max_margin)


def linear_lift(a: LatticeOperator, f: LatticeOperator, s: float) -> LatticeOperator:
    """(1 - s) A + s F* A F."""
    return a.scaled(1.0 - s) + (f.adjoint() @ a @ f).scaled(s)


def cone_path(
    a: LatticeOperator, f: LatticeOperator, steps: int = 8
) -> list[tuple[float, LatticeOperator]]:
    return [(j / steps, linear_lift(a, f, j / steps)) for j in range(steps + 1)]


def cone_membership(
    nodes: Sequence[tuple[float, LatticeOperator]],
    f: LatticeOperator,
    ctx: SymmetryContext | None = None,
    tag: Literal["complex", "real_I"] = "complex",
    tol: float | None = None,
) -> ConeReport:
    """Check A_1 = F* A_0 F and A_s - A_0 finite along sampled nodes.

    ``real_I`` also checks I* conj(A_s) I = F A_(1-s) F* wherever both s and
    1 - s are sampled.
    """
    tol = get_structural_tol() if tol is None else tol
    if not nodes:
        raise ValueError("cone membership needs at least one node")
    nodes = sorted(nodes, key=lambda item: item[0])
    a0, a1 = nodes[0][1], nodes[-1][1]
    boundary = distance(a1, f.adjoint() @ a0 @ f)
    deviation = max(background_norm(a - a0) for _, a in nodes)
    reflection: float | None = None
    if tag == "real_I":
        if ctx is None or ctx.i_matrix is None:
            raise ValueError("real_I cone checks need a context with I")
        by_s = {round(s, 12): a for s, a in nodes}
        i = ctx.i_matrix
        residuals = [
            distance(
                fiber_sandwich(a.conjugate(), i.T, i),
                f @ by_s[round(1.0 - s, 12)] @ f.adjoint(),
            )
            for s, a in nodes
            if round(1.0 - s, 12) in by_s
        ]
        reflection = max(residuals, default=0.0)
    return ConeReport(
        tag=tag,
        boundary_residual=boundary,
        deviation_background=deviation,
        reflection_residual=reflection,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# Pairings
# ---------------------------------------------------------------------------


def pairing_odd(f: LatticeOperator, unitary: LatticeOperator) -> int:
    """Ind(PUP + 1 - P) with P = (F + 1) / 2."""
    p = _range_projection(f)
    one = identity(f.fiber_dim, f.domain)
    return fredholm_index(p @ unitary @ p + one - p)


def _even_compression(p: LatticeOperator, f: LatticeOperator) -> LatticeOperator:
    tol = get_structural_tol()
    _check_projection(p, tol)
    _check_commutator(p, f, tol)
    one = identity(f.fiber_dim, f.domain)
    return p @ f @ p + one - p


def pairing_even(p: LatticeOperator, f: LatticeOperator) -> int:
    """Ind(PFP + 1 - P) for a projection P commuting with the unitary F up to finite rank."""
    return fredholm_index(_even_compression(p, f))


@cache
def pairing_sign(kind: PairingKind) -> int:
    """Sign relating a pairing to the spectral flow, calibrated on the bilateral shift."""
    s = shift(1)
    f = standard_involution(1)
    if kind == "odd":
        pairing, flow = pairing_odd(f, s), sf_pair(f, s)
    else:
        pairing, flow = pairing_even(half_projection(1), s), sf_pair(f, s)
    sign = pairing // flow
    logger.info(
        "%s pairing sign calibrated on the shift: pairing=%d flow=%d sign=%d",
        kind,
        pairing,
        flow,
        sign,
    )
    return sign


def z2_pairing(p: LatticeOperator, f: LatticeOperator, ctx: SymmetryContext) -> int:
    """Ind_2(PFP + 1 - P) for odd symmetric P and F.

    Raises:
        SymmetryError: If P or F is not odd symmetric.
    """
    for op in (p, f):
        flags = classify_symmetry(op, ctx)
        if "odd_symmetric" not in flags:
            raise SymmetryError("odd_symmetric", flags)
    return z2_index(_even_compression(p, f), ctx)


def graded_even_pairing(
    p_plus: LatticeOperator, p_minus: LatticeOperator, f: LatticeOperator
) -> int:
    """Pairing of the formal difference [P+] - [P-]: Ind(P- F P-) + Ind(P+, P-)."""
    return pairing_even(p_minus, f) + pair_index(p_plus, p_minus)


def odd_pairing_identity(f: LatticeOperator, unitary: LatticeOperator) -> tuple[int, int]:
    """(pairing, flow) for the odd pairing.

    Raises:
        PairingMismatchError: If pairing != sign * flow.
    """
    pairing = pairing_odd(f, unitary)
    flow = sf_pair(f, unitary)
    if pairing != pairing_sign("odd") * flow:
        raise PairingMismatchError("odd", pairing, flow)
    return pairing, flow


def z2_pairing_identity(
    p: LatticeOperator, f: LatticeOperator, ctx: SymmetryContext
) -> tuple[int, int]:
    """(Z2 pairing, Sf_2(2P - 1, F)) for odd symmetric P and F.

    Raises:
        SymmetryError: If P or F is not odd symmetric.
        PairingMismatchError: If the two parities differ.
    """
    pairing = z2_pairing(p, f, ctx)
    involution = p.scaled(2.0).plus_identity(-1.0)
    flow2 = z2_spectral_flow(involution, f, ctx)
    if pairing != flow2:
        raise PairingMismatchError("z2", pairing, flow2)
    return pairing, flow2


def even_triangle(p: LatticeOperator, f: LatticeOperator) -> tuple[int, int, int]:
    """(pairing, winding of exp_map, Sf(2P - 1, F*(2P - 1)F)) for projection P and unitary F.

    Raises:
        PairingMismatchError: If the three numbers are not related by the calibrated sign.
    """
    pairing = pairing_even(p, f)
    involution = p.scaled(2.0).plus_identity(-1.0)
    report = spectral_flow(canonical_path(involution, f))
    loop = UnitaryPath(grid=tuple(report.grid), evaluate=lambda s: exp_map(p, f, s))
    winding = winding_number(loop)
    if winding != report.flow:
        raise PairingMismatchError("exp winding", winding, report.flow)
    if pairing != pairing_sign("even") * report.flow:
        raise PairingMismatchError("even", pairing, report.flow)
    return pairing, winding, report.flow


def graded_module_check(
    f: LatticeOperator,
    samples: Sequence[LatticeOperator] = (),
    tol: float | None = None,
) -> GradedModuleReport:
    """Build F^ = Re F (x) sigma_x + Im F (x) sigma_y with grading 1 (x) sigma_z and check it.

    F^ must be an odd self-adjoint involution and every sample A (x) 1 even.
    """
    tol = get_structural_tol() if tol is None else tol
    adj = f.adjoint()
    real = (f + adj).scaled(0.5)
    imag = (f - adj).scaled(-0.5j)
    graded = kron_fiber(real, _PAULI_X) + kron_fiber(imag, _PAULI_Y)
    gamma = fiber_constant(np.kron(np.eye(f.fiber_dim), _PAULI_Z), f.domain)
    one = identity(2 * f.fiber_dim, f.domain)
    residuals = []
    for a in samples:
        lifted = kron_fiber(a, np.eye(2))
        residuals.append(norm_bound(gamma @ lifted @ gamma - lifted))
    return GradedModuleReport(
        grading_square=norm_bound(gamma @ gamma - one),
        anticommutation=norm_bound(gamma @ graded @ gamma + graded),
        self_adjointness=norm_bound(graded - graded.adjoint()),
        involution=norm_bound(graded @ graded - one),
        sample_residuals=residuals,
        tol=tol,
    )


def siegel_sample(a: LatticeOperator, ctx: SymmetryContext) -> LatticeOperator:
    """I* A^t I A, an odd symmetric operator built from any A."""
    return ctx.odd_transpose(a) @ a

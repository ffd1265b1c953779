"""Index theory for essentially unitary lattice operators.

Kernels are read off the finite defect 1 - T*T instead of a truncated
singular value decomposition: ker T = ker(T*T) and T*T = 1 - K_L, so the
kernel is the eigenvalue-1 eigenspace of the finite block K_L. Truncating T
itself would always report index 0.
"""

__all__ = [
    "kernel_dimension",
    "fredholm_index",
    "z2_index",
    "kramers_parity_ok",
    "pair_index",
    "symbol_winding_oracle",
]

import logging
import math

import numpy as np
import scipy.linalg as sla

from specflow.config import get_circle_samples, get_max_refine, get_rank_tol, get_structural_tol
from specflow.exceptions import (
    IllConditionedKernelError,
    NotCompactError,
    NotEssentiallyUnitaryError,
    NotProjectionError,
    PhaseStepError,
    SymmetryError,
)
from specflow.operator_core import (
    LatticeOperator,
    SymmetryContext,
    background_norm,
    classify_symmetry,
    defect_operators,
    projection_residual,
)

logger = logging.getLogger(__name__)


def kernel_dimension(op: LatticeOperator, tol: float | None = None) -> int:
    """dim ker T, counted as eigenvalues of K_L = 1 - T*T within tol of 1.

    ``tol`` is relative to ||T||^2.

    Raises:
        NotEssentiallyUnitaryError: If the defect is not finite-window.
        IllConditionedKernelError: If a defect eigenvalue lies in (1 - 10 tol, 1 - tol).
    """
    tol = get_rank_tol() if tol is None else tol
    k_left = defect_operators(op).left
    if k_left.window_size == 0:
        return 0
    w = sla.eigvalsh(k_left.block())
    scale = max(1.0, 1.0 - float(w.min()))
    eff = tol * scale
    ambiguous = w[(w > 1.0 - 10 * eff) & (w < 1.0 - eff)]
    if ambiguous.size:
        raise IllConditionedKernelError(float(ambiguous[0]), eff)
    return int(np.count_nonzero(w >= 1.0 - eff))


def fredholm_index(op: LatticeOperator, tol: float | None = None) -> int:
    """Ind(T) = dim ker T - dim ker T*."""
    return kernel_dimension(op, tol) - kernel_dimension(op.adjoint(), tol)


def _require_flag(op: LatticeOperator, ctx: SymmetryContext, flag: str) -> None:
    flags = classify_symmetry(op, ctx)
    if flag not in flags:
        raise SymmetryError(flag, flags)


def z2_index(op: LatticeOperator, ctx: SymmetryContext, tol: float | None = None) -> int:
    """Ind_2(T) = dim ker T mod 2 for odd symmetric T.

    Raises:
        SymmetryError: If T is not odd symmetric.
    """
    _require_flag(op, ctx, "odd_symmetric")
    return kernel_dimension(op, tol) % 2


def kramers_parity_ok(op: LatticeOperator, ctx: SymmetryContext, tol: float | None = None) -> bool:
    """Odd real operators have even Fredholm index."""
    _require_flag(op, ctx, "odd_real")
    return fredholm_index(op, tol) % 2 == 0


def pair_index(p: LatticeOperator, q: LatticeOperator, tol: float | None = None) -> int:
    """Index of the pair (P, Q): Ind(QP: Ran P -> Ran Q).

    Equals dim ker(P - Q - 1) - dim ker(P - Q + 1). Both eigenspaces live in
    the range of the finite operator P - Q, so the count is exact. Eigenvalues
    within 10 tol of +-1 but farther than tol are counted as outside the kernel.

    Raises:
        NotProjectionError: If P or Q is not an orthogonal projection.
        NotCompactError: If P - Q is not finite-window.
    """
    tol = get_rank_tol() if tol is None else tol
    structural = get_structural_tol()
    for name, proj in (("P", p), ("Q", q)):
        residual = projection_residual(proj)
        if residual > structural:
            raise NotProjectionError(f"{name} is not an orthogonal projection", residual=residual)
    diff = p - q
    residual = background_norm(diff)
    if residual > structural:
        raise NotCompactError("P - Q is not finite-window", residual=residual)
    if diff.window_size == 0:
        return 0
    w = sla.eigvalsh(diff.perturbation)
    plus = np.abs(w - 1.0)
    minus = np.abs(w + 1.0)
    near = ((plus > tol) & (plus <= 10 * tol)) | ((minus > tol) & (minus <= 10 * tol))
    ties = int(np.count_nonzero(near))
    if ties:
        logger.warning(
            "pair_index: %d eigenvalue(s) of P - Q within 10*tol of +-1 counted outside the kernel",
            ties,
        )
    return int(np.count_nonzero(plus <= tol)) - int(np.count_nonzero(minus <= tol))


def symbol_winding_oracle(unitary: LatticeOperator, samples: int | None = None) -> int:
    """Winding number of det(sigma(theta)) for the right background of U.

    The Toeplitz compression PUP has index equal to minus this winding, so
    the return value is -Ind(PUP). Phase steps are kept below pi/2 by doubling
    the sample count.

    Raises:
        NotEssentiallyUnitaryError: If the determinant vanishes on the circle.
        PhaseStepError: If a phase step stays >= pi/2 at the maximal refinement.
    """
    n = get_circle_samples() if samples is None else samples
    symbol = unitary.right
    worst = 0.0
    for _ in range(get_max_refine() + 1):
        thetas = 2 * np.pi * np.arange(n + 1) / n
        dets = np.linalg.det(symbol.evaluate(thetas))
        smallest = float(np.min(np.abs(dets)))
        if smallest < get_rank_tol():
            raise NotEssentiallyUnitaryError(
                "symbol determinant vanishes on the unit circle", residual=smallest
            )
        steps = np.angle(dets[1:] / dets[:-1])
        worst = float(np.max(np.abs(steps)))
        if worst < math.pi / 2:
            return round(float(steps.sum()) / (2 * math.pi))
        n *= 2
    raise PhaseStepError((0.0, 2 * math.pi), worst)

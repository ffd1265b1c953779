"""Unitary dilations of essentially unitary contractions.

Every dilation U of a half-line contraction T is a full-line operator built
with ``fold``; its compression to sites >= 0 is T and its off-diagonal blocks
are finite, so [F, U] is finite-window for F = ``standard_involution``.
"""

__all__ = [
    "contraction_norm",
    "halmos_dilation",
    "polar_isometry",
    "polar_isometry_dilation",
    "randomized_dilation",
    "odd_symmetric_dilation_u0",
    "validate_dilation",
]

import logging
import math

import numpy as np
import scipy.linalg as sla

from specflow.config import get_rank_tol, get_structural_tol
from specflow.exceptions import DomainMismatchError, NotContractionError
from specflow.operator_core import (
    LatticeOperator,
    background_norm,
    defect_operators,
    fiber_block_matrix,
    finite_operator,
    fold,
    half_line_compression,
    hermitian_function,
    identity,
    max_entry,
    norm_bound,
    shift,
    site_projection,
    standard_involution,
    zero_operator,
)
from specflow.types import DilationReport

logger = logging.getLogger(__name__)


def _require_half(op: LatticeOperator) -> None:
    if op.domain != "half":
        raise DomainMismatchError(op.domain, "half")


def contraction_norm(op: LatticeOperator) -> float:
    """||T|| = sqrt(max(1, 1 - min spec K_L)) for essentially unitary T."""
    k_left = defect_operators(op).left
    if k_left.window_size == 0:
        return 1.0
    lowest = float(sla.eigvalsh(k_left.block()).min())
    return math.sqrt(max(1.0, 1.0 - lowest))


def _check_contraction(op: LatticeOperator, tol: float) -> None:
    norm = contraction_norm(op)
    if norm > 1.0 + tol:
        raise NotContractionError(norm)


def _snap(w: np.ndarray, tol: float) -> np.ndarray:
    """Eigenvalues within tol of 0 or 1 set to exactly 0 or 1."""
    out = np.where(np.abs(w) <= tol, 0.0, w)
    return np.where(np.abs(out - 1.0) <= tol, 1.0, out)


def _positive_sqrt(op: LatticeOperator) -> LatticeOperator:
    # sqrt amplifies round-off near 0 to its square root
    tol = get_rank_tol()
    return hermitian_function(op, lambda w: np.sqrt(np.clip(_snap(w, tol), 0.0, None)))


def halmos_dilation(op: LatticeOperator, tol: float | None = None) -> LatticeOperator:
    """fold of [[T, (1 - TT*)^1/2], [(1 - T*T)^1/2, -T*]].

    Raises:
        DomainMismatchError: If T is not a half-line operator.
        NotEssentiallyUnitaryError: If a defect is not finite-window.
        NotContractionError: If ||T|| > 1 + tol.
    """
    _require_half(op)
    tol = get_structural_tol() if tol is None else tol
    defects = defect_operators(op)
    _check_contraction(op, tol)
    upper = _positive_sqrt(defects.right)
    lower = _positive_sqrt(defects.left)
    return fold([[op, upper], [lower, -op.adjoint()]])


def polar_isometry(op: LatticeOperator, tol: float | None = None) -> LatticeOperator:
    """Partial isometry V of the polar decomposition T = V|T|."""
    _require_half(op)
    tol = get_rank_tol() if tol is None else tol
    gram = identity(op.fiber_dim, "half") - defect_operators(op).left

    def inverse_root(w: np.ndarray) -> np.ndarray:
        w = _snap(w, tol)
        out = np.zeros_like(w)
        keep = w > tol
        out[keep] = 1.0 / np.sqrt(w[keep])
        return out

    return op @ hermitian_function(gram, inverse_root)


def polar_isometry_dilation(op: LatticeOperator, tol: float | None = None) -> LatticeOperator:
    """Halmos dilation of the polar isometry V of T."""
    _require_half(op)
    _check_contraction(op, get_structural_tol() if tol is None else tol)
    return halmos_dilation(polar_isometry(op))


def _copy2_rotation(
    rng: np.random.Generator, radius: int, fiber_dim: int, strength: float
) -> LatticeOperator:
    size = radius * fiber_dim
    raw = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    herm = strength * (raw + raw.conj().T) / 2
    generator = finite_operator(herm, -radius, fiber_dim=fiber_dim, domain="full")
    return hermitian_function(generator, lambda w: np.exp(1j * w))


def randomized_dilation(
    op: LatticeOperator,
    seed: int,
    *,
    strength: float = 1.0,
    radius: int | None = None,
) -> LatticeOperator:
    """diag(1, W1) . U^H . diag(1, W2) with seeded unitaries on copy-2 sites < radius.

    ``strength = 0`` returns the Halmos dilation.
    """
    base = halmos_dilation(op)
    if strength == 0:
        return base
    rng = np.random.default_rng(seed)
    radius = max(op.window[1] + 1, 0) + 8 if radius is None else radius
    w1 = _copy2_rotation(rng, radius, op.fiber_dim, strength)
    w2 = _copy2_rotation(rng, radius, op.fiber_dim, strength)
    return w1 @ base @ w2


def odd_symmetric_dilation_u0() -> LatticeOperator:
    """Odd symmetric unitary dilation of diag(S, S*) on fiber 2.

    Blocks: A = diag(S, S*), B = [[0, 0], [0, P]], C = [[P, 0], [0, 0]],
    D = diag(-S*, -S), with P the projection onto site 0 (S*S = 1 - P).
    """
    s = shift(1, domain="half")
    s_adj = s.adjoint()
    p = site_projection(0)
    z = zero_operator(1, "half")
    a = fiber_block_matrix([[s, z], [z, s_adj]])
    b = fiber_block_matrix([[z, z], [z, p]])
    c = fiber_block_matrix([[p, z], [z, z]])
    d = fiber_block_matrix([[-s_adj, z], [z, -s]])
    return fold([[a, b], [c, d]])


def validate_dilation(
    unitary: LatticeOperator, contraction: LatticeOperator, tol: float | None = None
) -> DilationReport:
    """Check Pi* U Pi = T, unitarity of U and finiteness of [F, U].

    Pi embeds the half line as the sites >= 0, which is the folding convention.
    The compression residual is the largest entry of Pi* U Pi - T.
    """
    tol = get_structural_tol() if tol is None else tol
    _require_half(contraction)
    one = identity(unitary.fiber_dim)
    compression_residual = max_entry(half_line_compression(unitary) - contraction)
    unitarity = max(
        norm_bound(unitary.adjoint() @ unitary - one),
        norm_bound(unitary @ unitary.adjoint() - one),
    )
    f = standard_involution(unitary.fiber_dim)
    commutator = f @ unitary - unitary @ f
    report = DilationReport(
        compression_residual=compression_residual,
        unitarity_defect=unitarity,
        commutator_background=background_norm(commutator),
        commutator_window=commutator.window,
        tol=tol,
    )
    if not report.passed:
        logger.info(
            "dilation check failed: compression=%.3e unitarity=%.3e commutator=%.3e",
            compression_residual,
            unitarity,
            report.commutator_background,
        )
    return report

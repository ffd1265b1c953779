"""Two-limit banded lattice operators.

An operator on l2(Z) (full line) or l2(N) (half line), tensored with a fiber
C^d, is stored as

* a Laurent symbol used on rows left of the origin,
* a Laurent symbol used on rows at or right of the origin,
* a dense perturbation on a finite window of sites.

The class is closed under sums, products and the star operations, so
"compact" becomes "finite window" and every identity checked by this package
reduces to finite linear algebra.

Conventions:
    The coefficient ``diagonals[k]`` sits at matrix position (m, n) with
    m - n = k. The left shift (S x)_m = x_{m+1} has offset -1.
    Windows are inclusive site intervals; ``EMPTY_WINDOW`` is (0, -1).
    Fold identifies copy-1 site n with lattice site n and copy-2 site n with
    lattice site -(n + 1).
"""

__all__ = [
    "EMPTY_WINDOW",
    "CHOP",
    "Domain",
    "Window",
    "LaurentSymbol",
    "LatticeOperator",
    "SymmetryContext",
    "SpectralCluster",
    "WindowCompression",
    "DefectPair",
    "algebra",
    "star_ops",
    "classify_symmetry",
    "fold",
    "unfold",
    "window_compression",
    "essential_spectrum",
    "discrete_spectrum",
    "defect_operators",
    "hermitian_function",
    "negative_projection",
    "projection_residual",
    "identity",
    "zero_operator",
    "shift",
    "finite_operator",
    "site_projection",
    "standard_involution",
    "half_projection",
    "half_line_compression",
    "fiber_constant",
    "fiber_sandwich",
    "kron_fiber",
    "fiber_block_matrix",
    "finite_part",
    "norm_bound",
    "background_norm",
    "max_entry",
    "distance",
]

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from typing import Any, Literal, NamedTuple, Self

import numpy as np
import scipy.linalg as sla
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from specflow.config import (
    get_circle_samples,
    get_eigen_tol,
    get_max_margin,
    get_structural_tol,
)
from specflow.exceptions import (
    ConvergenceError,
    DimensionMismatchError,
    DomainMismatchError,
    GapError,
    NotCompactError,
    NotEssentiallyUnitaryError,
    NotSelfAdjointError,
)
from specflow.types import SymmetryFlag

logger = logging.getLogger(__name__)

type Domain = Literal["full", "half"]
type Window = tuple[int, int]
type AlgebraKind = Literal["add", "mul"]
type StarKind = Literal["adjoint", "transpose", "conjugate"]

EMPTY_WINDOW: Window = (0, -1)
CHOP = 1e-13  # coefficients and border blocks below this are dropped
_EDGE_WEIGHT = 1e-6


def _as_block(value: Any, d: int) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr * np.eye(d, dtype=np.complex128)
    if arr.shape != (d, d):
        raise ValueError(f"coefficient shape {arr.shape} != ({d}, {d})")
    return arr


class LaurentSymbol(BaseModel):
    """Finitely supported Laurent polynomial with d x d matrix coefficients.

    Evaluates to sigma(theta) = sum_k diagonals[k] * exp(i k theta).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fiber_dim: int = Field(ge=1)
    diagonals: dict[int, np.ndarray] = Field(default_factory=dict)

    @field_validator("diagonals", mode="before")
    @classmethod
    def _coerce_diagonals(
        cls, value: Mapping[Any, Any], info: ValidationInfo
    ) -> dict[int, np.ndarray]:
        d = info.data.get("fiber_dim")
        if d is None:
            raise ValueError("fiber_dim must be valid before diagonals")
        cleaned: dict[int, np.ndarray] = {}
        for key in sorted(value, key=int):
            block = _as_block(value[key], d)
            if np.max(np.abs(block), initial=0.0) > CHOP:
                block.setflags(write=False)
                cleaned[int(key)] = block
        return cleaned

    @classmethod
    def zero(cls, fiber_dim: int) -> Self:
        return cls(fiber_dim=fiber_dim)

    @classmethod
    def constant(cls, block: Any, fiber_dim: int) -> Self:
        return cls(fiber_dim=fiber_dim, diagonals={0: block})

    @property
    def bandwidth(self) -> int:
        return max((abs(k) for k in self.diagonals), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.diagonals

    @property
    def is_local(self) -> bool:
        """True when only the on-site (offset 0) coefficient is present."""
        return all(k == 0 for k in self.diagonals)

    def coefficient(self, k: int) -> np.ndarray:
        block = self.diagonals.get(k)
        if block is None:
            return np.zeros((self.fiber_dim, self.fiber_dim), dtype=np.complex128)
        return block

    def _check(self, other: "LaurentSymbol") -> None:
        if other.fiber_dim != self.fiber_dim:
            raise DimensionMismatchError(self.fiber_dim, other.fiber_dim)

    def __add__(self, other: "LaurentSymbol") -> "LaurentSymbol":
        self._check(other)
        keys = set(self.diagonals) | set(other.diagonals)
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={k: self.coefficient(k) + other.coefficient(k) for k in keys},
        )

    def __neg__(self) -> "LaurentSymbol":
        return self.scaled(-1.0)

    def __sub__(self, other: "LaurentSymbol") -> "LaurentSymbol":
        return self + (-other)

    def __matmul__(self, other: "LaurentSymbol") -> "LaurentSymbol":
        """Convolution, i.e. the symbol of the product of the Laurent operators."""
        self._check(other)
        out: dict[int, np.ndarray] = {}
        for i, a in self.diagonals.items():
            for j, b in other.diagonals.items():
                prod = a @ b
                out[i + j] = out[i + j] + prod if i + j in out else prod
        return LaurentSymbol(fiber_dim=self.fiber_dim, diagonals=out)

    def scaled(self, factor: complex) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={k: factor * c for k, c in self.diagonals.items()},
        )

    def adjoint(self) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={-k: c.conj().T for k, c in self.diagonals.items()},
        )

    def transpose(self) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={-k: c.T for k, c in self.diagonals.items()},
        )

    def conjugate(self) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={k: c.conj() for k, c in self.diagonals.items()},
        )

    def reflected(self) -> "LaurentSymbol":
        """Offsets k -> -k with coefficients unchanged (site reversal)."""
        return LaurentSymbol(
            fiber_dim=self.fiber_dim,
            diagonals={-k: c for k, c in self.diagonals.items()},
        )

    def sandwich(self, left: np.ndarray, right: np.ndarray) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=left.shape[0],
            diagonals={k: left @ c @ right for k, c in self.diagonals.items()},
        )

    def kron(self, block: np.ndarray) -> "LaurentSymbol":
        return LaurentSymbol(
            fiber_dim=self.fiber_dim * block.shape[0],
            diagonals={k: np.kron(c, block) for k, c in self.diagonals.items()},
        )

    def evaluate(self, thetas: np.ndarray) -> np.ndarray:
        """Sample the symbol; returns shape (len(thetas), d, d)."""
        thetas = np.asarray(thetas, dtype=float)
        out = np.zeros((thetas.size, self.fiber_dim, self.fiber_dim), dtype=np.complex128)
        for k, c in self.diagonals.items():
            out += np.exp(1j * k * thetas)[:, None, None] * c[None, :, :]
        return out

    def norm_bound(self) -> float:
        """Upper bound on the Laurent operator norm (sum of coefficient norms)."""
        return float(sum(np.linalg.norm(c, 2) for c in self.diagonals.values()))

    def lipschitz(self) -> float:
        """Upper bound on the theta-derivative of the symbol."""
        return float(sum(abs(k) * np.linalg.norm(c, 2) for k, c in self.diagonals.items()))


class LatticeOperator(BaseModel):
    """Banded operator with two limit backgrounds plus a finite perturbation.

    Rows m < 0 use ``left``, rows m >= 0 use ``right``. Half-line operators
    only have sites >= 0 and a zero left symbol.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fiber_dim: int = Field(ge=1)
    domain: Domain = "full"
    left: LaurentSymbol
    right: LaurentSymbol
    window: Window = EMPTY_WINDOW
    perturbation: np.ndarray = Field(
        default_factory=lambda: np.zeros((0, 0), dtype=np.complex128)
    )

    @field_validator("window", mode="before")
    @classmethod
    def _normalize_window(cls, value: Any) -> Window:
        lo, hi = (int(v) for v in value)
        return EMPTY_WINDOW if hi < lo else (lo, hi)

    @field_validator("perturbation", mode="before")
    @classmethod
    def _coerce_perturbation(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=np.complex128)
        if arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2:
            raise ValueError(f"perturbation must be 2-dimensional, got shape {arr.shape}")
        return arr

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        d = self.fiber_dim
        if self.left.fiber_dim != d or self.right.fiber_dim != d:
            raise ValueError("background fiber dimensions must match fiber_dim")
        lo, hi = self.window
        n = hi - lo + 1
        if self.perturbation.shape != (n * d, n * d):
            raise ValueError(
                f"perturbation shape {self.perturbation.shape} does not match window "
                f"{self.window} with fiber {d}"
            )
        if self.domain == "half":
            if not self.left.is_zero:
                raise ValueError("half-line operators have a zero left background")
            if n and lo < 0:
                raise ValueError("half-line windows must start at a site >= 0")
        self.perturbation.setflags(write=False)
        return self

    # -- shape -------------------------------------------------------------

    @property
    def bandwidth(self) -> int:
        return max(self.left.bandwidth, self.right.bandwidth)

    @property
    def window_size(self) -> int:
        return self.window[1] - self.window[0] + 1

    @property
    def is_local(self) -> bool:
        """True when both backgrounds act on-site only."""
        return all(sym.is_local for sym in self.symbols())

    @property
    def is_finite(self) -> bool:
        """True when both backgrounds vanish (the operator is finite rank)."""
        return all(sym.is_zero for sym in self.symbols())

    def symbols(self) -> tuple[LaurentSymbol, ...]:
        return (self.right,) if self.domain == "half" else (self.left, self.right)

    # -- dense views ---------------------------------------------------------

    def dense(self, lo: int, hi: int) -> np.ndarray:
        """Exact matrix of the operator restricted to sites lo..hi."""
        if self.domain == "half" and lo < 0:
            raise ValueError(f"half-line operator has no site {lo}")
        mat = _background_dense(self.fiber_dim, self.domain, self.left, self.right, lo, hi)
        wlo, whi = self.window
        a, b = max(lo, wlo), min(hi, whi)
        if a <= b:
            d = self.fiber_dim
            src = slice((a - wlo) * d, (b - wlo + 1) * d)
            dst = slice((a - lo) * d, (b - lo + 1) * d)
            mat[dst, dst] += self.perturbation[src, src]
        return mat

    def block(self) -> np.ndarray:
        """Dense matrix on the operator's own window."""
        return self.dense(*self.window)

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "LatticeOperator") -> "LatticeOperator":
        return algebra(self, other, "add")

    def __sub__(self, other: "LatticeOperator") -> "LatticeOperator":
        return algebra(self, other.scaled(-1.0), "add")

    def __neg__(self) -> "LatticeOperator":
        return self.scaled(-1.0)

    def __matmul__(self, other: "LatticeOperator") -> "LatticeOperator":
        return algebra(self, other, "mul")

    def __mul__(self, factor: complex) -> "LatticeOperator":
        return self.scaled(factor)

    def __rmul__(self, factor: complex) -> "LatticeOperator":
        return self.scaled(factor)

    def scaled(self, factor: complex) -> "LatticeOperator":
        return self.model_copy(
            update={
                "left": self.left.scaled(factor),
                "right": self.right.scaled(factor),
                "perturbation": _frozen(factor * self.perturbation),
            }
        )

    def adjoint(self) -> "LatticeOperator":
        return star_ops(self, "adjoint")

    def transpose(self) -> "LatticeOperator":
        return star_ops(self, "transpose")

    def conjugate(self) -> "LatticeOperator":
        return star_ops(self, "conjugate")

    def plus_identity(self, factor: complex = 1.0) -> "LatticeOperator":
        return self + identity(self.fiber_dim, self.domain).scaled(factor)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128)
    out.setflags(write=False)
    return out


def _background_dense(
    d: int, domain: Domain, left: LaurentSymbol, right: LaurentSymbol, lo: int, hi: int
) -> np.ndarray:
    n = max(hi - lo + 1, 0)
    blocks = np.zeros((n, n, d, d), dtype=np.complex128)
    rows = np.arange(n)
    sites = lo + rows
    parts: list[tuple[LaurentSymbol, np.ndarray]] = [(right, sites >= 0)]
    if domain == "full":
        parts.append((left, sites < 0))
    for symbol, mask in parts:
        for k, c in symbol.diagonals.items():
            cols = rows - k
            ok = mask & (cols >= 0) & (cols < n)
            if domain == "half":
                ok &= (lo + cols) >= 0
            blocks[rows[ok], cols[ok]] = c
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def _trim(pert: np.ndarray, lo: int, d: int) -> tuple[Window, np.ndarray]:
    n = pert.shape[0] // d
    if n == 0:
        return EMPTY_WINDOW, np.zeros((0, 0), dtype=np.complex128)
    mags = np.abs(pert).reshape(n, d, n, d).max(axis=(1, 3))
    active = np.flatnonzero((mags.max(axis=1) > CHOP) | (mags.max(axis=0) > CHOP))
    if active.size == 0:
        return EMPTY_WINDOW, np.zeros((0, 0), dtype=np.complex128)
    i0, i1 = int(active[0]), int(active[-1])
    return (lo + i0, lo + i1), pert[i0 * d : (i1 + 1) * d, i0 * d : (i1 + 1) * d]


def _from_dense(
    d: int,
    domain: Domain,
    left: LaurentSymbol,
    right: LaurentSymbol,
    lo: int,
    hi: int,
    mat: np.ndarray,
) -> LatticeOperator:
    """Build an operator whose compression to lo..hi is ``mat``.

    The caller guarantees the operator equals the background outside lo..hi.
    """
    if domain == "half":
        left = LaurentSymbol.zero(d)
    pert = mat - _background_dense(d, domain, left, right, lo, hi)
    window, block = _trim(pert, lo, d)
    return LatticeOperator(
        fiber_dim=d, domain=domain, left=left, right=right, window=window, perturbation=block
    )


def _span(*windows: Window) -> Window | None:
    live = [w for w in windows if w[0] <= w[1]]
    if not live:
        return None
    return min(w[0] for w in live), max(w[1] for w in live)


def _work_interval(domain: Domain, windows: Sequence[Window], reach: int) -> Window:
    """Windows plus the junction (or half-line boundary), widened by ``reach``."""
    lo, hi = _span(*windows, (0, 0)) or (0, 0)
    lo -= reach
    hi += reach
    if domain == "half":
        lo = max(lo, 0)
    return lo, hi


def _check_compatible(a: LatticeOperator, b: LatticeOperator) -> None:
    if a.fiber_dim != b.fiber_dim:
        raise DimensionMismatchError(a.fiber_dim, b.fiber_dim)
    if a.domain != b.domain:
        raise DomainMismatchError(a.domain, b.domain)


def algebra(a: LatticeOperator, b: LatticeOperator, kind: AlgebraKind) -> LatticeOperator:
    """Exact sum or product of two operators in the class.

    Backgrounds combine by symbol addition or convolution; every correction
    near the junction and the windows is absorbed into the result's window.

    Raises:
        DimensionMismatchError: If fiber dimensions differ.
        DomainMismatchError: If one operand is full-line and the other half-line.
    """
    _check_compatible(a, b)
    d, domain = a.fiber_dim, a.domain
    if kind == "add":
        span = _span(a.window, b.window)
        left, right = a.left + b.left, a.right + b.right
        if span is None:
            return LatticeOperator(fiber_dim=d, domain=domain, left=left, right=right)
        lo, hi = span
        return _from_dense(d, domain, left, right, lo, hi, a.dense(lo, hi) + b.dense(lo, hi))

    reach = a.bandwidth + b.bandwidth
    lo, hi = _work_interval(domain, (a.window, b.window), 2 * reach + 1)
    ext_lo = lo - reach if domain == "full" else max(lo - reach, 0)
    ext_hi = hi + reach
    prod = a.dense(ext_lo, ext_hi) @ b.dense(ext_lo, ext_hi)
    off = (lo - ext_lo) * d
    size = (hi - lo + 1) * d
    crop = prod[off : off + size, off : off + size]
    return _from_dense(d, domain, a.left @ b.left, a.right @ b.right, lo, hi, crop)


def star_ops(a: LatticeOperator, kind: StarKind) -> LatticeOperator:
    """Adjoint, transpose or entrywise complex conjugate, all exact."""
    if kind == "conjugate":
        return a.model_copy(
            update={
                "left": a.left.conjugate(),
                "right": a.right.conjugate(),
                "perturbation": _frozen(a.perturbation.conj()),
            }
        )
    lo, hi = _work_interval(a.domain, (a.window,), 2 * a.bandwidth + 1)
    mat = a.dense(lo, hi)
    if kind == "adjoint":
        return _from_dense(
            a.fiber_dim, a.domain, a.left.adjoint(), a.right.adjoint(), lo, hi, mat.conj().T
        )
    return _from_dense(
        a.fiber_dim, a.domain, a.left.transpose(), a.right.transpose(), lo, hi, mat.T
    )


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def _local(block: np.ndarray | complex, d: int) -> LaurentSymbol:
    return LaurentSymbol.constant(block, d)


def identity(fiber_dim: int = 1, domain: Domain = "full") -> LatticeOperator:
    return fiber_constant(np.eye(fiber_dim), domain)


def zero_operator(fiber_dim: int = 1, domain: Domain = "full") -> LatticeOperator:
    zero = LaurentSymbol.zero(fiber_dim)
    return LatticeOperator(fiber_dim=fiber_dim, domain=domain, left=zero, right=zero)


def fiber_constant(block: Any, domain: Domain = "full") -> LatticeOperator:
    """The fiber matrix ``block`` acting on every site."""
    arr = np.atleast_2d(np.array(block, dtype=np.complex128))
    d = arr.shape[0]
    sym = _local(arr, d)
    left = sym if domain == "full" else LaurentSymbol.zero(d)
    return LatticeOperator(fiber_dim=d, domain=domain, left=left, right=sym)


def shift(power: int = 1, *, fiber_dim: int = 1, domain: Domain = "full") -> LatticeOperator:
    """Left shift S^power, (S x)_m = x_{m+1}; negative powers give (S*)^|power|."""
    sym = LaurentSymbol(fiber_dim=fiber_dim, diagonals={-power: np.eye(fiber_dim)})
    left = sym if domain == "full" else LaurentSymbol.zero(fiber_dim)
    return LatticeOperator(fiber_dim=fiber_dim, domain=domain, left=left, right=sym)


def finite_operator(
    block: Any, lo: int = 0, *, fiber_dim: int = 1, domain: Domain = "full"
) -> LatticeOperator:
    """Finite-rank operator given by ``block`` on sites lo, lo+1, ..."""
    arr = np.array(block, dtype=np.complex128)
    n = arr.shape[0] // fiber_dim
    zero = LaurentSymbol.zero(fiber_dim)
    window, trimmed = _trim(arr, lo, fiber_dim)
    if n == 0:
        window = EMPTY_WINDOW
    return LatticeOperator(
        fiber_dim=fiber_dim,
        domain=domain,
        left=zero,
        right=zero,
        window=window,
        perturbation=trimmed,
    )


def site_projection(
    site: int = 0, *, fiber_dim: int = 1, domain: Domain = "half"
) -> LatticeOperator:
    """Projection onto the fiber at one site (rank ``fiber_dim``)."""
    return finite_operator(np.eye(fiber_dim), site, fiber_dim=fiber_dim, domain=domain)


def standard_involution(fiber_dim: int = 1) -> LatticeOperator:
    """F = 2*Pi - 1 on the full line: +1 on sites >= 0, -1 on sites < 0."""
    eye = np.eye(fiber_dim)
    return LatticeOperator(
        fiber_dim=fiber_dim,
        domain="full",
        left=_local(-eye, fiber_dim),
        right=_local(eye, fiber_dim),
    )


def half_projection(fiber_dim: int = 1) -> LatticeOperator:
    """Pi: projection onto sites >= 0 of the full line."""
    return LatticeOperator(
        fiber_dim=fiber_dim,
        domain="full",
        left=LaurentSymbol.zero(fiber_dim),
        right=_local(np.eye(fiber_dim), fiber_dim),
    )


def half_line_compression(op: LatticeOperator) -> LatticeOperator:
    """Pi* O Pi as a half-line operator."""
    if op.domain == "half":
        return op
    d = op.fiber_dim
    lo, hi = op.window
    lo = max(lo, 0)
    zero = LaurentSymbol.zero(d)
    if lo > hi:
        return LatticeOperator(fiber_dim=d, domain="half", left=zero, right=op.right)
    return _from_dense(d, "half", zero, op.right, lo, hi, op.dense(lo, hi))


def finite_part(op: LatticeOperator) -> LatticeOperator:
    """The perturbation alone, with both backgrounds dropped."""
    zero = LaurentSymbol.zero(op.fiber_dim)
    return op.model_copy(update={"left": zero, "right": zero})


def fiber_sandwich(op: LatticeOperator, left: Any, right: Any) -> LatticeOperator:
    """L . O . R with fiber matrices L, R applied on every site."""
    lm = np.array(left, dtype=np.complex128)
    rm = np.array(right, dtype=np.complex128)
    d = op.fiber_dim
    n = op.window_size
    p4 = op.perturbation.reshape(n, d, n, d)
    pert = np.einsum("ab,ibjc,cd->iajd", lm, p4, rm).reshape(n * d, n * d)
    return LatticeOperator(
        fiber_dim=d,
        domain=op.domain,
        left=op.left.sandwich(lm, rm) if op.domain == "full" else op.left,
        right=op.right.sandwich(lm, rm),
        window=op.window,
        perturbation=pert,
    )


def kron_fiber(op: LatticeOperator, block: Any) -> LatticeOperator:
    """O tensor M, enlarging the fiber from d to d * dim(M)."""
    m = np.array(block, dtype=np.complex128)
    d, e = op.fiber_dim, m.shape[0]
    n = op.window_size
    p4 = op.perturbation.reshape(n, d, n, d)
    pert = np.einsum("iajb,xy->iaxjby", p4, m).reshape(n * d * e, n * d * e)
    return LatticeOperator(
        fiber_dim=d * e,
        domain=op.domain,
        left=op.left.kron(m),
        right=op.right.kron(m),
        window=op.window,
        perturbation=pert,
    )


def _perturbation_on(op: LatticeOperator, lo: int, hi: int) -> np.ndarray:
    d = op.fiber_dim
    n = hi - lo + 1
    out = np.zeros((n * d, n * d), dtype=np.complex128)
    if op.window_size > 0:
        a = (op.window[0] - lo) * d
        b = a + op.window_size * d
        out[a:b, a:b] = op.perturbation
    return out


def fiber_block_matrix(blocks: Sequence[Sequence[LatticeOperator]]) -> LatticeOperator:
    """Assemble an r x r array of fiber-d operators into one fiber-(r*d) operator."""
    r = len(blocks)
    first = blocks[0][0]
    d, domain = first.fiber_dim, first.domain
    for row in blocks:
        if len(row) != r:
            raise ValueError("block matrix must be square")
        for op in row:
            _check_compatible(first, op)
    offsets_left = {k for row in blocks for op in row for k in op.left.diagonals}
    offsets_right = {k for row in blocks for op in row for k in op.right.diagonals}

    def assemble(side: str, offsets: set[int]) -> LaurentSymbol:
        return LaurentSymbol(
            fiber_dim=r * d,
            diagonals={
                k: np.block([[getattr(op, side).coefficient(k) for op in row] for row in blocks])
                for k in offsets
            },
        )

    span = _span(*(op.window for row in blocks for op in row))
    if span is None:
        window: Window = EMPTY_WINDOW
        pert = np.zeros((0, 0), dtype=np.complex128)
    else:
        lo, hi = span
        n = hi - lo + 1
        out = np.zeros((n, r, d, n, r, d), dtype=np.complex128)
        for p, row in enumerate(blocks):
            for q, op in enumerate(row):
                out[:, p, :, :, q, :] = _perturbation_on(op, lo, hi).reshape(n, d, n, d)
        window, pert = (lo, hi), out.reshape(n * r * d, n * r * d)
    left = assemble("left", offsets_left) if domain == "full" else LaurentSymbol.zero(r * d)
    return LatticeOperator(
        fiber_dim=r * d,
        domain=domain,
        left=left,
        right=assemble("right", offsets_right),
        window=window,
        perturbation=pert,
    )


# ---------------------------------------------------------------------------
# Norms and residuals
# ---------------------------------------------------------------------------


def background_norm(op: LatticeOperator) -> float:
    """Size of the backgrounds; zero exactly when the operator is finite rank."""
    return max((sym.norm_bound() for sym in op.symbols()), default=0.0)


def norm_bound(op: LatticeOperator) -> float:
    """Upper bound on the operator norm."""
    pert = float(np.linalg.norm(op.perturbation, 2)) if op.perturbation.size else 0.0
    return sum(sym.norm_bound() for sym in op.symbols()) + pert


def max_entry(op: LatticeOperator) -> float:
    """Largest matrix entry in absolute value (exact, over the whole lattice)."""
    lo, hi = _work_interval(op.domain, (op.window,), op.bandwidth + 1)
    mat = op.dense(lo, hi)
    return float(np.max(np.abs(mat), initial=0.0))


def distance(a: LatticeOperator, b: LatticeOperator) -> float:
    """Largest entrywise difference between two operators."""
    return max_entry(a - b)


def projection_residual(p: LatticeOperator) -> float:
    return max(norm_bound(p @ p - p), norm_bound(p - p.adjoint()))


# ---------------------------------------------------------------------------
# Symmetries
# ---------------------------------------------------------------------------


class SymmetryContext(BaseModel):
    """Real structure: conjugation in the lattice basis plus fiber matrices J, I.

    J is real orthogonal with J^2 = 1; I (if present) is real orthogonal with
    I^2 = -1, which forces an even fiber dimension.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    j_matrix: np.ndarray
    i_matrix: np.ndarray | None = None

    @field_validator("j_matrix", "i_matrix", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray | None:
        if value is None:
            return None
        arr = np.atleast_2d(np.array(value))
        if np.iscomplexobj(arr):
            if np.any(arr.imag != 0):
                raise ValueError("symmetry matrices must be real")
            arr = arr.real
        return arr.astype(float)

    @model_validator(mode="after")
    def _check_squares(self) -> Self:
        j = self.j_matrix
        eye = np.eye(j.shape[0])
        if not np.array_equal(j @ j.T, eye) or not np.array_equal(j @ j, eye):
            raise ValueError("J must be orthogonal with J^2 = 1")
        if self.i_matrix is not None:
            i = self.i_matrix
            if i.shape != j.shape:
                raise ValueError("I and J must act on the same fiber")
            if not np.array_equal(i @ i.T, eye) or not np.array_equal(i @ i, -eye):
                raise ValueError("I must be orthogonal with I^2 = -1")
        return self

    @property
    def fiber_dim(self) -> int:
        return int(self.j_matrix.shape[0])

    @classmethod
    def standard(cls, fiber_dim: int) -> Self:
        """J = 1 and, for even fibers, I = [[0, -1], [1, 0]] tensor 1."""
        i = None
        if fiber_dim % 2 == 0:
            i = np.kron(np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(fiber_dim // 2))
        return cls(j_matrix=np.eye(fiber_dim), i_matrix=i)

    def lattice_i(self, domain: Domain = "full") -> LatticeOperator:
        if self.i_matrix is None:
            raise ValueError("context has no I")
        return fiber_constant(self.i_matrix, domain)

    def odd_transpose(self, op: LatticeOperator) -> LatticeOperator:
        """I* O^t I."""
        if self.i_matrix is None:
            raise ValueError("context has no I")
        return fiber_sandwich(op.transpose(), self.i_matrix.T, self.i_matrix)


def classify_symmetry(
    op: LatticeOperator, ctx: SymmetryContext, tol: float | None = None
) -> frozenset[SymmetryFlag]:
    """Flags whose defining identity holds within ``tol`` in operator norm.

    even_real:      J* conj(T) J = T
    odd_real:       I* conj(T) I = T
    even_symmetric: J* T^t J = T
    odd_symmetric:  I* T^t I = T
    """
    if ctx.fiber_dim != op.fiber_dim:
        raise DimensionMismatchError(op.fiber_dim, ctx.fiber_dim)
    tol = get_structural_tol() if tol is None else tol
    conj = op.conjugate()
    trans = op.transpose()
    candidates: list[tuple[SymmetryFlag, LatticeOperator, np.ndarray]] = [
        ("even_real", conj, ctx.j_matrix),
        ("even_symmetric", trans, ctx.j_matrix),
    ]
    if ctx.i_matrix is not None:
        candidates += [("odd_real", conj, ctx.i_matrix), ("odd_symmetric", trans, ctx.i_matrix)]
    flags = {
        name
        for name, base, m in candidates
        if norm_bound(fiber_sandwich(base, m.T, m) - op) <= tol
    }
    return frozenset(flags)


# ---------------------------------------------------------------------------
# Fold / unfold
# ---------------------------------------------------------------------------


def _site_reversal(n: int, d: int) -> np.ndarray:
    return (np.arange(n)[::-1, None] * d + np.arange(d)[None, :]).ravel()


def fold(blocks: Sequence[Sequence[LatticeOperator]]) -> LatticeOperator:
    """Realize a 2 x 2 block operator on K + K as one full-line operator.

    Copy-1 site n becomes lattice site n, copy-2 site n becomes site -(n + 1).

    Raises:
        NotCompactError: If an off-diagonal block has a nonzero background.
    """
    (a, b), (c, dd) = blocks
    for op in (a, b, c, dd):
        if op.domain != "half":
            raise DomainMismatchError(op.domain, "half")
        if op.fiber_dim != a.fiber_dim:
            raise DimensionMismatchError(a.fiber_dim, op.fiber_dim)
    for name, op in (("upper-right", b), ("lower-left", c)):
        if not op.is_finite:
            raise NotCompactError(
                f"{name} block has a nonzero background", residual=background_norm(op)
            )
    d = a.fiber_dim
    bw = max(op.bandwidth for op in (a, b, c, dd))
    reach = max(op.window[1] for op in (a, b, c, dd)) + 1
    n = max(reach, 0) + 2 * bw + 2
    rev = _site_reversal(n, d)
    full = np.zeros((2 * n * d, 2 * n * d), dtype=np.complex128)
    lower, upper = slice(0, n * d), slice(n * d, 2 * n * d)
    full[upper, upper] = a.dense(0, n - 1)
    full[upper, lower] = b.dense(0, n - 1)[:, rev]
    full[lower, upper] = c.dense(0, n - 1)[rev, :]
    full[lower, lower] = dd.dense(0, n - 1)[np.ix_(rev, rev)]
    return _from_dense(d, "full", dd.right.reflected(), a.right, -n, n - 1, full)


def unfold(
    op: LatticeOperator,
) -> tuple[tuple[LatticeOperator, LatticeOperator], tuple[LatticeOperator, LatticeOperator]]:
    """Inverse of ``fold``: split a full-line operator into four half-line blocks."""
    if op.domain != "full":
        raise DomainMismatchError(op.domain, "full")
    d = op.fiber_dim
    lo, hi = op.window
    reach = max(abs(lo), hi + 1) if op.window_size else 0
    n = reach + 2 * op.bandwidth + 2
    full = op.dense(-n, n - 1)
    rev = _site_reversal(n, d)
    lower, upper = slice(0, n * d), slice(n * d, 2 * n * d)
    zero = LaurentSymbol.zero(d)
    a = _from_dense(d, "half", zero, op.right, 0, n - 1, full[upper, upper])
    b = _from_dense(d, "half", zero, zero, 0, n - 1, full[upper, lower][:, rev])
    c = _from_dense(d, "half", zero, zero, 0, n - 1, full[lower, upper][rev, :])
    dd = _from_dense(
        d, "half", zero, op.left.reflected(), 0, n - 1, full[lower, lower][np.ix_(rev, rev)]
    )
    return (a, b), (c, dd)


# ---------------------------------------------------------------------------
# Spectral tools
# ---------------------------------------------------------------------------


class WindowCompression(NamedTuple):
    matrix: np.ndarray
    sites: np.ndarray


def window_compression(op: LatticeOperator, margin: int = 0) -> WindowCompression:
    """Dense matrix of ``op`` on its window widened by margin + bandwidth."""
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    lo, hi = op.window
    pad = margin + op.bandwidth
    lo, hi = lo - pad, hi + pad
    if op.domain == "half":
        lo = max(lo, 0)
    if hi < lo:
        return WindowCompression(np.zeros((0, 0), dtype=np.complex128), np.arange(0))
    return WindowCompression(op.dense(lo, hi), np.arange(lo, hi + 1))


def essential_spectrum(op: LatticeOperator, samples: int | None = None) -> np.ndarray:
    """Sampled essential spectrum of a self-adjoint operator (symbol eigenvalues)."""
    samples = get_circle_samples() if samples is None else samples
    thetas = 2 * np.pi * np.arange(samples) / samples
    values = [np.linalg.eigvalsh(sym.evaluate(thetas)).ravel() for sym in op.symbols()]
    return np.sort(np.concatenate(values)) if values else np.zeros(0)


def _check_gap(op: LatticeOperator, gap: tuple[float, float], samples: int | None) -> None:
    samples = get_circle_samples() if samples is None else samples
    # between samples the symbol eigenvalues move by at most slack
    slack = max(sym.lipschitz() for sym in op.symbols()) * math.pi / samples
    ess = essential_spectrum(op, samples)
    low, high = gap
    edge = slack if slack else -CHOP
    inside = ess[(ess > low - edge) & (ess < high + edge)]
    if inside.size:
        raise GapError(gap, [float(v) for v in inside[:3]])


class SpectralCluster(BaseModel):
    """One discrete eigenvalue with its multiplicity and window-supported eigenvectors."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalue: float
    multiplicity: int = Field(ge=1)
    vectors: np.ndarray
    sites: tuple[int, int]


def _cluster(
    values: np.ndarray, vectors: np.ndarray, sites: np.ndarray, tol: float
) -> list[SpectralCluster]:
    clusters: list[SpectralCluster] = []
    bounds = (int(sites[0]), int(sites[-1])) if sites.size else EMPTY_WINDOW
    start = 0
    for idx in range(1, values.size + 1):
        if idx == values.size or values[idx] - values[idx - 1] > tol:
            group = slice(start, idx)
            clusters.append(
                SpectralCluster(
                    eigenvalue=float(np.mean(values[group])),
                    multiplicity=idx - start,
                    vectors=vectors[:, group],
                    sites=bounds,
                )
            )
            start = idx
    return clusters


def _edge_weight(
    vectors: np.ndarray, sites: np.ndarray, d: int, edge: int, open_low: bool
) -> np.ndarray:
    n = sites.size
    per_site = (np.abs(vectors) ** 2).reshape(n, d, -1).sum(axis=1)
    mask = np.zeros(n, dtype=bool)
    mask[n - edge :] = True
    if open_low:
        mask[:edge] = True
    return per_site[mask].sum(axis=0)


def _check_self_adjoint(op: LatticeOperator) -> None:
    residual = norm_bound(op - op.adjoint())
    if residual > get_structural_tol():
        raise NotSelfAdjointError("operator is not self-adjoint", residual=residual)


def discrete_spectrum(
    op: LatticeOperator,
    gap: tuple[float, float],
    tol: float | None = None,
    *,
    margin: int = 0,
    samples: int | None = None,
    max_margin: int | None = None,
) -> list[SpectralCluster]:
    """All eigenvalues of a self-adjoint operator inside the open interval ``gap``.

    With on-site backgrounds the eigenvectors are supported in the window and
    the answer is exact for any margin. Otherwise the window is doubled until
    the gap eigenvalues move less than ``tol``; eigenvectors concentrated on
    the artificial truncation edges are discarded.

    Raises:
        NotSelfAdjointError: If O - O* exceeds the structural tolerance.
        GapError: If the gap meets the essential spectrum.
        ConvergenceError: If the margin limit is reached.
    """
    tol = get_eigen_tol() if tol is None else tol
    low, high = gap
    if not low < high:
        raise ValueError(f"empty gap {gap}")
    _check_self_adjoint(op)
    _check_gap(op, gap, samples)
    d = op.fiber_dim

    if op.is_local:
        comp = window_compression(op, margin)
        if comp.sites.size == 0:
            return []
        w, v = sla.eigh(comp.matrix)
        mask = (w > low) & (w < high)
        return _cluster(w[mask], v[:, mask], comp.sites, tol)

    max_margin = get_max_margin() if max_margin is None else max_margin
    edge = 2 * max(op.bandwidth, 1)
    current = max(margin, 2 * edge)
    previous: np.ndarray | None = None
    iterations = 0
    while current <= max_margin:
        comp = window_compression(op, current)
        w, v = sla.eigh(comp.matrix)
        open_low = not (op.domain == "half" and comp.sites[0] == 0)
        weight = _edge_weight(v, comp.sites, d, edge, open_low)
        mask = (w > low) & (w < high) & (weight < _EDGE_WEIGHT)
        values = w[mask]
        logger.debug("discrete_spectrum margin=%d found %d gap eigenvalues", current, values.size)
        if (
            previous is not None
            and previous.size == values.size
            and (values.size == 0 or float(np.max(np.abs(values - previous))) < tol)
        ):
            return _cluster(values, v[:, mask], comp.sites, tol)
        previous = values
        current *= 2
        iterations += 1
    raise ConvergenceError(
        f"gap eigenvalues did not stabilize up to margin {max_margin}", iterations=iterations
    )


def hermitian_function(
    op: LatticeOperator, fn: Callable[[np.ndarray], np.ndarray]
) -> LatticeOperator:
    """fn(O) for self-adjoint O with on-site backgrounds, computed exactly.

    On-site backgrounds decouple the window from the rest of the lattice, so
    fn acts on the background coefficients and on the window block separately.
    """
    if not op.is_local:
        raise ValueError("functional calculus needs on-site backgrounds")

    def apply(block: np.ndarray) -> np.ndarray:
        if block.size == 0:
            return block
        w, v = sla.eigh(block)
        return (v * fn(w)) @ v.conj().T

    d = op.fiber_dim
    right = _local(apply(op.right.coefficient(0)), d)
    left = _local(apply(op.left.coefficient(0)), d) if op.domain == "full" else op.left
    if op.window_size == 0:
        return LatticeOperator(fiber_dim=d, domain=op.domain, left=left, right=right)
    lo, hi = op.window
    return _from_dense(d, op.domain, left, right, lo, hi, apply(op.dense(lo, hi)))


def negative_projection(op: LatticeOperator, tol: float | None = None) -> LatticeOperator:
    """Spectral projection onto eigenvalues <= 0; |lambda| <= tol counts as 0."""
    tol = get_eigen_tol() if tol is None else tol
    _check_self_adjoint(op)
    return hermitian_function(op, lambda w: (w <= tol).astype(float))


class DefectPair(NamedTuple):
    left: LatticeOperator  # 1 - T*T
    right: LatticeOperator  # 1 - TT*


def defect_operators(op: LatticeOperator, tol: float | None = None) -> DefectPair:
    """Finite defects K_L = 1 - T*T and K_R = 1 - TT*.

    Raises:
        NotEssentiallyUnitaryError: If either defect has a nonzero background.
    """
    tol = get_structural_tol() if tol is None else tol
    one = identity(op.fiber_dim, op.domain)
    k_left = one - op.adjoint() @ op
    k_right = one - op @ op.adjoint()
    residual = max(background_norm(k_left), background_norm(k_right))
    if residual > tol:
        raise NotEssentiallyUnitaryError(
            "defect operators are not finite-window", residual=residual
        )
    return DefectPair(finite_part(k_left), finite_part(k_right))

"""Spectral flow through 0 along norm-continuous paths of self-adjoint operators.

A path is a base operator plus finite-window terms weighted by scalar
profiles, so every node shares the base's on-site backgrounds and its
discrete spectrum is exactly the spectrum of one fixed-window matrix. The
flow is computed by bin counting: on each segment two levels a in (-1, 0)
and b in (0, 1) are chosen in the largest eigenvalue gaps, the segment is
refined until Weyl's inequality keeps every eigenvalue off both levels, and
the segment contributes the change of the count of eigenvalues in (a, 0].
"""

__all__ = [
    "Profile",
    "PathTerm",
    "OperatorPath",
    "UnitaryPath",
    "canonical_path",
    "random_theta_path",
    "odd_reflection",
    "default_steps",
    "spectral_flow",
    "sf_pair",
    "sf_via_pair_index",
    "z2_spectral_flow",
    "z2_flow_of_path",
    "kramers_partner",
    "kramers_check",
    "winding_number",
    "phi_map",
    "phi_equivalence_check",
]

import logging
import math
from collections.abc import Callable
from typing import Literal, Self

import numpy as np
import scipy.linalg as sla
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from specflow.config import get_eigen_tol, get_max_refine, get_rank_tol, get_structural_tol
from specflow.exceptions import (
    ConvergenceError,
    GapError,
    NotCompactError,
    NotProjectionError,
    NotSelfAdjointError,
    PhaseStepError,
    SpectralCollisionError,
    SymmetryError,
)
from specflow.fredholm import pair_index
from specflow.operator_core import (
    EMPTY_WINDOW,
    LatticeOperator,
    SymmetryContext,
    Window,
    background_norm,
    classify_symmetry,
    discrete_spectrum,
    distance,
    fiber_constant,
    finite_operator,
    finite_part,
    hermitian_function,
    identity,
    negative_projection,
    norm_bound,
)
from specflow.types import (
    CurvePoint,
    FlowDiagnostics,
    FlowReport,
    KramersCluster,
    KramersReport,
    PathTag,
    PhiEquivalenceReport,
    SegmentRecord,
)

logger = logging.getLogger(__name__)

type ProfileKind = Literal["linear", "sine", "sine2", "hat"]
type Calculus = Literal["identity", "half_sine"]

_BASE_LIPSCHITZ: dict[str, float] = {"linear": 1.0, "sine": math.pi, "sine2": 2 * math.pi}


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


class Profile(BaseModel):
    """Scalar weight f(s) of a path term.

    The parameter is clamped to [lo, hi], mapped affinely so that
    [start, stop] becomes [0, 1], clamped again, fed to the base shape and
    finally offset by ``shift``.
    """

    model_config = ConfigDict(frozen=True)

    kind: ProfileKind = "linear"
    start: float = 0.0
    stop: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    knots: tuple[float, float, float] | None = None
    shift: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not self.stop > self.start:
            raise ValueError(f"profile needs start < stop, got [{self.start}, {self.stop}]")
        if self.kind == "hat":
            if self.knots is None:
                raise ValueError("hat profile needs knots")
            left, centre, right = self.knots
            if not left <= centre <= right:
                raise ValueError(f"hat knots must be ordered, got {self.knots}")
        return self

    def _shape(self, u: float) -> float:
        match self.kind:
            case "linear":
                return u
            case "sine":
                return math.sin(math.pi * u)
            case "sine2":
                return math.sin(2 * math.pi * u)
        left, centre, right = self.knots  # type: ignore[misc]
        if u < left or u > right:
            return 0.0
        if u <= centre:
            return 1.0 if centre == left else (u - left) / (centre - left)
        return (right - u) / (right - centre)

    def __call__(self, s: float) -> float:
        s = min(max(s, self.lo), self.hi)
        u = min(max((s - self.start) / (self.stop - self.start), 0.0), 1.0)
        return self._shape(u) - self.shift

    @property
    def lipschitz(self) -> float:
        if self.kind == "hat":
            left, centre, right = self.knots  # type: ignore[misc]
            spans = [w for w in (centre - left, right - centre) if w > 0]
            base = 1.0 / min(spans) if spans else 0.0
        else:
            base = _BASE_LIPSCHITZ[self.kind]
        return base / (self.stop - self.start)

    def placed(self, outer: tuple[float, float], inner: tuple[float, float]) -> Self:
        """The same profile read on ``outer`` after mapping it onto ``inner``.

        Outside the image of ``inner`` the profile is frozen at its end values.
        """
        (p, q), (a, b) = outer, inner

        def to_outer(t: float) -> float:
            return p + (q - p) * (t - a) / (b - a)

        return self.model_copy(
            update={
                "start": to_outer(self.start),
                "stop": to_outer(self.stop),
                "lo": to_outer(max(self.lo, a)),
                "hi": to_outer(min(self.hi, b)),
            }
        )


class PathTerm(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    profile: Profile
    operator: LatticeOperator

    @field_validator("operator")
    @classmethod
    def _finite(cls, op: LatticeOperator) -> LatticeOperator:
        if not op.is_finite:
            raise NotCompactError("path terms must be finite-window", residual=background_norm(op))
        return op


def _span(windows: list[Window]) -> Window | None:
    real = [w for w in windows if w[1] >= w[0]]
    if not real:
        return None
    return min(w[0] for w in real), max(w[1] for w in real)


class OperatorPath(BaseModel):
    """s -> F_s = calculus(base + sum_k f_k(s) K_k) sampled on ``grid``.

    ``companion`` is the unitary U of a canonical path, which makes
    F_1 = U* F U checkable. ``tag = "odd"`` paths carry a context with I and
    satisfy I* conj(F_s) I = U F_(1-s) U*.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: LatticeOperator
    terms: tuple[PathTerm, ...] = ()
    grid: tuple[float, ...] = (0.0, 1.0)
    companion: LatticeOperator | None = None
    tag: PathTag = "plain"
    ctx: SymmetryContext | None = None
    calculus: Calculus = "identity"

    @field_validator("grid", mode="before")
    @classmethod
    def _sorted_grid(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        grid = tuple(float(s) for s in value)
        if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            raise ValueError("grid needs at least two strictly increasing nodes")
        return grid

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not self.base.is_local:
            raise ValueError("path base must have on-site backgrounds")
        if self.tag == "odd" and (self.ctx is None or self.ctx.i_matrix is None):
            raise ValueError("odd paths need a symmetry context with I")
        return self

    @property
    def start(self) -> float:
        return self.grid[0]

    @property
    def stop(self) -> float:
        return self.grid[-1]

    @property
    def window(self) -> Window:
        span = _span([self.base.window, *(t.operator.window for t in self.terms)])
        return span if span is not None else EMPTY_WINDOW

    def lipschitz(self) -> float:
        """Bound on ||F_s - F_t|| / |s - t|."""
        total = sum(
            t.profile.lipschitz * float(np.linalg.norm(t.operator.perturbation, 2))
            for t in self.terms
            if t.operator.window_size
        )
        return total * (math.pi / 2 if self.calculus == "half_sine" else 1.0)

    def node(self, s: float) -> LatticeOperator:
        op = self.base
        for term in self.terms:
            weight = term.profile(s)
            if weight:
                op = op + term.operator.scaled(weight)
        if self.calculus == "half_sine":
            op = hermitian_function(op, lambda w: np.sin(np.pi * w / 2))
        return op

    def nodes(self) -> list[LatticeOperator]:
        return [self.node(s) for s in self.grid]

    def refined(self, factor: int = 2) -> Self:
        """Same path with every grid segment split into ``factor`` pieces."""
        fine = [
            a + (b - a) * j / factor
            for a, b in zip(self.grid, self.grid[1:], strict=False)
            for j in range(factor)
        ]
        return self.model_copy(update={"grid": (*fine, self.stop)})

    def restrict(self, a: float, b: float) -> Self:
        if not self.start <= a < b <= self.stop:
            raise ValueError(f"[{a}, {b}] is not inside [{self.start}, {self.stop}]")
        grid = (a, *(s for s in self.grid if a < s < b), b)
        return self.model_copy(update={"grid": grid})

    def concatenate(self, other: "OperatorPath", tol: float | None = None) -> "OperatorPath":
        """self followed by other, reparametrized onto [0, 1/2] and [1/2, 1].

        Raises:
            ValueError: If the end of self is not the start of other, or the
                calculi differ.
        """
        tol = get_structural_tol() if tol is None else tol
        if self.calculus != other.calculus:
            raise ValueError("cannot concatenate paths with different calculi")
        gap = distance(self.node(self.stop), other.node(other.start))
        if gap > tol:
            raise ValueError(f"paths do not meet: endpoint distance {gap:.3e}")
        first, second = (0.0, 0.5), (0.5, 1.0)
        terms = [
            PathTerm(profile=t.profile.placed(first, (self.start, self.stop)), operator=t.operator)
            for t in self.terms
        ]
        for t in other.terms:
            placed = t.profile.placed(second, (other.start, other.stop))
            terms.append(
                PathTerm(
                    profile=placed.model_copy(update={"shift": placed.shift + placed(0.5)}),
                    operator=t.operator,
                )
            )

        def rescale(
            grid: tuple[float, ...], span: tuple[float, float], origin: tuple[float, float]
        ) -> list[float]:
            (p, q), (a, b) = span, origin
            return [p + (q - p) * (s - a) / (b - a) for s in grid]

        grid = rescale(self.grid, first, (self.start, self.stop))
        grid += rescale(other.grid, second, (other.start, other.stop))[1:]
        return OperatorPath(
            base=self.base, terms=tuple(terms), grid=tuple(grid), calculus=self.calculus
        )

    def validate_endpoints(self, tol: float | None = None) -> dict[str, float]:
        """Residuals of the structural identities the path is meant to satisfy."""
        tol = get_structural_tol() if tol is None else tol
        residuals = {
            "self_adjoint": max(
                [norm_bound(self.base - self.base.adjoint())]
                + [norm_bound(t.operator - t.operator.adjoint()) for t in self.terms]
            )
        }
        if self.companion is not None and self.start == 0.0 and self.stop == 1.0:
            u = self.companion
            residuals["start"] = distance(self.node(0.0), self.base)
            residuals["end"] = distance(self.node(1.0), u.adjoint() @ self.base @ u)
        if self.tag == "odd" and self.companion is not None and self.ctx is not None:
            reflect = odd_reflection(self.companion, self.ctx)
            nodes = {round(s, 12): s for s in self.grid}
            worst = 0.0
            for s in self.grid:
                mirror = nodes.get(round(1.0 - s, 12))
                if mirror is not None and s <= mirror:
                    worst = max(worst, distance(self.node(mirror), reflect(self.node(s))))
            residuals["odd_reflection"] = worst
        bad = {k: v for k, v in residuals.items() if v > tol}
        if bad:
            logger.info("path endpoint checks above tolerance: %s", bad)
        return residuals


class UnitaryPath(BaseModel):
    """s -> U_s given by a callable; each node must equal 1 off a finite window."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: tuple[float, ...] = Field(min_length=2)
    evaluate: Callable[[float], LatticeOperator]


# ---------------------------------------------------------------------------
# Path builders
# ---------------------------------------------------------------------------


def _check_involution(f: LatticeOperator, tol: float) -> None:
    residual = norm_bound(f - f.adjoint())
    if residual > tol:
        raise NotSelfAdjointError("F is not self-adjoint", residual=residual)
    residual = norm_bound(f @ f - identity(f.fiber_dim, f.domain))
    if residual > tol:
        raise NotProjectionError("F is not an involution", residual=residual)


def default_steps(generator: LatticeOperator) -> int:
    """max(8, ceil(8 ||K||)) rounded up to an even count so s = 1/2 is a node."""
    norm = float(np.linalg.norm(generator.perturbation, 2)) if generator.window_size else 0.0
    steps = max(8, math.ceil(8 * norm))
    return steps + steps % 2


def _uniform_grid(steps: int) -> tuple[float, ...]:
    return tuple(j / steps for j in range(steps + 1))


def odd_reflection(
    unitary: LatticeOperator, ctx: SymmetryContext
) -> Callable[[LatticeOperator], LatticeOperator]:
    """X -> (IU)* X^t (IU); maps F_s to F_(1-s) on odd canonical paths."""
    iu = ctx.lattice_i(unitary.domain) @ unitary
    iu_adj = iu.adjoint()
    return lambda x: iu_adj @ x.transpose() @ iu


def canonical_path(
    f: LatticeOperator,
    unitary: LatticeOperator,
    steps: int | None = None,
    *,
    tag: PathTag = "plain",
    ctx: SymmetryContext | None = None,
    tol: float | None = None,
) -> OperatorPath:
    """F_s = F + s U*[F, U] from F to U* F U.

    Raises:
        NotSelfAdjointError, NotProjectionError: If F is not a self-adjoint involution.
        NotCompactError: If [F, U] is not finite-window.
    """
    tol = get_structural_tol() if tol is None else tol
    _check_involution(f, tol)
    commutator = f @ unitary - unitary @ f
    residual = background_norm(commutator)
    if residual > tol:
        raise NotCompactError("[F, U] is not finite-window", residual=residual)
    generator = finite_part(unitary.adjoint() @ commutator)
    steps = default_steps(generator) if steps is None else steps + steps % 2
    return OperatorPath(
        base=f,
        terms=(PathTerm(profile=Profile(kind="linear"), operator=generator),),
        grid=_uniform_grid(steps),
        companion=unitary,
        tag=tag,
        ctx=ctx,
    )


def _random_hermitian(rng: np.random.Generator, size: int, strength: float) -> np.ndarray:
    raw = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    herm = (raw + raw.conj().T) / 2
    norm = float(np.linalg.norm(herm, 2))
    return herm * (strength / norm) if norm else herm


def random_theta_path(
    f: LatticeOperator,
    unitary: LatticeOperator,
    seed: int,
    steps: int | None = None,
    *,
    tag: PathTag = "plain",
    ctx: SymmetryContext | None = None,
    strength: float = 0.5,
) -> OperatorPath:
    """Canonical path plus a seeded loop of finite perturbations.

    plain: + sin(pi s) H + sin(2 pi s) H'
    odd:   + sin(pi s) (H + M(H)) + sin(2 pi s) (G - M(G)), M = ``odd_reflection``,
    which keeps the I* conj(F_s) I = U F_(1-s) U* symmetry of the canonical path.
    The endpoints and the spectral flow are unchanged.
    """
    path = canonical_path(f, unitary, steps, tag=tag, ctx=ctx)
    if strength == 0:
        return path
    rng = np.random.default_rng(seed)
    d = f.fiber_dim
    span = _span([t.operator.window for t in path.terms]) or (-1, 0)
    lo, hi = span[0] - 2, span[1] + 2
    if f.domain == "half":
        lo = max(lo, 0)
    size = (hi - lo + 1) * d

    def draw() -> LatticeOperator:
        herm = _random_hermitian(rng, size, strength)
        return finite_operator(herm, lo, fiber_dim=d, domain=f.domain)

    h, g = draw(), draw()
    if tag == "odd":
        if ctx is None:
            raise ValueError("odd paths need a symmetry context")
        reflect = odd_reflection(unitary, ctx)
        h, g = h + reflect(h), g - reflect(g)
    extra = (
        PathTerm(profile=Profile(kind="sine"), operator=finite_part(h)),
        PathTerm(profile=Profile(kind="sine2"), operator=finite_part(g)),
    )
    return path.model_copy(update={"terms": path.terms + extra})


# ---------------------------------------------------------------------------
# Spectral flow engine
# ---------------------------------------------------------------------------


class _NodeSpectra:
    """Eigenvalues of path nodes on the common window, cached by parameter."""

    def __init__(self, path: OperatorPath, tol: float):
        lo, hi = path.window
        if hi < lo:
            lo = hi = 0
        self.window: Window = (lo, hi)
        self.base = path.base.dense(lo, hi)
        self.terms = [(t.profile, t.operator.dense(lo, hi)) for t in path.terms]
        self.half_sine = path.calculus == "half_sine"
        self.lipschitz = path.lipschitz()
        self.tol = tol
        self._cache: dict[float, np.ndarray] = {}

    def __call__(self, s: float) -> np.ndarray:
        cached = self._cache.get(s)
        if cached is not None:
            return cached
        mat = self.base.copy()
        for profile, block in self.terms:
            weight = profile(s)
            if weight:
                mat += weight * block
        w = sla.eigvalsh(mat)
        if self.half_sine:
            w = np.sort(np.sin(np.pi * w / 2))
        w[np.abs(w) <= self.tol] = 0.0
        self._cache[s] = w
        return w


def _largest_gap_midpoint(points: np.ndarray, low: float, high: float) -> float:
    inner = points[(points > low) & (points < high)]
    pts = np.unique(np.concatenate([[low], inner, [high]]))
    gaps = np.diff(pts)
    i = int(np.argmax(gaps))
    return float(pts[i] + pts[i + 1]) / 2


def _count_nonpositive(w: np.ndarray) -> int:
    return int(np.count_nonzero(w <= 0))


def _preflight(path: OperatorPath, tol: float) -> None:
    residual = norm_bound(path.base - path.base.adjoint())
    for term in path.terms:
        residual = max(residual, norm_bound(term.operator - term.operator.adjoint()))
    if residual > tol:
        raise NotSelfAdjointError("path node is not self-adjoint", residual=residual)
    background = np.concatenate(
        [np.linalg.eigvalsh(sym.coefficient(0)) for sym in path.base.symbols()]
    )
    off = background[np.abs(np.abs(background) - 1.0) > tol]
    if off.size:
        raise GapError((-1.0, 1.0), [float(v) for v in off[:3]])


def _run_engine(
    path: OperatorPath, max_refine: int, tol: float
) -> tuple[list[SegmentRecord], _NodeSpectra, int, int]:
    spectra = _NodeSpectra(path, tol)
    segments: list[SegmentRecord] = []
    refinements = 0
    max_level = 0
    stack = [(a, b, 0) for a, b in zip(path.grid, path.grid[1:], strict=False)][::-1]
    while stack:
        t0, t1, level = stack.pop()
        wa, wb = spectra(t0), spectra(t1)
        both = np.concatenate([wa, wb])
        a = _largest_gap_midpoint(both, -1.0, 0.0)
        b = _largest_gap_midpoint(both, 0.0, 1.0)
        clearance = float(np.min(np.abs(np.concatenate([both - a, both - b])), initial=np.inf))
        movement = (t1 - t0) * spectra.lipschitz
        if movement <= clearance / 4:
            contribution = int(np.count_nonzero((wa > a) & (wa <= 0))) - int(
                np.count_nonzero((wb > a) & (wb <= 0))
            )
            segments.append(
                SegmentRecord(start=t0, stop=t1, lower=a, upper=b, contribution=contribution)
            )
            max_level = max(max_level, level)
            continue
        if level >= max_refine:
            raise SpectralCollisionError((t0, t1), level)
        mid = (t0 + t1) / 2
        refinements += 1
        stack.append((mid, t1, level + 1))
        stack.append((t0, mid, level + 1))
    return segments, spectra, refinements, max_level


def spectral_flow(
    path: OperatorPath,
    *,
    max_refine: int | None = None,
    tol: float | None = None,
    check_refinement: bool = True,
) -> FlowReport:
    """Spectral flow of ``path`` through 0; an upward crossing counts +1.

    Equals n_{<=0}(F_start) - n_{<=0}(F_stop) on the common window, with
    eigenvalues within ``tol`` of 0 counted as 0.

    Raises:
        NotSelfAdjointError: If a path term is not self-adjoint.
        GapError: If the base backgrounds are not involutions.
        SpectralCollisionError: If a segment is still unresolved at ``max_refine``.
    """
    max_refine = get_max_refine() if max_refine is None else max_refine
    tol = get_eigen_tol() if tol is None else tol
    _preflight(path, get_structural_tol())

    segments, spectra, refinements, max_level = _run_engine(path, max_refine, tol)
    flow = sum(seg.contribution for seg in segments)
    grid = sorted({s for seg in segments for s in (seg.start, seg.stop)})

    curves: list[CurvePoint] = []
    up = down = 0
    previous: int | None = None
    for s in grid:
        w = spectra(s)
        curves.append(
            CurvePoint(s=s, eigenvalues=[float(v) for v in w[np.abs(w) < 1.0 - tol]])
        )
        count = _count_nonpositive(w)
        if previous is not None:
            delta = previous - count
            up += max(delta, 0)
            down += max(-delta, 0)
        previous = count
    endpoint_count = _count_nonpositive(spectra(path.start)) - _count_nonpositive(
        spectra(path.stop)
    )
    if endpoint_count != flow:
        logger.warning("endpoint count %d disagrees with bin count %d", endpoint_count, flow)

    check: int | None = None
    if check_refinement:
        refined, *_ = _run_engine(path.refined(), max_refine, tol)
        check = sum(seg.contribution for seg in refined)
        if check != flow:
            logger.error("flow %d changed to %d under grid refinement", flow, check)
            raise SpectralCollisionError((path.start, path.stop), max_refine)

    lo, hi = spectra.window
    diagnostics = FlowDiagnostics(
        refinements=refinements,
        max_level=max_level,
        window=spectra.window,
        matrix_size=(hi - lo + 1) * path.base.fiber_dim,
        endpoint_count=endpoint_count,
        upward_crossings=up,
        downward_crossings=down,
        refinement_check=check,
    )
    logger.debug(
        "spectral flow %d over %d segments (%d refinements)", flow, len(segments), refinements
    )
    return FlowReport(
        flow=flow,
        flow_mod2=flow % 2 if path.tag == "odd" else None,
        grid=grid,
        segments=segments,
        curves=curves,
        diagnostics=diagnostics,
    )


def sf_pair(f: LatticeOperator, unitary: LatticeOperator, steps: int | None = None) -> int:
    """Sf(F, U* F U) along the canonical path."""
    return spectral_flow(canonical_path(f, unitary, steps)).flow


def sf_via_pair_index(path: OperatorPath) -> int:
    """Ind(P_start, P_stop) of the negative spectral projections of the endpoints."""
    start = negative_projection(path.node(path.start))
    stop = negative_projection(path.node(path.stop))
    return pair_index(start, stop)


def _require_odd_symmetric(op: LatticeOperator, ctx: SymmetryContext) -> None:
    flags = classify_symmetry(op, ctx)
    if "odd_symmetric" not in flags:
        raise SymmetryError("odd_symmetric", flags)


def z2_flow_of_path(path: OperatorPath) -> int:
    """Spectral flow mod 2 over the first half of an odd path."""
    if path.tag != "odd":
        raise SymmetryError("odd_symmetric")
    return spectral_flow(path.restrict(path.start, (path.start + path.stop) / 2)).flow % 2


def z2_spectral_flow(
    f: LatticeOperator,
    unitary: LatticeOperator,
    ctx: SymmetryContext,
    steps: int | None = None,
) -> int:
    """Sf_2(F, U* F U) for odd symmetric F and U.

    Raises:
        SymmetryError: If F or U is not odd symmetric.
    """
    _require_odd_symmetric(f, ctx)
    _require_odd_symmetric(unitary, ctx)
    return z2_flow_of_path(canonical_path(f, unitary, steps, tag="odd", ctx=ctx))


# ---------------------------------------------------------------------------
# Kramers degeneracy
# ---------------------------------------------------------------------------


def kramers_partner(unitary: LatticeOperator, ctx: SymmetryContext, s: float) -> LatticeOperator:
    """Unitary V with V conj(F_s) = F_s V on the odd canonical path, s in {0, 1/2, 1}."""
    if ctx.i_matrix is None:
        raise ValueError("context has no I")
    i_adj = fiber_constant(ctx.i_matrix.T, unitary.domain)
    if s == 0.0:
        return i_adj
    if s == 0.5:
        return unitary.adjoint() @ i_adj
    if s == 1.0:
        return unitary.adjoint() @ i_adj @ unitary.conjugate()
    raise ValueError(f"no Kramers partner at s = {s}")


def kramers_check(
    op: LatticeOperator,
    ctx: SymmetryContext,
    partner: LatticeOperator,
    tol: float | None = None,
) -> KramersReport:
    """Check that psi and V conj(psi) pair up in every gap eigenspace of ``op``."""
    tol = get_rank_tol() if tol is None else tol
    commutation = norm_bound(op @ partner - partner @ op.conjugate())
    clusters: list[KramersCluster] = []
    d = op.fiber_dim
    for cluster in discrete_spectrum(op, (-1.0, 1.0)):
        lo, hi = cluster.sites
        reach = partner.bandwidth + 1
        wlo = max(lo - reach, 0) if op.domain == "half" else lo - reach
        whi = hi + reach
        offset = (lo - wlo) * d
        size = (whi - wlo + 1) * d
        psi = np.zeros((size, cluster.multiplicity), dtype=np.complex128)
        psi[offset : offset + cluster.vectors.shape[0]] = cluster.vectors
        image = partner.dense(wlo, whi) @ psi.conj()
        pairing = float(np.max(np.abs(np.sum(psi.conj() * image, axis=0)), initial=0.0))
        leftover = image - psi @ (psi.conj().T @ image)
        partner_residual = float(np.max(np.linalg.norm(leftover, axis=0), initial=0.0))
        clusters.append(
            KramersCluster(
                eigenvalue=cluster.eigenvalue,
                multiplicity=cluster.multiplicity,
                pairing_residual=pairing,
                partner_residual=partner_residual,
            )
        )
    report = KramersReport(commutation_residual=commutation, clusters=clusters, tol=tol)
    if not report.all_even:
        logger.info(
            "odd multiplicities in gap: %s",
            [(c.eigenvalue, c.multiplicity) for c in clusters if c.multiplicity % 2],
        )
    return report


# ---------------------------------------------------------------------------
# Winding numbers and the phi map
# ---------------------------------------------------------------------------


def _det_phase_point(upath: UnitaryPath, s: float, tol: float) -> complex:
    op = upath.evaluate(s)
    residual = background_norm(op - identity(op.fiber_dim, op.domain))
    if residual > tol:
        raise NotCompactError("unitary path node is not identity plus finite", residual=residual)
    if op.window_size == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(op.block()))


def winding_number(upath: UnitaryPath, max_refine: int | None = None) -> int:
    """Winding of s -> det(U_s) on each node's window, for a loop U_s - 1 finite.

    Raises:
        PhaseStepError: If a phase step stays >= pi/2 at ``max_refine``.
        ConvergenceError: If the accumulated phase is not a multiple of 2 pi.
    """
    max_refine = get_max_refine() if max_refine is None else max_refine
    tol = get_structural_tol()
    dets: dict[float, complex] = {}

    def det(s: float) -> complex:
        if s not in dets:
            dets[s] = _det_phase_point(upath, s, tol)
        return dets[s]

    total = 0.0
    stack = [(a, b, 0) for a, b in zip(upath.grid, upath.grid[1:], strict=False)][::-1]
    while stack:
        t0, t1, level = stack.pop()
        step = float(np.angle(det(t1) / det(t0)))
        if abs(step) < math.pi / 2:
            total += step
            continue
        if level >= max_refine:
            raise PhaseStepError((t0, t1), step)
        mid = (t0 + t1) / 2
        stack.append((mid, t1, level + 1))
        stack.append((t0, mid, level + 1))
    turns = total / (2 * math.pi)
    if abs(turns - round(turns)) > 1e-6:
        raise ConvergenceError(f"accumulated phase is {turns:.9f} turns, not an integer")
    return round(turns)


def phi_map(op: LatticeOperator) -> LatticeOperator:
    """exp(i pi (F + 1)); maps involutions to 1."""
    return hermitian_function(op, lambda w: np.exp(1j * np.pi * (w + 1)))


def phi_equivalence_check(path: OperatorPath) -> PhiEquivalenceReport:
    """Compare Sf(path) with the winding of s -> phi(F_s) on a path from F to U* F U."""
    report = spectral_flow(path)
    loop = UnitaryPath(grid=tuple(report.grid), evaluate=lambda s: phi_map(path.node(s)))
    return PhiEquivalenceReport(flow=report.flow, winding=winding_number(loop))

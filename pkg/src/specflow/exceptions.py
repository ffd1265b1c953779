"""Custom exception hierarchy for specflow.

All exceptions inherit from SpecflowError, which inherits from Exception.
Each concrete exception stores context attributes for debugging.
"""

__all__ = [
    "SpecflowError",
    "DimensionMismatchError",
    "DomainMismatchError",
    "NotEssentiallyUnitaryError",
    "NotSelfAdjointError",
    "NotContractionError",
    "NotProjectionError",
    "NotCompactError",
    "GapError",
    "ConvergenceError",
    "IllConditionedKernelError",
    "SymmetryError",
    "SpectralCollisionError",
    "PhaseStepError",
    "PairingMismatchError",
    "SerializationError",
    "UnknownCaseError",
    "ConfigurationError",
]


class SpecflowError(Exception):
    """Base exception for all specflow errors.

    All custom exceptions in this package inherit from this base class.
    """


class DimensionMismatchError(SpecflowError):
    """Operands carry different fiber dimensions.

    Attributes:
        left: Fiber dimension of the left operand.
        right: Fiber dimension of the right operand.
    """

    def __init__(self, left: int, right: int):
        super().__init__(f"Fiber dimension mismatch: {left} != {right}")
        self.left = left
        self.right = right


class DomainMismatchError(SpecflowError):
    """Operands live on different lattices (full line vs half line).

    Attributes:
        left: Domain tag of the left operand.
        right: Domain tag of the right operand.
    """

    def __init__(self, left: str, right: str):
        super().__init__(f"Domain mismatch: {left!r} != {right!r}")
        self.left = left
        self.right = right


class NotEssentiallyUnitaryError(SpecflowError):
    """A defect operator 1 - T*T or 1 - TT* is not finite-window.

    Raised when the background symbol of T is not unitary, so the defect has a
    nonzero background and cannot be represented as a finite block.

    Attributes:
        residual: Largest background coefficient of the offending defect.
    """

    def __init__(self, message: str, residual: float = 0.0):
        super().__init__(message)
        self.residual = residual

    def __str__(self) -> str:
        return f"{self.args[0]} | residual={self.residual:.3e}"


class NotSelfAdjointError(SpecflowError):
    """Operator is not self-adjoint within tolerance.

    Attributes:
        residual: Norm of O - O*.
    """

    def __init__(self, message: str, residual: float = 0.0):
        super().__init__(message)
        self.residual = residual

    def __str__(self) -> str:
        return f"{self.args[0]} | residual={self.residual:.3e}"


class NotContractionError(SpecflowError):
    """Operator norm exceeds 1 + tol.

    Attributes:
        norm: The computed operator norm.
    """

    def __init__(self, norm: float):
        super().__init__(f"Operator is not a contraction: norm={norm:.12g}")
        self.norm = norm


class NotProjectionError(SpecflowError):
    """Operator is not an orthogonal projection within tolerance.

    Attributes:
        residual: max(||P^2 - P||, ||P* - P||).
    """

    def __init__(self, message: str, residual: float = 0.0):
        super().__init__(message)
        self.residual = residual


class NotCompactError(SpecflowError):
    """An operator that must be finite-window carries a nonzero background.

    Raised for commutators, off-diagonal dilation blocks and projection
    differences whose Laurent backgrounds do not vanish.

    Attributes:
        residual: Size of the offending background coefficients.
    """

    def __init__(self, message: str, residual: float = 0.0):
        super().__init__(message)
        self.residual = residual

    def __str__(self) -> str:
        return f"{self.args[0]} | residual={self.residual:.3e}"


class GapError(SpecflowError):
    """Requested spectral gap meets the essential spectrum.

    Attributes:
        gap: The requested (low, high) interval.
        essential: Essential spectrum points found inside the gap (a sample).
    """

    def __init__(self, gap: tuple[float, float], essential: list[float] | None = None):
        sample = essential or []
        super().__init__(
            f"Gap ({gap[0]:.6g}, {gap[1]:.6g}) intersects the essential spectrum"
            + (f" near {sample[0]:.6g}" if sample else "")
        )
        self.gap = gap
        self.essential = sample


class ConvergenceError(SpecflowError):
    """Adaptive window enlargement did not converge within its margin limit.

    Attributes:
        iterations: Number of enlargements performed.
    """

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class IllConditionedKernelError(SpecflowError):
    """A defect eigenvalue is too close to 1 to decide kernel membership.

    Attributes:
        eigenvalue: The offending defect eigenvalue.
        tol: The rank tolerance in effect.
    """

    def __init__(self, eigenvalue: float, tol: float):
        super().__init__(
            f"Ill-conditioned kernel: defect eigenvalue {eigenvalue:.15g} lies in "
            f"(1 - 10*tol, 1 - tol) with tol={tol:.1e}"
        )
        self.eigenvalue = eigenvalue
        self.tol = tol


class SymmetryError(SpecflowError):
    """Operator lacks a symmetry flag the operation requires.

    Attributes:
        required: The flag that was required (e.g. "odd_symmetric").
        present: The flags that were found.
    """

    def __init__(self, required: str, present: frozenset[str] | None = None):
        found = sorted(present or ())
        super().__init__(f"Operator is not {required} (flags: {found})")
        self.required = required
        self.present = frozenset(found)


class SpectralCollisionError(SpecflowError):
    """A path segment could not be resolved at the maximal refinement level.

    Attributes:
        segment: The unresolved (s_start, s_end) parameter interval.
        level: The bisection level that was reached.
    """

    def __init__(self, segment: tuple[float, float], level: int):
        super().__init__(
            f"Unresolved eigenvalue collision on segment "
            f"[{segment[0]:.9g}, {segment[1]:.9g}] at refinement level {level}"
        )
        self.segment = segment
        self.level = level


class PhaseStepError(SpecflowError):
    """Determinant phase step stayed >= pi/2 at the maximal refinement level.

    Attributes:
        step: The (s_start, s_end) interval of the offending step.
        phase: The phase increment in radians.
    """

    def __init__(self, step: tuple[float, float], phase: float):
        super().__init__(
            f"Phase step {phase:.6g} rad on [{step[0]:.9g}, {step[1]:.9g}] "
            "not resolvable below pi/2"
        )
        self.step = step
        self.phase = phase


class PairingMismatchError(SpecflowError):
    """An index pairing disagrees with the spectral flow it should equal.

    Attributes:
        kind: Which identity failed ("odd", "even", "z2", ...).
        pairing: The index side of the identity.
        flow: The flow (or winding) side of the identity.
    """

    def __init__(self, kind: str, pairing: int, flow: int):
        super().__init__(f"{kind} pairing mismatch: index={pairing} flow={flow}")
        self.kind = kind
        self.pairing = pairing
        self.flow = flow


class SerializationError(SpecflowError):
    """Failed to decode an operator, corpus or report document.

    Attributes:
        raw: The offending payload (possibly truncated).
    """

    _MAX_RAW_DISPLAY = 200

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw

    def __str__(self) -> str:
        if not self.raw:
            return str(self.args[0])
        raw = self.raw
        if len(raw) > self._MAX_RAW_DISPLAY:
            raw = raw[: self._MAX_RAW_DISPLAY] + "...[truncated]"
        return f"{self.args[0]} | raw='{raw}'"


class UnknownCaseError(SpecflowError):
    """Corpus case id not found.

    Attributes:
        case_id: The id that was requested.
    """

    def __init__(self, case_id: str):
        super().__init__(f"Unknown corpus case: {case_id}")
        self.case_id = case_id


class ConfigurationError(SpecflowError):
    """Configuration validation failed.

    Raised when environment variable or configuration values are invalid.

    Attributes:
        config_key: The configuration key that failed validation (optional).
    """

    def __init__(self, message: str, config_key: str | None = None):
        super().__init__(message)
        self.config_key = config_key

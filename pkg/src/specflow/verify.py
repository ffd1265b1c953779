"""Theorem checks over a corpus.

Each check regenerates the case operators, computes both sides of an
identity and returns a ``CaseResult``. Engine failures become ``error``
results, so one bad case never aborts a run. Cases are verified
concurrently in worker threads, each tagged with its case id for logging.
"""

__all__ = ["CHECKS", "run_case", "verify_corpus"]

import asyncio
import logging
from collections.abc import Callable, Sequence
from datetime import UTC, datetime
from typing import Any

import numpy as np

from specflow.config import get_max_concurrency
from specflow.corpus import build_case
from specflow.correlation import case_context
from specflow.exceptions import PairingMismatchError, SpecflowError
from specflow.flow import (
    canonical_path,
    kramers_check,
    kramers_partner,
    spectral_flow,
    sf_via_pair_index,
    z2_spectral_flow,
)
from specflow.fredholm import fredholm_index, z2_index
from specflow.mapping_cone import (
    even_triangle,
    pairing_odd,
    pairing_sign,
    z2_pairing_identity,
)
from specflow.operator_core import half_projection, standard_involution
from specflow.types import (
    THEOREMS,
    CaseResult,
    CaseStatus,
    Corpus,
    CorpusCase,
    Theorem,
    VerificationSummary,
)

logger = logging.getLogger(__name__)

type CheckOutcome = tuple[CaseStatus, dict[str, Any]]


def _status(ok: bool) -> CaseStatus:
    return "passed" if ok else "failed"


def _matches(value: int, expected: int | None) -> bool:
    return expected is None or value == expected


def check_index_flow(case: CorpusCase) -> CheckOutcome:
    """Sf(F, U* F U) = -Ind(T), also through the pair index of the endpoints."""
    ops = build_case(case)
    f = standard_involution(ops.dilation.fiber_dim)
    index = fredholm_index(ops.contraction)
    path = canonical_path(f, ops.dilation)
    flow = spectral_flow(path).flow
    via_pairs = sf_via_pair_index(path)
    values = {"index": index, "flow": flow, "pair_index_flow": via_pairs}
    ok = flow == -index and via_pairs == flow and _matches(index, case.expected.index)
    return _status(ok), values


def check_z2_index_flow(case: CorpusCase) -> CheckOutcome:
    """Sf_2 of an odd symmetric dilation equals Ind_2(T)."""
    if case.symmetry_class != "odd":
        return "skipped", {"reason": "needs an odd symmetric case"}
    ops = build_case(case)
    f = standard_involution(ops.dilation.fiber_dim)
    z2 = z2_index(ops.contraction, ops.ctx)
    flow2 = z2_spectral_flow(f, ops.dilation, ops.ctx)
    values = {"z2_index": z2, "z2_flow": flow2}
    return _status(z2 == flow2 and _matches(z2, case.expected.z2)), values


def check_odd_pairing(case: CorpusCase) -> CheckOutcome:
    """Ind(PUP + 1 - P) = sign * Sf(F, U* F U)."""
    ops = build_case(case)
    f = standard_involution(ops.dilation.fiber_dim)
    pairing = pairing_odd(f, ops.dilation)
    flow = spectral_flow(canonical_path(f, ops.dilation)).flow
    sign = pairing_sign("odd")
    values = {"pairing": pairing, "flow": flow, "sign": sign}
    return _status(pairing == sign * flow), values


def check_even_pairing(case: CorpusCase) -> CheckOutcome:
    """Ind(Pi U Pi + 1 - Pi) = sign * Sf = sign * winding of the exponential loop."""
    ops = build_case(case)
    p = half_projection(ops.dilation.fiber_dim)
    try:
        pairing, winding, flow = even_triangle(p, ops.dilation)
    except PairingMismatchError as exc:
        return "failed", {"mismatch": str(exc), "pairing": exc.pairing, "flow": exc.flow}
    values = {"pairing": pairing, "winding": winding, "flow": flow, "sign": pairing_sign("even")}
    return "passed", values


def check_z2_pairing(case: CorpusCase) -> CheckOutcome:
    """Ind_2(Pi U Pi + 1 - Pi) = Sf_2(2 Pi - 1, U)."""
    if case.symmetry_class != "odd":
        return "skipped", {"reason": "needs an odd symmetric case"}
    ops = build_case(case)
    p = half_projection(ops.dilation.fiber_dim)
    try:
        pairing, flow2 = z2_pairing_identity(p, ops.dilation, ops.ctx)
    except PairingMismatchError as exc:
        return "failed", {"mismatch": str(exc), "z2_pairing": exc.pairing, "z2_flow": exc.flow}
    return "passed", {"z2_pairing": pairing, "z2_flow": flow2}


def check_kramers(case: CorpusCase) -> CheckOutcome:
    """Even degeneracy at s = 0, 1/2, 1; a crossing at 1/2 when Sf_2 = 1."""
    if case.symmetry_class != "odd":
        return "skipped", {"reason": "needs an odd symmetric case"}
    ops = build_case(case)
    f = standard_involution(ops.dilation.fiber_dim)
    path = canonical_path(f, ops.dilation, tag="odd", ctx=ops.ctx)
    values: dict[str, Any] = {}
    ok = True
    midpoint_degenerate = False
    for s in (0.0, 0.5, 1.0):
        report = kramers_check(path.node(s), ops.ctx, kramers_partner(ops.dilation, ops.ctx, s))
        values[f"s={s:g}"] = {
            "passed": report.passed,
            "multiplicities": [c.multiplicity for c in report.clusters],
        }
        ok = ok and report.passed
        if s == 0.5:
            midpoint_degenerate = report.has_degenerate_gap_eigenvalue()
    flow2 = z2_spectral_flow(f, ops.dilation, ops.ctx)
    values["z2_flow"] = flow2
    if flow2 == 1:
        ok = ok and midpoint_degenerate
    return _status(ok), values


CHECKS: dict[Theorem, Callable[[CorpusCase], CheckOutcome]] = {
    "t31": check_index_flow,
    "t71": check_z2_index_flow,
    "t43": check_odd_pairing,
    "t44": check_even_pairing,
    "z2pair": check_z2_pairing,
    "kramers": check_kramers,
}


def run_case(case: CorpusCase, theorem: Theorem) -> CaseResult:
    """Run one check, turning engine failures into an ``error`` result."""
    try:
        status, values = CHECKS[theorem](case)
    except (SpecflowError, ValueError, np.linalg.LinAlgError) as e:
        logger.exception("%s failed on %s: %s", theorem, case.id, e)
        return CaseResult(
            case_id=case.id,
            theorem=theorem,
            status="error",
            error=str(e),
            error_type=type(e).__name__,
        )
    if status == "failed":
        logger.warning("%s failed on %s: %s", theorem, case.id, values)
    return CaseResult(case_id=case.id, theorem=theorem, status=status, values=values)


async def verify_corpus(
    corpus: Corpus,
    theorems: Sequence[Theorem] = THEOREMS,
    max_concurrency: int | None = None,
) -> VerificationSummary:
    """Run ``theorems`` on every case, ordered by case id then theorem.

    Raises:
        ValueError: If max_concurrency < 1.
    """
    max_concurrency = get_max_concurrency() if max_concurrency is None else max_concurrency
    if max_concurrency < 1:
        raise ValueError(f"max_concurrency must be >= 1, got {max_concurrency}")
    if not corpus.cases:
        logger.warning("corpus is empty; nothing to verify")
    semaphore = asyncio.Semaphore(max_concurrency)

    async def _run_single(case: CorpusCase, theorem: Theorem) -> CaseResult:
        async with semaphore:
            with case_context(case.id):
                return await asyncio.to_thread(run_case, case, theorem)

    results = await asyncio.gather(*[_run_single(c, t) for c in corpus.cases for t in theorems])
    order = {t: i for i, t in enumerate(THEOREMS)}
    ordered = sorted(results, key=lambda r: (r.case_id, order[r.theorem]))
    summary = VerificationSummary(
        corpus_hash=corpus.corpus_hash,
        theorems=list(theorems),
        results=ordered,
        generated_at=datetime.now(UTC).isoformat(),
    )
    logger.info(
        "verification complete: %d passed, %d failed, %d errors, %d skipped",
        summary.passed,
        summary.failed,
        summary.errors,
        summary.skipped,
    )
    return summary

"""Seeded corpus of contractions with closed-form indices, and their dilations.

A case stores only a recipe (family, seed, parameters). ``build_case``
regenerates the half-line contraction T and its dilation U deterministically,
so a corpus file fully determines every operator it describes.
"""

__all__ = [
    "CLASS_FAMILIES",
    "CaseOperators",
    "generate_corpus",
    "corpus_hash",
    "build_case",
    "build_contraction",
    "build_dilation",
    "load_corpus",
    "dump_corpus",
]

import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from pydantic import ValidationError

from specflow.dilation import (
    halmos_dilation,
    odd_symmetric_dilation_u0,
    polar_isometry_dilation,
    randomized_dilation,
)
from specflow.exceptions import SerializationError
from specflow.labels import assign_case_ids
from specflow.mapping_cone import siegel_sample
from specflow.operator_core import (
    LatticeOperator,
    SymmetryContext,
    fiber_block_matrix,
    finite_operator,
    hermitian_function,
    identity,
    shift,
    zero_operator,
)
from specflow.types import (
    SCHEMA_VERSION,
    CaseFamily,
    Corpus,
    CorpusCase,
    DilationKind,
    ExpectedValues,
)

logger = logging.getLogger(__name__)

CLASS_FAMILIES: dict[str, tuple[CaseFamily, ...]] = {
    "shift": ("shift",),
    "plain": ("shift", "polar", "perturbed"),
    "odd": ("odd", "siegel"),
    "all": ("shift", "polar", "perturbed", "odd", "siegel"),
}

_SHIFT_POWERS = (1, 2, 3, 4, -1, -2)
_PLAIN_DILATIONS: tuple[DilationKind, ...] = ("halmos", "polar", "randomized")


class CaseOperators(NamedTuple):
    contraction: LatticeOperator
    dilation: LatticeOperator
    ctx: SymmetryContext


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _draft(family: CaseFamily, index: int, rng: np.random.Generator) -> CorpusCase:
    seed = int(rng.integers(0, 2**31 - 1))
    dilation: DilationKind
    match family:
        case "shift":
            power = _SHIFT_POWERS[(index // len(_PLAIN_DILATIONS)) % len(_SHIFT_POWERS)]
            dilation = _PLAIN_DILATIONS[index % len(_PLAIN_DILATIONS)]
            return CorpusCase(
                id=family,
                seed=seed,
                family=family,
                shift_power=power,
                dilation=dilation,
                expected=ExpectedValues(index=power, flow=-power),
            )
        case "polar" | "perturbed":
            power = int(rng.integers(-2, 4))
            return CorpusCase(
                id=family,
                seed=seed,
                family=family,
                shift_power=power,
                perturbation_rank=int(rng.integers(1, 4)),
                polar_strength=float(rng.uniform(0.0, 1.0)),
                dilation=_PLAIN_DILATIONS[index % len(_PLAIN_DILATIONS)],
                expected=ExpectedValues(index=power, flow=-power),
            )
    if family == "odd":
        power = int(rng.integers(1, 4))
        u0 = power == 1 and index % 2 == 0
        rank = 0 if u0 else int(rng.integers(0, 3))
        dilation = "u0" if u0 else "halmos"
    else:
        power = int(rng.integers(0, 4))
        rank = int(rng.integers(0, 3))
        dilation = "halmos"
    return CorpusCase(
        id=family,
        seed=seed,
        family=family,
        shift_power=power,
        perturbation_rank=rank,
        polar_strength=float(rng.uniform(0.1, 0.5)) if rank else 0.0,
        symmetry_class="odd",
        dilation=dilation,
        expected=ExpectedValues(index=0, z2=power % 2, flow=0, z2_flow=power % 2),
    )


def corpus_hash(cases: list[CorpusCase]) -> str:
    payload = json.dumps([c.model_dump(mode="json") for c in cases], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def generate_corpus(count: int, seed: int, classes: str = "all") -> Corpus:
    """``count`` cases cycling through the families of ``classes``.

    Raises:
        ValueError: If ``classes`` is unknown or ``count`` is negative.
    """
    if classes not in CLASS_FAMILIES:
        raise ValueError(f"unknown classes {classes!r}; choose from {sorted(CLASS_FAMILIES)}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    families = CLASS_FAMILIES[classes]
    rng = np.random.default_rng(seed)
    drafts = [_draft(families[i % len(families)], i // len(families), rng) for i in range(count)]
    cases = assign_case_ids(drafts)
    logger.info("generated %d cases (classes=%s, seed=%d)", len(cases), classes, seed)
    return Corpus(
        schema_version=SCHEMA_VERSION,
        seed=seed,
        classes=list(families),
        cases=cases,
        corpus_hash=corpus_hash(cases),
    )


def dump_corpus(corpus: Corpus, path: Path) -> None:
    path.write_text(corpus.model_dump_json(indent=2) + "\n")


def load_corpus(path: Path) -> Corpus:
    """Read a corpus file.

    Raises:
        SerializationError: If the file is not a valid corpus document.
    """
    text = path.read_text()
    try:
        corpus = Corpus.model_validate_json(text)
    except ValidationError as exc:
        raise SerializationError(f"invalid corpus file {path}: {exc}", raw=text[:200]) from exc
    if corpus.schema_version != SCHEMA_VERSION:
        raise SerializationError(
            f"unsupported corpus schema version {corpus.schema_version}", raw=text[:200]
        )
    return corpus


# ---------------------------------------------------------------------------
# Operator construction
# ---------------------------------------------------------------------------


def _orthonormal(rng: np.random.Generator, size: int, rank: int) -> np.ndarray:
    raw = rng.standard_normal((size, rank)) + 1j * rng.standard_normal((size, rank))
    q, _ = np.linalg.qr(raw)
    return q


def _finite_rotation(rng: np.random.Generator, size: int, fiber_dim: int) -> LatticeOperator:
    """exp(iH) with H a random Hermitian block on half-line sites 0..size/d - 1."""
    raw = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    herm = finite_operator((raw + raw.conj().T) / 2, 0, fiber_dim=fiber_dim, domain="half")
    return hermitian_function(herm, lambda w: np.exp(1j * w))


def _plain_contraction(case: CorpusCase, rng: np.random.Generator) -> LatticeOperator:
    t = shift(case.shift_power, domain="half")
    if case.family == "shift" or case.perturbation_rank == 0:
        return t
    radius = case.perturbation_rank + 3
    vecs = _orthonormal(rng, radius, case.perturbation_rank)
    weights = np.where(
        rng.random(case.perturbation_rank) < 0.3,
        1.0,
        rng.uniform(0.2, 0.8, case.perturbation_rank),
    )
    damping = (vecs * weights) @ vecs.conj().T
    m = identity(1, "half") - finite_operator(case.polar_strength * damping, 0, domain="half")
    t = t @ m
    if case.family == "perturbed":
        t = _finite_rotation(rng, radius, 1) @ t @ _finite_rotation(rng, radius, 1)
    return t


def _odd_contraction(
    case: CorpusCase, rng: np.random.Generator, ctx: SymmetryContext
) -> LatticeOperator:
    n = case.shift_power
    sn = shift(n, domain="half")
    one = identity(1, "half")
    z = zero_operator(1, "half")
    if case.perturbation_rank:
        radius = case.perturbation_rank + 3
        vecs = _orthonormal(rng, 2 * radius, case.perturbation_rank)
        damping = finite_operator(
            case.polar_strength * (vecs @ vecs.conj().T), 0, fiber_dim=2, domain="half"
        )
        b = _finite_rotation(rng, 2 * radius, 2) @ (identity(2, "half") - damping)
    else:
        b = identity(2, "half")
    if case.family == "odd":
        core = fiber_block_matrix([[sn, z], [z, shift(-n, domain="half")]])
        return ctx.odd_transpose(b) @ core @ b
    return siegel_sample(fiber_block_matrix([[sn, z], [z, one]]) @ b, ctx)


def build_contraction(case: CorpusCase) -> tuple[LatticeOperator, SymmetryContext]:
    """Regenerate the half-line contraction T of a case."""
    rng = np.random.default_rng(case.seed)
    if case.symmetry_class == "odd":
        ctx = SymmetryContext.standard(2)
        return _odd_contraction(case, rng, ctx), ctx
    return _plain_contraction(case, rng), SymmetryContext.standard(1)


def build_dilation(case: CorpusCase, contraction: LatticeOperator) -> LatticeOperator:
    match case.dilation:
        case "halmos":
            return halmos_dilation(contraction)
        case "polar":
            return polar_isometry_dilation(contraction)
        case "randomized":
            return randomized_dilation(contraction, seed=case.seed)
        case "u0":
            return odd_symmetric_dilation_u0()


@lru_cache(maxsize=128)
def build_case(case: CorpusCase) -> CaseOperators:
    """Contraction, dilation and symmetry context of a case (cached per case)."""
    contraction, ctx = build_contraction(case)
    dilation = build_dilation(case, contraction)
    logger.debug(
        "built %s: T window=%s, U window=%s", case.id, contraction.window, dilation.window
    )
    return CaseOperators(contraction, dilation, ctx)

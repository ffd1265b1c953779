"""Command-line surface: gen, verify, curves, report, export.

Exit codes: 0 when every check passed or was skipped, 1 when a check
failed, 2 on engine, input or I/O errors.
"""

__all__ = ["build_parser", "run"]

import argparse
import asyncio
import csv
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from specflow.corpus import (
    CLASS_FAMILIES,
    CaseOperators,
    build_case,
    dump_corpus,
    generate_corpus,
    load_corpus,
)
from specflow.exceptions import SpecflowError, UnknownCaseError
from specflow.flow import canonical_path, random_theta_path, spectral_flow
from specflow.operator_core import standard_involution
from specflow.serialization import dumps_operators
from specflow.types import THEOREMS, Corpus, CorpusCase, Theorem, VerificationSummary
from specflow.verify import verify_corpus

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specflow",
        description="Spectral flow, Fredholm index and index pairing checks on lattice operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a seeded corpus of test cases.")
    gen.add_argument("--count", type=int, default=12)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--classes", choices=sorted(CLASS_FAMILIES), default="all")
    gen.add_argument("--out", type=Path, required=True)

    verify = sub.add_parser("verify", help="Check theorems on every case of a corpus.")
    verify.add_argument("--corpus", type=Path, required=True)
    verify.add_argument(
        "--theorem",
        action="append",
        choices=THEOREMS,
        help="Theorem to check; repeatable. Defaults to all.",
    )
    verify.add_argument("--out", type=Path, required=True)
    verify.add_argument("--max-concurrency", type=int, default=None)

    curves = sub.add_parser("curves", help="Write the eigenvalue curves of one case as CSV.")
    curves.add_argument("--corpus", type=Path, required=True)
    curves.add_argument("--case", required=True)
    curves.add_argument("--path", choices=["canonical", "random"], default="canonical")
    curves.add_argument("--seed", type=int, default=0)
    curves.add_argument("--out", type=Path, required=True)

    report = sub.add_parser("report", help="Run every theorem and write a JSON summary.")
    report.add_argument("--corpus", type=Path, required=True)
    report.add_argument("--out", type=Path, required=True)
    report.add_argument("--max-concurrency", type=int, default=None)

    export = sub.add_parser(
        "export", help="Write the contraction and dilation of one case as operator JSON."
    )
    export.add_argument("--corpus", type=Path, required=True)
    export.add_argument("--case", required=True)
    export.add_argument("--out", type=Path, required=True)
    return parser


def _write_summary(summary: VerificationSummary, path: Path, *, with_breakdown: bool) -> None:
    doc = summary.model_dump(mode="json")
    if with_breakdown:
        doc["per_theorem"] = summary.per_theorem()
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cmd_gen(args: argparse.Namespace) -> int:
    corpus = generate_corpus(args.count, args.seed, args.classes)
    dump_corpus(corpus, args.out)
    print(f"wrote {len(corpus.cases)} cases to {args.out}")
    return EXIT_OK


def _verify(
    corpus: Corpus, theorems: Sequence[Theorem], max_concurrency: int | None
) -> VerificationSummary:
    return asyncio.run(verify_corpus(corpus, theorems, max_concurrency))


def _cmd_verify(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    theorems: list[Theorem] = args.theorem or list(THEOREMS)
    summary = _verify(corpus, theorems, args.max_concurrency)
    _write_summary(summary, args.out, with_breakdown=False)
    print(
        f"{summary.passed} passed, {summary.failed} failed, "
        f"{summary.errors} errors, {summary.skipped} skipped"
    )
    return summary.exit_code


def _load_case(args: argparse.Namespace) -> tuple[CorpusCase, CaseOperators]:
    case = load_corpus(args.corpus).get(args.case)
    if case is None:
        raise UnknownCaseError(args.case)
    return case, build_case(case)


def _cmd_curves(args: argparse.Namespace) -> int:
    case, ops = _load_case(args)
    f = standard_involution(ops.dilation.fiber_dim)
    tag = "odd" if case.symmetry_class == "odd" else "plain"
    ctx = ops.ctx if tag == "odd" else None
    if args.path == "canonical":
        path = canonical_path(f, ops.dilation, tag=tag, ctx=ctx)
    else:
        path = random_theta_path(f, ops.dilation, args.seed, tag=tag, ctx=ctx)
    report = spectral_flow(path)
    with args.out.open("w", newline="") as fh:
        csv.writer(fh).writerows(report.to_csv_rows())
    print(f"flow {report.flow} over {len(report.curves)} nodes written to {args.out}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    summary = _verify(corpus, THEOREMS, args.max_concurrency)
    _write_summary(summary, args.out, with_breakdown=True)
    for theorem, counts in summary.per_theorem().items():
        print(f"{theorem:8s} " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return summary.exit_code


def _cmd_export(args: argparse.Namespace) -> int:
    case, ops = _load_case(args)
    args.out.write_text(
        dumps_operators({"contraction": ops.contraction, "dilation": ops.dilation})
    )
    print(f"wrote operators of {case.id} to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "verify": _cmd_verify,
    "curves": _cmd_curves,
    "report": _cmd_report,
    "export": _cmd_export,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run the chosen command, returning the exit code."""
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecflowError, ValueError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

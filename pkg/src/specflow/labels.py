"""Case id assignment for generated corpora.

Keeps the first case of each family under the bare family name and
renames later collisions with -N suffixes.
"""

__all__ = ["assign_case_ids", "next_available_id"]

from specflow.types import CorpusCase


def next_available_id(base: str, reserved: set[str]) -> str:
    """Return the first available id derived from base, avoiding reserved names.

    Returns base if available, otherwise base-2, base-3, etc.
    """
    if base not in reserved:
        return base
    n = 2
    while f"{base}-{n}" in reserved:
        n += 1
    return f"{base}-{n}"


def assign_case_ids(cases: list[CorpusCase]) -> list[CorpusCase]:
    """Make case ids unique in order of appearance."""
    reserved: set[str] = set()
    result: list[CorpusCase] = []
    for case in cases:
        case_id = next_available_id(case.id, reserved)
        reserved.add(case_id)
        result.append(case if case_id == case.id else case.model_copy(update={"id": case_id}))
    return result

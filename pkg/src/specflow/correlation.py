"""Corpus case correlation for concurrent verification log disambiguation.

Uses a contextvars.ContextVar so the case id propagates through
asyncio.to_thread workers without modifying function signatures. The
CorrelationFilter injects ``req_id`` into every log record for the
formatter to consume.

Usage:
    with case_context("shift-3"):
        ...                          # all downstream logs include req_id=shift-3
"""

__all__ = ["CorrelationFilter", "case_context", "correlation_id", "set_correlation_id"]

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar, Token

correlation_id: ContextVar[str] = ContextVar("correlation_id", default="-")


def set_correlation_id(case_id: str) -> Token[str]:
    """Store the case id in the ContextVar.

    Returns the token for resetting after the case completes.
    """
    return correlation_id.set(case_id)


@contextmanager
def case_context(case_id: str) -> Iterator[None]:
    """Tag every log record emitted inside the block with ``case_id``."""
    token = set_correlation_id(case_id)
    try:
        yield
    finally:
        correlation_id.reset(token)


class CorrelationFilter(logging.Filter):
    """Logging filter that injects ``req_id`` into every log record.

    Attach to a handler. The formatter can then use ``%(req_id)s`` to
    include the case id in output.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        record.req_id = correlation_id.get()
        return True

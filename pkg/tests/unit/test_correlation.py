"""Tests for case id correlation propagation."""

import asyncio
import logging

from specflow.correlation import CorrelationFilter, case_context, correlation_id, set_correlation_id


class TestCorrelationId:
    """Tests for correlation_id ContextVar."""

    def test_default_is_dash(self):
        """No correlation ID set returns '-'."""
        assert correlation_id.get() == "-"

    def test_set_and_get(self):
        """set_correlation_id stores the case id."""
        token = set_correlation_id("shift-2")
        assert correlation_id.get() == "shift-2"
        correlation_id.reset(token)

    def test_reset_restores_default(self):
        """Resetting token restores default '-'."""
        token = set_correlation_id("polar")
        correlation_id.reset(token)
        assert correlation_id.get() == "-"


class TestCaseContext:
    """Tests for the case_context() context manager."""

    def test_sets_and_restores(self):
        with case_context("odd-3"):
            assert correlation_id.get() == "odd-3"
        assert correlation_id.get() == "-"

    def test_restores_on_exception(self):
        try:
            with case_context("siegel"):
                raise RuntimeError("boom")
        except RuntimeError:
            pass
        assert correlation_id.get() == "-"

    async def test_propagates_into_worker_threads(self):
        """asyncio.to_thread copies the context, so workers see the case id."""
        with case_context("shift-4"):
            seen = await asyncio.to_thread(correlation_id.get)
        assert seen == "shift-4"


class TestCorrelationFilter:
    """Tests for CorrelationFilter logging filter."""

    def test_adds_req_id_to_record(self):
        """Filter injects req_id attribute into log records."""
        filt = CorrelationFilter()
        record = logging.LogRecord("test", logging.INFO, "", 0, "msg", (), None)
        with case_context("perturbed"):
            result = filt.filter(record)
        assert result is True
        assert record.req_id == "perturbed"  # type: ignore[attr-defined]

    def test_default_req_id_is_dash(self):
        """When no case id is set, req_id is '-'."""
        filt = CorrelationFilter()
        record = logging.LogRecord("test", logging.INFO, "", 0, "msg", (), None)
        filt.filter(record)
        assert record.req_id == "-"  # type: ignore[attr-defined]

# tests/unit/conftest.py
"""Shared fixtures for unit tests.

Fixtures from tests/conftest.py (ctx2, bilateral_shift, involution) are
available here automatically via pytest's fixture inheritance.
"""

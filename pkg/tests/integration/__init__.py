"""Integration tests: theorem suites over generated corpora."""

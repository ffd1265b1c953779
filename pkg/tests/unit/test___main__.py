# tests/unit/test___main__.py
"""Tests for the Python version check and entry point in __main__.py."""

from unittest.mock import patch

import pytest

from specflow.__main__ import _check_python_version, main


class TestCheckPythonVersion:
    """Tests for _check_python_version()."""

    def test_exits_on_old_python(self):
        """Simulates Python 3.11 to trigger the version warning."""
        fake_version = (3, 11, 0, "final", 0)
        with (
            patch.object(__import__("sys"), "version_info", fake_version),
            pytest.raises(SystemExit) as exc_info,
        ):
            _check_python_version()

        message = str(exc_info.value)
        assert "requires Python 3.13+" in message
        assert "running Python 3.11" in message
        assert "uvx specflow" in message

    def test_passes_on_current_python(self):
        """No exit when running on a supported Python version."""
        _check_python_version()  # Should not raise

    def test_passes_when_no_requires_python(self):
        """Gracefully handles missing Requires-Python metadata."""
        with patch("importlib.metadata.metadata", return_value={}):
            _check_python_version()  # Should not raise


class TestMain:
    """Tests for main()."""

    def test_version_flag(self, capsys):
        """--version prints the package version without running a command."""
        main(["--version"])
        assert capsys.readouterr().out.startswith("specflow ")

    def test_exit_code_comes_from_cli(self):
        """main() exits with the code returned by the CLI."""
        with (
            patch("specflow.cli.run", return_value=1) as run,
            pytest.raises(SystemExit) as exc_info,
        ):
            main(["verify", "--corpus", "c.json", "--out", "r.json"])
        assert exc_info.value.code == 1
        run.assert_called_once_with(["verify", "--corpus", "c.json", "--out", "r.json"])

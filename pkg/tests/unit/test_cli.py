"""Tests for the gen / verify / curves / report / export commands."""

import csv
import json

import pytest

from specflow.cli import EXIT_ERROR, EXIT_OK, build_parser, run
from specflow.dilation import halmos_dilation, validate_dilation
from specflow.operator_core import distance, shift
from specflow.serialization import loads_operators
from tests.fixtures import ATOL


def _case_args(command, corpus, case, out):
    return [command, "--corpus", str(corpus), "--case", case, "--out", str(out)]


@pytest.fixture
def shift_corpus(tmp_path):
    """Two-case corpus of S with Halmos and polar dilations."""
    path = tmp_path / "corpus.json"
    argv = ["gen", "--count", "2", "--seed", "1", "--classes", "shift", "--out", str(path)]
    assert run(argv) == EXIT_OK
    return path


class TestParser:
    """Tests for build_parser()."""

    def test_defaults(self):
        args = build_parser().parse_args(["gen", "--out", "c.json"])
        assert (args.count, args.seed, args.classes) == (12, 0, "all")

    def test_theorem_is_repeatable(self):
        args = build_parser().parse_args(
            ["verify", "--corpus", "c.json", "--out", "r.json"]
            + ["--theorem", "t31", "--theorem", "t43"]
        )
        assert args.theorem == ["t31", "t43"]

    def test_unknown_theorem_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["verify", "--corpus", "c", "--out", "r", "--theorem", "t99"])

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestGen:
    """Tests for the gen command."""

    def test_writes_corpus(self, shift_corpus, capsys):
        doc = json.loads(shift_corpus.read_text())
        assert [c["id"] for c in doc["cases"]] == ["shift", "shift-2"]
        assert doc["corpus_hash"]

    def test_reports_count(self, tmp_path, capsys):
        run(["gen", "--count", "3", "--out", str(tmp_path / "c.json")])
        assert "wrote 3 cases" in capsys.readouterr().out

    def test_negative_count_is_an_error(self, tmp_path, capsys):
        assert run(["gen", "--count", "-1", "--out", str(tmp_path / "c.json")]) == EXIT_ERROR
        assert "count must be >= 0" in capsys.readouterr().err


class TestVerify:
    """Tests for the verify command."""

    def test_selected_theorem(self, shift_corpus, tmp_path, capsys):
        out = tmp_path / "results.json"
        code = run(["verify", "--corpus", str(shift_corpus), "--theorem", "t31", "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["theorems"] == ["t31"]
        assert {r["status"] for r in doc["results"]} == {"passed"}
        assert "per_theorem" not in doc
        assert "2 passed, 0 failed" in capsys.readouterr().out

    def test_missing_corpus_is_an_error(self, tmp_path):
        missing = str(tmp_path / "none.json")
        code = run(["verify", "--corpus", missing, "--out", str(tmp_path / "r.json")])
        assert code == EXIT_ERROR

    def test_failed_check_exits_one(self, tmp_path):
        corpus = tmp_path / "corpus.json"
        run(["gen", "--count", "1", "--classes", "shift", "--out", str(corpus)])
        doc = json.loads(corpus.read_text())
        doc["cases"][0]["expected"]["index"] = 7
        corpus.write_text(json.dumps(doc))
        out = tmp_path / "r.json"
        assert run(["verify", "--corpus", str(corpus), "--theorem", "t31", "--out", str(out)]) == 1


class TestCurves:
    """Tests for the curves command."""

    def test_writes_csv(self, shift_corpus, tmp_path):
        out = tmp_path / "curves.csv"
        assert run(_case_args("curves", shift_corpus, "shift", out)) == EXIT_OK
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "s"
        assert float(rows[1][0]) == 0.0
        assert float(rows[-1][0]) == 1.0

    def test_random_path(self, shift_corpus, tmp_path, capsys):
        out = tmp_path / "curves.csv"
        argv = _case_args("curves", shift_corpus, "shift-2", out)
        assert run([*argv, "--path", "random", "--seed", "4"]) == EXIT_OK
        assert "flow -1" in capsys.readouterr().out

    def test_unknown_case(self, shift_corpus, tmp_path, capsys):
        out = tmp_path / "curves.csv"
        assert run(_case_args("curves", shift_corpus, "nope", out)) == EXIT_ERROR
        assert "nope" in capsys.readouterr().err


class TestReport:
    """Tests for the report command."""

    def test_breakdown(self, shift_corpus, tmp_path, capsys):
        out = tmp_path / "report.json"
        argv = ["report", "--corpus", str(shift_corpus), "--out", str(out)]
        assert run([*argv, "--max-concurrency", "2"]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["per_theorem"]["t31"]["passed"] == 2
        assert doc["per_theorem"]["kramers"]["skipped"] == 2
        assert doc["errors"] == 0
        assert "t44" in capsys.readouterr().out


class TestExport:
    """Tests for the export command."""

    def test_writes_contraction_and_dilation(self, shift_corpus, tmp_path, capsys):
        out = tmp_path / "shift.json"
        assert run(_case_args("export", shift_corpus, "shift", out)) == EXIT_OK
        ops = loads_operators(out.read_text())
        assert sorted(ops) == ["contraction", "dilation"]
        t = shift(1, domain="half")
        assert distance(ops["contraction"], t) < ATOL
        assert distance(ops["dilation"], halmos_dilation(t)) < ATOL
        assert validate_dilation(ops["dilation"], ops["contraction"]).passed
        assert "wrote operators of shift" in capsys.readouterr().out

    def test_unknown_case(self, shift_corpus, tmp_path):
        out = tmp_path / "x.json"
        assert run(_case_args("export", shift_corpus, "missing", out)) == EXIT_ERROR
        assert not out.exists()

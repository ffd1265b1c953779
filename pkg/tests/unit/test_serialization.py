"""Tests for the lattice operator JSON codec."""

import json

import numpy as np
import pytest

from specflow.exceptions import SerializationError
from specflow.operator_core import distance, finite_operator, shift, standard_involution
from specflow.serialization import (
    dumps_operator,
    dumps_operators,
    loads_operator,
    loads_operators,
    operator_from_dict,
    operator_to_dict,
)
from tests.fixtures import load_operator_fixture


class TestOperatorToDict:
    """Tests for operator_to_dict()."""

    def test_shift_document(self):
        doc = operator_to_dict(shift(1))
        assert doc["fiber_dim"] == 1
        assert doc["domain"] == "full"
        assert doc["right_diagonals"] == {"-1": [[1.0, 0.0]]}
        assert doc["window"] == [0, -1]
        assert doc["perturbation"] == []

    def test_complex_entries_become_pairs(self):
        doc = operator_to_dict(finite_operator([[2 - 3j]], 4))
        assert doc["window"] == [4, 4]
        assert doc["perturbation"] == [[2.0, -3.0]]


class TestDecode:
    """Tests for operator_from_dict() and loads_operator()."""

    def test_round_trip_preserves_operator(self):
        bump = finite_operator(np.arange(16).reshape(4, 4) * 1j, -1, fiber_dim=2)
        op = standard_involution(2) + bump
        assert distance(loads_operator(dumps_operator(op)), op) == 0.0

    def test_missing_field(self):
        with pytest.raises(SerializationError, match="missing field 'fiber_dim'"):
            operator_from_dict({"window": [0, -1]})

    def test_wrong_pair_count(self):
        doc = operator_to_dict(finite_operator([[1.0]], 0))
        doc["perturbation"] = [[1.0, 0.0], [2.0, 0.0]]
        with pytest.raises(SerializationError, match="expected 1 complex pairs"):
            operator_from_dict(doc)

    def test_non_integer_offset(self):
        doc = operator_to_dict(shift(1))
        doc["right_diagonals"] = {"left": [[1.0, 0.0]]}
        with pytest.raises(SerializationError, match="invalid diagonal offset"):
            operator_from_dict(doc)

    def test_inconsistent_half_line_document(self):
        doc = operator_to_dict(shift(1))
        doc["domain"] = "half"
        with pytest.raises(SerializationError, match="invalid operator document"):
            operator_from_dict(doc)

    def test_non_object_document(self):
        with pytest.raises(SerializationError, match="JSON object"):
            operator_from_dict([1, 2, 3])

    def test_malformed_json(self):
        with pytest.raises(SerializationError, match="malformed JSON") as exc_info:
            loads_operator("{not json")
        assert exc_info.value.raw == "{not json"

    def test_document_is_plain_json(self):
        json.loads(dumps_operator(shift(-2, fiber_dim=2)))


class TestOperatorBundle:
    """Tests for dumps_operators() / loads_operators()."""

    def test_named_operators(self):
        text = dumps_operators({"f": standard_involution(1), "u": shift(2)})
        ops = loads_operators(text)
        assert sorted(ops) == ["f", "u"]
        assert distance(ops["u"], shift(2)) == 0.0

    def test_array_is_rejected(self):
        with pytest.raises(SerializationError, match="must be a JSON object"):
            loads_operators("[]")

    def test_bad_entry_is_rejected(self):
        with pytest.raises(SerializationError, match="missing field"):
            loads_operators(json.dumps({"u": {"window": [0, -1]}}))

    def test_fixture_file(self):
        """The shipped fixture decodes to S on the half line and a full-line dilation."""
        ops = load_operator_fixture("shift_dilation")
        assert ops["contraction"].domain == "half"
        assert distance(ops["contraction"], shift(1, domain="half")) == 0.0
        assert ops["dilation"].domain == "full"

"""Tests for the JSON writer and the document codec."""

import json

import numpy as np
import pytest

from opsystk import FORMAT_VERSION
from opsystk.atlas.canonical import diag
from opsystk.errors import InputError
from opsystk.formatters.json_fmt import (
    dumps,
    element_from_doc,
    element_to_doc,
    format_error_json,
    format_json,
    loads,
    map_from_doc,
    map_to_doc,
    subspace_from_doc,
    system_from_doc,
    system_to_doc,
    to_jsonable,
)
from opsystk.systems.dualize import dual_system
from opsystk.systems.matricial import omin_system
from opsystk.systems.opsys import Answer, ConeVerdict, LevelElement, SystemKind
from opsystk.systems.tensor import tensor_min


def rewrite(doc):
    return dumps(system_to_doc(system_from_doc(loads(dumps(doc, pretty=True)))), pretty=True)


# =============================================================================
# Writer
# =============================================================================

class TestDumps:
    """Test deterministic float and container output."""

    def test_floats(self):
        assert dumps(1.0) == "1.0"
        assert dumps(0.1) == "0.10000000000000001"
        assert dumps(float("nan")) == "null"
        assert dumps(float("-inf")) == '"-inf"'

    def test_compact(self):
        assert dumps({"a": [1, 2.5], "b": None}) == '{"a":[1,2.5],"b":null}'

    def test_pretty_keeps_numeric_lists_inline(self):
        text = dumps({"a": [1.0, 2.0]}, pretty=True)
        assert text == '{\n  "a": [1.0, 2.0]\n}'
        assert json.loads(text) == {"a": [1.0, 2.0]}

    def test_rejects_objects(self):
        with pytest.raises(TypeError):
            dumps(object())


class TestToJsonable:
    """Test conversion of results and certificates."""

    def test_verdict(self):
        verdict = ConeVerdict(Answer.NOT_MEMBER, {"kind": "eigen-witness", "vector": np.array([1j, 0]), "_x": 1}, 1e-8)
        data = to_jsonable(verdict)
        assert data["answer"] == "not_member"
        assert data["certificate"]["vector"] == [[0.0, 1.0], [0.0, 0.0]]
        assert "_x" not in data["certificate"]

    def test_system_by_name(self, m2):
        assert to_jsonable({"s": m2}) == {"s": "full(2)"}

    def test_format_json_envelope(self):
        doc = json.loads(format_json({"x": 1}, meta={"seed": 3}, pretty=False))
        assert doc == {"format_version": FORMAT_VERSION, "result": {"x": 1}, "meta": {"seed": 3}}

    def test_error_json(self):
        assert json.loads(format_error_json({"error": "bad", "exit_code": 3}, pretty=False))["exit_code"] == 3


# =============================================================================
# Reader
# =============================================================================

class TestLoads:
    def test_malformed_reports_position(self):
        with pytest.raises(InputError) as exc:
            loads('{\n  "a": ,\n}', source="x.json")
        assert exc.value.line == 2
        assert exc.value.to_dict()["line"] == 2


class TestSystemDocs:
    """Test that write -> read -> write reproduces the bytes."""

    def test_concrete(self, t3):
        doc = system_to_doc(t3)
        assert doc["type"] == "system"
        assert rewrite(doc) == dumps(doc, pretty=True)

    def test_quotient(self, m3_mod_j):
        doc = system_to_doc(m3_mod_j)
        assert rewrite(doc) == dumps(doc, pretty=True)

    def test_nested(self, m2):
        system = tensor_min(dual_system(diag(2)), omin_system(m2, 1))
        doc = system_to_doc(system)
        again = system_from_doc(loads(dumps(doc)))
        assert again.kind is SystemKind.TENSOR_MIN
        assert again.parents[1].params["k"] == 1
        assert rewrite(doc) == dumps(doc, pretty=True)

    def test_canonical_reference(self):
        assert system_from_doc({"canonical": "T(3)"}).dim == 7

    def test_unknown_kind(self):
        with pytest.raises(InputError, match="unknown system kind"):
            system_from_doc({"kind": "exotic"})

    def test_missing_field(self):
        with pytest.raises(InputError, match="missing field 'basis'"):
            system_from_doc({"kind": "concrete", "ambient_dim": 2})

    def test_bare_numbers_rejected(self):
        with pytest.raises(InputError):
            system_from_doc({"kind": "concrete", "ambient_dim": 1, "basis": [[[1.0]]]})


class TestElementAndMapDocs:
    """Test element, map and subspace documents."""

    def test_element_coefficients(self, m2, rng):
        u = LevelElement(m2, rng.standard_normal((2, 2, 4)))
        doc = loads(dumps(element_to_doc(u)))
        assert np.array_equal(element_from_doc(doc, m2).coeffs, u.coeffs)

    def test_element_realized(self, m2):
        doc = {"realized": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, -1.0], [2.0, 0.0]]]}
        u = element_from_doc(doc, m2)
        assert np.allclose(u.realize(), [[1, 1j], [-1j, 2]])

    def test_map(self, transpose2):
        phi = map_from_doc(loads(dumps(map_to_doc(transpose2))))
        assert np.array_equal(phi.images, transpose2.images)
        assert map_from_doc({"canonical": "transpose(2)"}).name == "transpose(2)"

    def test_subspace_forms(self, m2):
        gen = [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
        assert subspace_from_doc({"generators": [gen]}, m2).dim == 1
        assert subspace_from_doc([gen], m2).dim == 1

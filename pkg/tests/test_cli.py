"""Tests for the command-line interface."""

import json
from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from opsystk import FORMAT_VERSION, cli
from opsystk.atlas import suites
from opsystk.atlas.canonical import canonical, full
from opsystk.atlas.suites import CheckRecord, CheckStatus, SuiteReport
from opsystk.formatters.json_fmt import _pairs, dumps, element_to_doc
from opsystk.linalg import matcore
from opsystk.systems.quotient import project
from tests.conftest import element

runner = CliRunner()


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(dumps(doc, pretty=True) + "\n")
    return str(path)


def realized(tmp_path, name, matrix):
    return write(tmp_path, name, {"realized": _pairs(np.asarray(matrix, dtype=complex))})


def invoke(*args):
    return runner.invoke(cli.app, list(args))


def result_of(res):
    return json.loads(res.stdout)["result"]


# =============================================================================
# Global options and documents
# =============================================================================

class TestGlobal:
    def test_version(self):
        res = invoke("--version")
        assert res.exit_code == 0
        assert "opsystk" in res.stdout
        assert FORMAT_VERSION in res.stdout


class TestCanonicalCommand:
    def test_list(self):
        res = invoke("canonical")
        assert res.exit_code == 0
        assert "S2d" in result_of(res)["systems"]

    def test_system(self):
        res = invoke("canonical", "T(3)")
        assert res.exit_code == 0
        assert result_of(res)["dim"] == 7

    def test_map(self):
        res = invoke("canonical", "transpose(2)", "--map")
        assert res.exit_code == 0
        assert result_of(res)["rank"] == 4

    def test_unknown(self):
        res = invoke("canonical", "bogus(2)")
        assert res.exit_code == 3
        assert json.loads(res.stdout)["kind"] == "InputError"


class TestValidate:
    """Test the byte-exact round trip of documents."""

    def test_round_trip(self, tmp_path):
        out = tmp_path / "t3.json"
        assert invoke("canonical", "T(3)", "--json-out", str(out)).exit_code == 0
        res = invoke("validate", str(out))
        assert res.exit_code == 0
        assert result_of(res)["round_trip"] is True

    def test_map_round_trip(self, tmp_path):
        out = tmp_path / "m.json"
        invoke("canonical", "transpose(2)", "--map", "--json-out", str(out))
        assert invoke("validate", str(out)).exit_code == 0

    def test_reformatted_file(self, tmp_path):
        out = tmp_path / "t3.json"
        invoke("canonical", "T(3)", "--json-out", str(out))
        doc = json.loads(out.read_text())
        out.write_text(json.dumps(doc))
        res = invoke("validate", str(out))
        assert res.exit_code == 1
        assert result_of(res)["round_trip"] is False

    def test_element_needs_system(self, tmp_path, m2):
        path = write(tmp_path, "u.json", element_to_doc(element(m2, np.eye(2))))
        assert invoke("validate", path).exit_code == 3
        assert invoke("validate", path, "--system", "full(2)").exit_code == 0

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": \n')
        res = invoke("validate", str(path))
        assert res.exit_code == 3
        err = json.loads(res.stdout)
        assert err["kind"] == "InputError"
        assert "line" in err

    def test_wrong_version(self, tmp_path):
        path = write(tmp_path, "old.json", {"format_version": "0", "type": "system"})
        assert invoke("validate", path).exit_code == 3

    def test_missing_file(self, tmp_path):
        assert invoke("validate", str(tmp_path / "none.json")).exit_code == 3


# =============================================================================
# Cone and map queries
# =============================================================================

class TestCone:
    """Test verdict exit codes of the cone command."""

    def test_member(self, tmp_path):
        path = realized(tmp_path, "u.json", np.diag([1.0, 2.0]))
        res = invoke("cone", "-s", "full(2)", "-e", path)
        assert res.exit_code == 0
        assert result_of(res)["answer"] == "member"

    def test_not_member(self, tmp_path):
        path = realized(tmp_path, "u.json", np.diag([1.0, -1.0]))
        res = invoke("cone", "-s", "diag(2)", "-e", path)
        assert res.exit_code == 1
        assert result_of(res)["certificate"]["min_eig"] == pytest.approx(-1.0)

    def test_quotient(self, tmp_path):
        q = canonical("M(3)/J(3)")
        inside = project(q, element(q.parent(), np.diag([2.0, -1.0, 0.0])))
        outside = project(q, element(q.parent(), -np.eye(3)))
        assert invoke("cone", "-s", "M(3)/J(3)", "-e", write(tmp_path, "a.json", element_to_doc(inside))).exit_code == 0
        assert invoke("cone", "-s", "M(3)/J(3)", "-e", write(tmp_path, "b.json", element_to_doc(outside))).exit_code == 1

    def test_json_out(self, tmp_path):
        path = realized(tmp_path, "u.json", np.eye(2))
        out = tmp_path / "verdict.json"
        invoke("cone", "-s", "full(2)", "-e", path, "--json-out", str(out))
        doc = json.loads(out.read_text())
        assert doc["format_version"] == FORMAT_VERSION
        assert doc["meta"]["command"] == "cone"

    def test_bad_tolerance(self, tmp_path):
        path = realized(tmp_path, "u.json", np.eye(2))
        assert invoke("cone", "-s", "full(2)", "-e", path, "--tol", "-1").exit_code == 3

    def test_wrong_size(self, tmp_path):
        path = realized(tmp_path, "u.json", np.eye(3))
        assert invoke("cone", "-s", "full(2)", "-e", path).exit_code == 3

    def test_internal_error(self, tmp_path):
        path = realized(tmp_path, "u.json", np.eye(2))
        with patch.object(cli, "decide", side_effect=RuntimeError("boom")):
            res = invoke("cone", "-s", "full(2)", "-e", path)
        assert res.exit_code == 4
        assert "boom" in json.loads(res.stdout)["error"]


class TestNormCommand:
    def test_spectral_value(self, tmp_path):
        path = realized(tmp_path, "u.json", np.diag([1.0, -3.0]))
        res = invoke("norm", "-s", "full(2)", "-e", path)
        assert res.exit_code == 0
        assert result_of(res)["value"] == pytest.approx(3.0, abs=1e-6)


class TestMapCommands:
    def test_cpcheck_transpose(self):
        res = invoke("cpcheck", "-m", "transpose(2)")
        assert res.exit_code == 1
        assert result_of(res)["certificate"]["kind"] == "choi-separation"

    def test_cpcheck_identity(self):
        assert invoke("cpcheck", "-m", "identity(2)").exit_code == 0

    def test_kpos_transpose(self):
        res = invoke("kpos", "-m", "transpose(2)", "-k", "2", "--budget", "4", "--seed", "1")
        assert res.exit_code == 1
        assert json.loads(res.stdout)["meta"]["seed"] == 1


# =============================================================================
# Constructions
# =============================================================================

class TestConstructions:
    """Test the system-building commands."""

    def test_dual_needs_one_input(self):
        assert invoke("dual").exit_code == 3
        assert invoke("dual", "-s", "full(2)", "-m", "transpose(2)").exit_code == 3

    def test_dual_system(self):
        res = invoke("dual", "-s", "full(2)")
        assert res.exit_code == 0
        assert result_of(res)["kind"] == "dual"

    def test_dual_map(self):
        res = invoke("dual", "-m", "transpose(2)")
        assert res.exit_code == 0
        assert result_of(res)["name"] == "transpose(2)^d"

    def test_quotient(self, tmp_path):
        m3 = full(3)
        gens = [_pairs(m3.coefficients(np.diag(d))) for d in ([1.0, -1.0, 0.0], [0.0, 1.0, -1.0])]
        path = write(tmp_path, "j.json", {"generators": gens})
        res = invoke("quotient", "-s", "full(3)", "--kernel", path)
        assert res.exit_code == 0
        assert result_of(res)["dim"] == 7

    def test_quotient_by_non_null(self, tmp_path):
        gen = _pairs(full(3).coefficients(matcore.elementary(0, 0, 3)))
        path = write(tmp_path, "j.json", [gen])
        assert invoke("quotient", "-s", "full(3)", "--kernel", path).exit_code == 3

    def test_coproduct(self):
        res = invoke("coproduct", "--left", "diag(2)", "--right", "diag(2)")
        assert res.exit_code == 0
        assert result_of(res)["dim"] == 3

    def test_tensor_swap(self, tmp_path):
        path = realized(tmp_path, "swap.json", matcore.swap(2))
        res = invoke("tensor", "--left", "full(2)", "--right", "full(2)", "-e", path)
        assert res.exit_code == 1

    def test_tensor_kind(self):
        assert invoke("tensor", "--left", "full(2)", "--right", "full(2)", "--kind", "weird").exit_code == 3

    def test_omin_levels(self, tmp_path):
        path = realized(tmp_path, "swap.json", matcore.swap(2))
        assert invoke("omin", "-s", "full(2)", "--k", "2", "-e", path).exit_code == 1
        assert invoke("omin", "-s", "full(2)", "--k", "1", "-e", path, "--budget", "2").exit_code == 2

    def test_omax_needs_concrete(self):
        assert invoke("omax", "-s", "M(3)/J(3)", "--k", "1").exit_code == 3


class TestNumrange:
    """Test numerical-range membership and boundary output."""

    def setup_method(self):
        self.x = _pairs(full(2).coefficients(np.diag([0.0, 1.0])))

    def test_member(self, tmp_path):
        path = write(tmp_path, "q.json", {"x": self.x, "target": [[[0.5, 0.0]]]})
        assert invoke("numrange", "-s", "full(2)", "-q", path).exit_code == 0

    def test_outside(self, tmp_path):
        path = write(tmp_path, "q.json", {"x": self.x, "target": [[[1.5, 0.0]]]})
        assert invoke("numrange", "-s", "full(2)", "-q", path).exit_code == 1

    def test_boundary_csv(self, tmp_path):
        path = write(tmp_path, "q.json", {"x": self.x})
        out = tmp_path / "b.csv"
        res = invoke("numrange", "-s", "full(2)", "-q", path, "--boundary", "4", "--csv", str(out))
        assert res.exit_code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "angle,support,re,im"
        assert len(lines) == 5

    def test_needs_target_or_boundary(self, tmp_path):
        path = write(tmp_path, "q.json", {"x": self.x})
        assert invoke("numrange", "-s", "full(2)", "-q", path).exit_code == 3


# =============================================================================
# Suites
# =============================================================================

class TestSuiteCommand:
    """Test suite exit codes."""

    def fake_report(self, status):
        return SuiteReport("fake", 0, 1, 1.0, [CheckRecord("fake/0000", status, {}, "d", 0.0)])

    @pytest.mark.parametrize(
        "status,code", [(CheckStatus.PASS, 0), (CheckStatus.FAIL, 1), (CheckStatus.UNDECIDED, 2)]
    )
    def test_exit_codes(self, status, code):
        with patch.object(suites, "run_suite", return_value=self.fake_report(status)):
            res = invoke("suite", "proximinality")
        assert res.exit_code == code

    def test_all_takes_worst(self):
        reports = iter([self.fake_report(CheckStatus.PASS)] * 7 + [self.fake_report(CheckStatus.UNDECIDED)])
        with patch.object(suites, "run_suite", side_effect=lambda *a, **k: next(reports)):
            res = invoke("suite", "all")
        assert res.exit_code == 2
        assert len(result_of(res)["suites"]) == 8

    def test_unknown(self):
        assert invoke("suite", "nope").exit_code == 3

    def test_real_run(self, single_thread):
        res = invoke("suite", "proximinality", "--budget", "2", "--seed", "0")
        assert res.exit_code == 0
        assert result_of(res)["counts"]["pass"] == 2

"""Tests for minimal and maximal tensor products."""

import numpy as np
import pytest

from opsystk.atlas.canonical import identity_map, s2d
from opsystk.errors import InputError, UnsupportedQueryError
from opsystk.linalg import matcore
from opsystk.systems.dualize import dual_system
from opsystk.systems.opsys import Answer, LevelElement, cone_member, verify
from opsystk.systems.tensor import (
    DecompositionCertificate,
    Exactness,
    commuting_alias,
    cone_seeds,
    exactness,
    factors,
    max_cone_member,
    max_functoriality_check,
    min_cone_member,
    product_certificate,
    tensor_map,
    tensor_max,
    tensor_min,
)
from tests.conftest import element


# =============================================================================
# Construction
# =============================================================================

class TestBuild:
    """Test exactness classes and bases of tensor systems."""

    def test_min_of_matrix_algebras(self, m2):
        system = tensor_min(m2, m2)
        assert system.dim == 16
        assert system.spatial
        assert exactness(system) is Exactness.EXACT_SPATIAL
        assert factors(system) == (m2, m2)

    def test_max_with_algebra_factor(self, m2, t3):
        assert exactness(tensor_max(m2, t3)) is Exactness.EXACT_SPATIAL

    def test_max_forced_hierarchy(self, m2):
        assert exactness(tensor_max(m2, m2, force_hierarchy=True)) is Exactness.HIERARCHY

    def test_max_of_duals(self, t3):
        d = dual_system(t3)
        assert exactness(tensor_max(d, d)) is Exactness.EXACT_DUAL_SDP

    def test_max_of_operator_systems(self, t3):
        assert exactness(tensor_max(t3, t3)) is Exactness.HIERARCHY

    def test_max_with_algebra_and_dual_factor(self, m2):
        system = tensor_max(m2, dual_system(s2d()))
        assert exactness(system) is Exactness.EXACT_NUCLEAR
        assert not system.spatial

    def test_forced_hierarchy_skips_nuclear_route(self, m2):
        system = tensor_max(m2, dual_system(s2d()), force_hierarchy=True)
        assert exactness(system) is Exactness.HIERARCHY

    def test_min_with_one_realized_factor(self, m2):
        system = tensor_min(m2, dual_system(m2))
        assert exactness(system) is Exactness.EXACT_DUAL_SDP
        assert not system.spatial

    def test_hier_level(self, m2):
        with pytest.raises(InputError):
            tensor_max(m2, m2, hier_level=0)

    def test_factors_of_plain_system(self, m2):
        with pytest.raises(InputError):
            factors(m2)


class TestCommutingAlias:
    def test_needs_algebra(self, t3):
        with pytest.raises(UnsupportedQueryError):
            commuting_alias(t3, t3)

    def test_alias(self, m2, t3):
        system = commuting_alias(m2, t3)
        assert "alias" in system.provenance
        assert system.spatial


class TestTensorMap:
    def test_kron_images(self, transpose2):
        source = tensor_min(transpose2.source, transpose2.source)
        phi = tensor_map(transpose2, identity_map(2), source, source)
        assert np.allclose(phi.images, np.kron(transpose2.images, np.eye(4)))

    def test_mismatch(self, transpose2, m3):
        with pytest.raises(InputError):
            tensor_map(transpose2, transpose2, tensor_min(m3, m3), tensor_min(m3, m3))


# =============================================================================
# Cones
# =============================================================================

class TestMinCone:
    """Test the min cone in its exact and search-backed cases."""

    def test_swap(self, m2):
        u = element(tensor_min(m2, m2), matcore.swap(2))
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.certificate["min_eig"] == pytest.approx(-1.0)

    def test_unit_with_dual_factor(self, m2):
        system = tensor_min(m2, dual_system(m2))
        u = LevelElement.unit(system)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verify(u, verdict)

    def test_negative_unit_over_duals(self):
        d = dual_system(s2d())
        system = tensor_min(d, d)
        u = -1.0 * LevelElement.unit(system)
        verdict = min_cone_member(u, budget=2)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(u, verdict)


class TestMaxCone:
    """Test the max cone oracles."""

    def test_spatial_matches_eigenvalues(self, m2, rng):
        system = tensor_max(m2, m2)
        for _ in range(10):
            h = matcore.random_hermitian(rng, 4)
            verdict = cone_member(element(system, h))
            assert verdict.member == (matcore.min_eig(h) >= -1e-8)

    def test_min_refutation(self, m2):
        system = tensor_max(m2, m2, force_hierarchy=True)
        u = element(system, matcore.swap(2))
        verdict = max_cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.kind == "min-refutation"
        assert verify(u, verdict)

    def test_hierarchy_never_refutes_unit(self, m2):
        system = tensor_max(m2, m2, force_hierarchy=True)
        u = LevelElement.unit(system)
        verdict = max_cone_member(u)
        assert verdict.answer is not Answer.NOT_MEMBER
        assert verify(u, verdict)

    def test_unit_over_duals(self, t3):
        d = dual_system(t3)
        system = tensor_max(d, d)
        u = LevelElement.unit(system)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verify(u, verdict)

    def test_unit_with_algebra_and_dual_factor(self, m2):
        system = tensor_max(m2, dual_system(s2d()))
        u = LevelElement.unit(system)
        verdict = max_cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verdict.kind == "via-element"
        assert verify(u, verdict)

    def test_negative_unit_with_algebra_and_dual_factor(self, m2):
        system = tensor_max(m2, dual_system(s2d()))
        u = -1.0 * LevelElement.unit(system)
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(u, verdict)


class TestDecompositionCertificate:
    """Test certificates assembled from products of cone members."""

    def test_product_element_verifies(self, m2, rng):
        system = tensor_max(m2, m2, force_hierarchy=True)
        p = cone_seeds(m2, 2, rng)[-1]
        q = cone_seeds(m2, 2, rng)[-1]
        a = rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1))
        u = product_certificate(system, p, q, a)
        cert = DecompositionCertificate([(a, p, q)], 0.0, 2)
        assert cert.verify(u, 1e-8)
        assert matcore.min_eig(u.realize()) >= -1e-8

    def test_empty_certificate(self, m2):
        u = LevelElement.unit(tensor_max(m2, m2))
        assert not DecompositionCertificate([], 0.0, 1).verify(u, 1e-8)


class TestFunctoriality:
    def test_identity_maps(self):
        report = max_functoriality_check(identity_map(2), identity_map(2), samples=3)
        assert report.ok
        assert report.preserved == 3

    def test_needs_cp_maps(self, transpose2):
        with pytest.raises(InputError, match="not completely positive"):
            max_functoriality_check(transpose2, transpose2, samples=1)

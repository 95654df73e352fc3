"""Tests for OMIN/OMAX structures, numerical ranges, k-lifts and gamma."""

import numpy as np
import pytest

from opsystk.atlas.canonical import full, snd
from opsystk.errors import InputError
from opsystk.linalg import matcore
from opsystk.systems.opsys import (
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    compose,
    cone_member,
    cp_check,
    is_unital,
    kpos_refute,
    verify,
)
from opsystk.systems.matricial import (
    BlockIdeal,
    NumericalRangeQuery,
    block_algebra,
    gamma_generators,
    gamma_map,
    klift_demo,
    numerical_range_boundary,
    numerical_range_member,
    numerical_range_support,
    omax_system,
    omin_member,
    omin_system,
    separating_maps,
)
from tests.conftest import element


def swap_element(system):
    return LevelElement(system, element(full(2), matcore.swap(2)).coeffs)


def bell_projector():
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


# =============================================================================
# OMIN_k and OMAX_k
# =============================================================================

class TestOmin:
    """Test the cone tested against ucp maps into M_k."""

    def test_swap_not_refuted_at_k1(self, m2):
        u = swap_element(omin_system(m2, 1))
        verdict = omin_member(u, budget=4)
        assert verdict.answer is not Answer.NOT_MEMBER

    def test_swap_refuted_at_k2(self, m2):
        u = swap_element(omin_system(m2, 2))
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(u, verdict)

    def test_negative_unit_found_by_search(self, m2):
        u = -1.0 * LevelElement.unit(omin_system(m2, 1), 2)
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.kind == "omin-violation"
        assert verify(u, verdict)

    def test_parent_positive(self, m2, rng):
        system = omin_system(m2, 1)
        x = matcore.random_psd(rng, 4) + 0.1 * np.eye(4)
        u = LevelElement(system, element(full(2), x).coeffs)
        assert cone_member(u).answer is Answer.MEMBER

    def test_needs_concrete_parent(self, m3_mod_j):
        with pytest.raises(InputError, match="not a concrete system"):
            omin_system(m3_mod_j, 1)

    def test_k_positive(self, m2):
        with pytest.raises(InputError):
            omin_system(m2, 0)


class TestOmax:
    """Test the cone of k-block decompositions."""

    def test_swap_refuted_by_parent(self, m2):
        u = swap_element(omax_system(m2, 1))
        assert cone_member(u).answer is Answer.NOT_MEMBER

    def test_unit_decomposes(self, m2):
        u = LevelElement.unit(omax_system(m2, 1), 2)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verdict.kind == "omax-decomposition"
        assert verify(u, verdict)

    def test_level_up_to_k(self, m2):
        u = LevelElement.unit(omax_system(m2, 2), 2)
        assert cone_member(u).kind == "via-element"

    def test_entangled_projector_separated(self, m2):
        u = LevelElement(omax_system(m2, 1), element(m2, bell_projector()).coeffs)
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.kind == "omax-separation"
        assert verdict.certificate["value"] < 0
        assert verify(u, verdict)

    def test_separation_needs_k_positive_map(self, m2):
        u = LevelElement(omax_system(m2, 1), element(m2, bell_projector()).coeffs)
        verdict = cone_member(u)
        negated = LinearMapSpec(m2, m2, -np.eye(m2.dim), name="minus")
        forged = ConeVerdict(verdict.answer, {**verdict.certificate, "map": negated}, verdict.tol)
        assert not verify(u, forged)

    def test_separating_maps_are_positive(self, m2):
        for phi in separating_maps(m2, 1, seed=3, count=2):
            assert not kpos_refute(phi, 1, budget=2).refuted


# =============================================================================
# Numerical ranges
# =============================================================================

class TestNumericalRange:
    """Test ucp images of a single element."""

    def setup_method(self):
        self.m2 = full(2)
        self.x = self.m2.coefficients(np.diag([0.0, 1.0]))

    def test_support_values(self):
        assert numerical_range_support(self.m2, self.x, np.array([[1.0]])) == pytest.approx(1.0, abs=1e-6)
        assert numerical_range_support(self.m2, self.x, np.array([[-1.0]])) == pytest.approx(0.0, abs=1e-6)

    def test_interior_point(self):
        query = NumericalRangeQuery(self.m2, self.x, np.array([[0.5]]))
        verdict = numerical_range_member(query)
        assert verdict.answer is Answer.MEMBER
        assert verify(query, verdict)

    def test_outside_point(self):
        query = NumericalRangeQuery(self.m2, self.x, np.array([[2.0]]))
        verdict = numerical_range_member(query)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(query, verdict)

    def test_level_two_identity(self):
        query = NumericalRangeQuery(self.m2, self.x, np.diag([0.0, 1.0]))
        verdict = numerical_range_member(query)
        assert verdict.answer is Answer.MEMBER
        assert verify(query, verdict)

    def test_unit_needs_identity_target(self):
        query = NumericalRangeQuery(self.m2, self.m2.unit, np.array([[2.0]]))
        verdict = numerical_range_member(query)
        assert verdict.kind == "range-inconsistent"
        assert verify(query, verdict)

    def test_normal_triangle(self, m3):
        x = m3.coefficients(np.diag([0.0, 1.0, 1j]))
        points = numerical_range_boundary(m3, x, directions=4)
        supports = [p.support for p in points]
        assert supports == pytest.approx([1.0, 1.0, 0.0, 0.0], abs=1e-6)

    def test_too_few_directions(self):
        with pytest.raises(InputError):
            numerical_range_boundary(self.m2, self.x, directions=2)

    def test_wrong_length(self):
        with pytest.raises(InputError):
            NumericalRangeQuery(self.m2, np.zeros(3), np.eye(1))


# =============================================================================
# Finite k-lifts
# =============================================================================

class TestKlift:
    """Test lifts of ucp maps into A/I."""

    def test_block_algebra(self):
        a = block_algebra([1, 2])
        assert a.dim == 5
        assert a.ambient_dim == 3

    def test_lift_identity(self, m2):
        ideal = BlockIdeal((1, 2), (0,))
        quotient = ideal.quotient()
        phi = LinearMapSpec(m2, quotient, np.array([quotient.coefficients(b) for b in m2.basis]), name="id")
        lift = klift_demo(phi, ideal, k=2, budget=2)
        assert is_unital(lift)
        q = ideal.quotient_map(lift.target, quotient)
        assert np.allclose(compose(q, lift).images, phi.images, atol=1e-7)
        assert cp_check(lift).answer is Answer.MEMBER

    def test_ideal_is_not_everything(self):
        with pytest.raises(InputError):
            BlockIdeal((1, 2), (0, 1))

    def test_block_offsets(self):
        assert BlockIdeal((1, 2), (0,)).offsets == [0, 1, 3]

    def test_ideal_indices(self):
        with pytest.raises(InputError):
            BlockIdeal((1, 2), (2,))

    def test_non_ucp_rejected(self, transpose2):
        ideal = BlockIdeal((1, 2), (0,))
        quotient = ideal.quotient()
        phi = LinearMapSpec(
            transpose2.source, quotient, np.array([quotient.coefficients(b.T) for b in transpose2.source.basis])
        )
        with pytest.raises(InputError, match="not unital and completely positive"):
            klift_demo(phi, ideal, k=1)


# =============================================================================
# Gamma
# =============================================================================

class TestGamma:
    """Test the embedding of S_n^d into the block system."""

    def test_generators_land_on_matrix_units(self):
        gamma = gamma_map(2)
        target = snd(2)
        expected = [np.eye(4)]
        for i in range(2):
            e = matcore.elementary(2 * i, 2 * i + 1, 4)
            expected += [e, e.T]
        for row, want in zip(gamma_generators(2), expected):
            assert np.allclose(target.realize(row @ gamma.images), want, atol=1e-9)

    def test_unital_and_cp(self):
        gamma = gamma_map(2)
        assert is_unital(gamma, 1e-8)
        assert cp_check(gamma).answer is Answer.MEMBER

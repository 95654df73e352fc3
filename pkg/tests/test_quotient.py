"""Tests for null subspaces, quotients and the coproduct."""

import numpy as np
import pytest

from opsystk.atlas.canonical import diag, full, t_mod_j, traceless_diagonals
from opsystk.errors import InputError
from opsystk.linalg import matcore
from opsystk.systems.opsys import Answer, LevelElement, cone_member, cp_check, direct_sum, is_unital, unitalize, verify
from opsystk.systems.quotient import (
    Subspace,
    coproduct,
    coproduct_embeddings,
    coproduct_universal_map,
    first_isomorphism,
    is_null_subspace,
    lift,
    project,
    quotient_cone_member,
    quotient_map,
    quotient_system,
)
from tests.conftest import element, psd_element, random_cp_map


# =============================================================================
# Null subspaces
# =============================================================================

class TestIsNullSubspace:
    """Test detection of kernels without positive elements."""

    def test_traceless_diagonals(self, m3):
        sub = traceless_diagonals(m3)
        verdict = is_null_subspace(sub)
        assert verdict.answer is Answer.MEMBER
        assert verify(sub, verdict)

    @pytest.mark.parametrize("level", [2, 3])
    def test_amplified_traceless_diagonals(self, m3, level):
        sub = traceless_diagonals(m3)
        verdict = is_null_subspace(sub, level=level)
        assert verdict.answer is Answer.MEMBER
        assert verify(sub, verdict)

    def test_corner_is_not_null(self, m2):
        sub = Subspace(m2, m2.coefficients(matcore.elementary(0, 0, 2)))
        verdict = is_null_subspace(sub)
        assert verdict.answer is Answer.NOT_MEMBER
        positive = verdict.certificate["positive"]
        assert np.allclose(positive / np.trace(positive).real, matcore.elementary(0, 0, 2), atol=1e-5)
        assert verify(sub, verdict)

    def test_coproduct_kernel(self):
        total = direct_sum(diag(2), diag(2))
        gen = np.zeros(total.dim)
        gen[-1] = 1.0
        assert is_null_subspace(Subspace(total, gen)).answer is Answer.MEMBER

    def test_unit_rejected(self, m2):
        with pytest.raises(InputError, match="unit"):
            is_null_subspace(Subspace(m2, m2.unit))

    def test_generator_length(self, m2):
        with pytest.raises(InputError):
            Subspace(m2, np.zeros(3))


# =============================================================================
# Quotient systems
# =============================================================================

class TestQuotientSystem:
    """Test construction of S/J."""

    def test_dimensions(self, m3_mod_j):
        assert m3_mod_j.dim == 7
        assert t_mod_j(3).dim == 5

    def test_non_null_kernel(self, m2):
        sub = Subspace(m2, m2.coefficients(matcore.elementary(0, 0, 2)))
        with pytest.raises(InputError, match="not null"):
            quotient_system(m2, sub)

    def test_kernel_from_another_system(self, m2, m3):
        with pytest.raises(InputError):
            quotient_system(m2, traceless_diagonals(m3))

    def test_zero_kernel(self, m2, rng):
        q = quotient_system(m2, Subspace(m2, np.zeros((0, m2.dim))))
        assert q.dim == m2.dim
        for _ in range(5):
            x = element(m2, matcore.random_hermitian(rng, 2))
            assert cone_member(project(q, x)).answer is cone_member(x).answer

    def test_unit_maps_to_unit(self, m3_mod_j):
        assert is_unital(quotient_map(m3_mod_j))

    def test_lift_then_project(self, m3_mod_j, rng):
        u = LevelElement(m3_mod_j, rng.standard_normal((2, 2, m3_mod_j.dim)))
        assert np.allclose(project(m3_mod_j, lift(u)).coeffs, u.coeffs)

    def test_unit_coordinates(self, m3):
        q = quotient_system(m3, traceless_diagonals(m3))
        reps = q.params["representatives"]
        assert np.isrealobj(reps)
        assert q.unit[0] == pytest.approx(1.0)
        assert np.allclose(project(q, LevelElement.unit(m3)).coeffs[0, 0], q.unit)


class TestQuotientCone:
    """Test membership decided on parent representatives."""

    def test_boundary_representative(self, m3_mod_j):
        rep = element(m3_mod_j.parent(), np.diag([1.0, -1.0, 0.0]))
        u = project(m3_mod_j, rep)
        verdict = quotient_cone_member(u, tol=1e-6, representative=rep)
        assert verdict.answer is Answer.MEMBER
        assert np.allclose(verdict.certificate["correction"].realize(), np.diag([-1.0, 1.0, 0.0]), atol=1e-4)
        assert verify(u, verdict)

    def test_minus_identity(self, m3_mod_j):
        u = project(m3_mod_j, element(m3_mod_j.parent(), -np.eye(3)))
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(u, verdict)

    def test_unit(self, m3_mod_j):
        u = LevelElement.unit(m3_mod_j)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verdict.certificate["margin"] >= 1 - 1e-6

    def test_projected_positive(self, m3_mod_j, rng):
        x = psd_element(rng, m3_mod_j.parent(), n=2)
        u = project(m3_mod_j, x)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verify(u, verdict)


# =============================================================================
# Coproduct
# =============================================================================

class TestCoproduct:
    """Test S (+)_1 T and its universal property."""

    def setup_method(self):
        self.c = coproduct(diag(2), diag(2))

    def test_dimension(self):
        assert self.c.dim == 3

    def test_embeddings_are_unital(self):
        i, j = coproduct_embeddings(self.c)
        assert is_unital(i)
        assert is_unital(j)

    @pytest.mark.parametrize("level", [1, 2])
    def test_embedding_preserves_cone(self, rng, level):
        i, _ = coproduct_embeddings(self.c)
        s = self.c.params["summands"][0]
        for shift in (0.1, -0.1):
            x = psd_element(rng, s, n=level, shift=shift)
            image = LevelElement(self.c, x.coeffs @ i.images)
            assert cone_member(image).answer is cone_member(x).answer

    def test_universal_map(self, rng):
        s, t = self.c.params["summands"]
        m3 = full(3)
        phi = unitalize(random_cp_map(rng, s, m3))
        psi = unitalize(random_cp_map(rng, t, m3))
        u = coproduct_universal_map(self.c, phi, psi)
        assert is_unital(u, 1e-7)
        assert cp_check(u).answer is Answer.MEMBER

    def test_universal_map_needs_unital(self, rng):
        s, t = self.c.params["summands"]
        m3 = full(3)
        phi = random_cp_map(rng, s, m3)
        with pytest.raises(InputError, match="unital"):
            coproduct_universal_map(self.c, phi, phi)


class TestFirstIsomorphism:
    def test_quotient_map_factors(self, m3_mod_j):
        iso = first_isomorphism(quotient_map(m3_mod_j))
        assert iso.quotient.dim == 7
        assert iso.kernel.dim == 2
        assert np.linalg.matrix_rank(iso.induced.images) == 7

    def test_not_unital(self, rng, m2):
        with pytest.raises(InputError, match="not unital"):
            first_isomorphism(random_cp_map(rng, m2, m2))

"""Tests for the core operator-system model."""

import numpy as np
import pytest

from opsystk.atlas.canonical import diag, full, identity_map, tridiagonal
from opsystk.errors import InputError, VerificationError
from opsystk.linalg import matcore
from opsystk.systems.opsys import (
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    SystemKind,
    apply_map,
    compose,
    cone_member,
    cp_check,
    direct_sum,
    is_cstar_algebra,
    is_unital,
    kpos_refute,
    make_concrete,
    norm_bounds,
    os_norm,
    require_verified,
    unitalize,
    verify,
)
from tests.conftest import element, kraus_map, psd_element, random_cp_map


# =============================================================================
# Construction
# =============================================================================

class TestMakeConcrete:
    """Test building concrete systems from Hermitian bases."""

    def test_dependent_basis(self):
        e = matcore.elementary(0, 0, 2)
        with pytest.raises(InputError, match="linearly dependent"):
            make_concrete("bad", 2, [np.eye(2), e, 2 * e])

    def test_identity_prepended(self):
        system = make_concrete("s", 2, [np.diag([1.0, -1.0])])
        assert system.dim == 2
        assert np.allclose(system.basis[0], np.eye(2))
        assert system.provenance["unit_added"] is True

    def test_identity_moved_to_front(self):
        system = make_concrete("s", 2, [np.diag([1.0, -1.0]), np.eye(2)])
        assert np.allclose(system.basis[0], np.eye(2))
        assert "unit_added" not in system.provenance

    def test_default_state_is_normalized_trace(self):
        system = make_concrete("s", 2, [np.eye(2), np.diag([1.0, 0.0])])
        assert np.allclose(system.state, [1.0, 0.5])
        assert system.provenance["faithful_state"] == "normalized trace"

    def test_non_faithful_state(self):
        with pytest.raises(InputError):
            make_concrete("s", 2, [np.eye(2), np.diag([1.0, 0.0])], state=[1.0, 1.0])

    def test_non_hermitian_basis(self):
        with pytest.raises(InputError):
            make_concrete("s", 2, [np.eye(2), matcore.elementary(0, 1, 2)])

    def test_wrong_shape(self):
        with pytest.raises(InputError):
            make_concrete("s", 2, [np.eye(3)])

    def test_matrix_algebra_dim(self):
        assert full(3).dim == 9
        assert full(3).kind is SystemKind.CONCRETE
        assert full(3).spatial


class TestSpan:
    """Test coefficient recovery."""

    def test_coefficients_invert_realize(self, rng):
        system = tridiagonal(3)
        c = rng.standard_normal(system.dim)
        assert np.allclose(system.coefficients(system.realize(c)), c)

    def test_outside_span(self):
        with pytest.raises(InputError, match="not in the span"):
            tridiagonal(3).coefficients(matcore.elementary(0, 2, 3))


class TestDirectSum:
    """Test block-diagonal sums."""

    def test_dims_and_algebra(self):
        s = direct_sum(diag(2), full(2))
        assert s.dim == 6
        assert s.ambient_dim == 4
        assert s.provenance["summands"] == ["diag(2)", "full(2)"]
        assert is_cstar_algebra(s)


class TestIsCstarAlgebra:
    def test_algebras(self):
        assert is_cstar_algebra(full(2))
        assert is_cstar_algebra(diag(3))

    def test_tridiagonal_is_not(self):
        assert not is_cstar_algebra(tridiagonal(3))


# =============================================================================
# Elements
# =============================================================================

class TestLevelElement:
    """Test element shapes and symmetrization."""

    def test_wrong_coefficient_count(self, m2):
        with pytest.raises(InputError):
            LevelElement(m2, np.zeros((1, 1, 3)))

    def test_non_square(self, m2):
        with pytest.raises(InputError):
            LevelElement(m2, np.zeros((1, 2, 4)))

    def test_from_realized_level(self, m2, rng):
        block = matcore.random_hermitian(rng, 4)
        u = element(m2, block)
        assert u.level == 2
        assert np.allclose(u.realize(), block)

    def test_far_from_hermitian_rejected(self, m2):
        with pytest.raises(InputError, match="not self-adjoint"):
            element(m2, matcore.elementary(0, 1, 2)).hermitian()

    def test_unit(self, m2):
        assert np.allclose(LevelElement.unit(m2, 3).realize(), np.eye(6))

    def test_compress(self, m2, rng):
        u = psd_element(rng, m2, n=2)
        a = rng.standard_normal((2, 1))
        v = u.compress(a)
        assert v.level == 1
        assert matcore.min_eig(v.realize()) >= -1e-10


# =============================================================================
# Cones and norms
# =============================================================================

class TestConeMember:
    """Test the spatial cone oracle and its certificates."""

    def test_member(self, m2, rng):
        u = psd_element(rng, m2, n=2)
        verdict = cone_member(u)
        assert verdict.answer is Answer.MEMBER
        assert verify(u, verdict)

    def test_not_member(self, m2):
        u = element(m2, np.diag([1.0, -1.0]))
        verdict = cone_member(u)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.certificate["min_eig"] == pytest.approx(-1.0)
        assert verify(u, verdict)

    def test_bad_tolerance(self, m2):
        with pytest.raises(InputError):
            cone_member(LevelElement.unit(m2), tol=-1.0)

    def test_forged_certificate(self, m2):
        u = element(m2, np.diag([1.0, -1.0]))
        forged = ConeVerdict(Answer.MEMBER, {"kind": "eigen-witness", "min_eig": 0.0}, 1e-8)
        assert not verify(u, forged)
        with pytest.raises(VerificationError):
            require_verified(u, forged)

    def test_unknown_certificate_kind(self, m2):
        u = LevelElement.unit(m2)
        assert not verify(u, ConeVerdict(Answer.MEMBER, {"kind": "nonsense"}, 1e-8))


class TestNorm:
    """Test the bisection norm against the spectral norm."""

    def test_bisection_matches_spectral(self, m2, rng):
        u = LevelElement(m2, rng.standard_normal((1, 1, 4)) + 1j * rng.standard_normal((1, 1, 4)))
        bounds = norm_bounds(u)
        assert bounds.lower <= bounds.upper
        assert bounds.value == pytest.approx(matcore.op_norm(u.realize()), abs=1e-6)

    def test_zero(self, m2):
        assert norm_bounds(LevelElement(m2, np.zeros((1, 1, 4)))).upper == 0.0

    def test_spatial_norm(self, m2):
        assert os_norm(element(m2, np.diag([2.0, -3.0]))) == pytest.approx(3.0)


# =============================================================================
# Maps
# =============================================================================

class TestMaps:
    """Test composition and amplification."""

    def test_compose_with_identity(self, transpose2):
        both = compose(identity_map(2), transpose2)
        assert np.allclose(both.images, transpose2.images)

    def test_transpose_twice(self, transpose2):
        assert np.allclose(compose(transpose2, transpose2).images, np.eye(4))

    def test_apply_map(self, transpose2, m2):
        x = np.array([[1, 2j], [-2j, 3]])
        assert np.allclose(apply_map(transpose2, element(m2, x)).realize(), x.T)

    def test_shape_checked(self, m2, m3):
        with pytest.raises(InputError):
            LinearMapSpec(m2, m3, np.zeros((4, 4)))


class TestCpCheck:
    """Test complete positivity through the Choi matrix."""

    def test_identity(self):
        phi = identity_map(2)
        verdict = cp_check(phi)
        assert verdict.answer is Answer.MEMBER
        assert verify(phi, verdict)

    def test_transpose(self, transpose2):
        verdict = cp_check(transpose2)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verdict.certificate["margin"] == pytest.approx(-1.0, abs=1e-6)
        assert verify(transpose2, verdict)

    def test_random_kraus(self, rng, t3, m2):
        phi = random_cp_map(rng, t3, m2)
        verdict = cp_check(phi)
        assert verdict.answer is Answer.MEMBER
        assert verify(phi, verdict)

    def test_separation_needs_strictly_negative_pairing(self, transpose2):
        verdict = cp_check(transpose2)
        tiny = {**verdict.certificate, "functional": verdict.certificate["functional"] * 1e-12}
        assert not verify(transpose2, ConeVerdict(verdict.answer, tiny, verdict.tol))

    def test_non_hermitian_image(self, m2):
        images = np.eye(4, dtype=complex)
        images[1] *= 1j
        phi = LinearMapSpec(m2, m2, images)
        verdict = cp_check(phi)
        assert verdict.kind == "hermiticity"
        assert verdict.certificate["index"] == 1
        assert verify(phi, verdict)


class TestKposRefute:
    """Test the level-k refutation search."""

    def test_transpose_level_two(self, transpose2):
        verdict = kpos_refute(transpose2, 2, budget=4, seed=1)
        assert verdict.answer is Answer.NOT_MEMBER
        assert verify(transpose2, verdict)

    def test_transpose_is_positive(self, transpose2):
        verdict = kpos_refute(transpose2, 1, budget=2, seed=1)
        assert verdict.answer is not Answer.NOT_MEMBER

    def test_cp_map(self):
        verdict = kpos_refute(identity_map(2), 3)
        assert verdict.answer is Answer.MEMBER
        assert verdict.kind == "via-cp"

    def test_level_zero(self, transpose2):
        with pytest.raises(InputError):
            kpos_refute(transpose2, 0)


class TestUnitalize:
    """Test phi = R psi(.) R with psi unital."""

    def test_scaled_identity(self, m2):
        phi = kraus_map(m2, m2, [np.diag([2.0, 1.0])])
        assert not is_unital(phi)
        psi = unitalize(phi)
        assert is_unital(psi)
        assert np.allclose(psi.images, np.eye(4), atol=1e-9)

    def test_singular_unit_image(self, m2):
        phi = kraus_map(m2, m2, [matcore.elementary(0, 0, 2)])
        with pytest.raises(InputError, match="singular"):
            unitalize(phi)

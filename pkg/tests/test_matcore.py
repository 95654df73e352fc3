"""Tests for the Hermitian linear-algebra kernel."""

import numpy as np
import pytest

from opsystk.errors import AsymmetryWarning, InputError
from opsystk.linalg import matcore


# =============================================================================
# Kronecker products
# =============================================================================

class TestKron:
    """Test kron placement and spectra."""

    def test_identity(self):
        assert np.array_equal(matcore.kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_elementary_placement(self):
        out = matcore.kron(matcore.elementary(0, 0, 2), matcore.elementary(1, 1, 2))
        expected = np.zeros((4, 4))
        expected[1, 1] = 1.0
        assert np.array_equal(out, expected)

    def test_eigenvalues_are_products(self, rng):
        for _ in range(10):
            a = matcore.random_hermitian(rng, 2)
            b = matcore.random_hermitian(rng, 2)
            products = np.sort(np.outer(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b)).ravel())
            assert np.allclose(np.linalg.eigvalsh(matcore.kron(a, b)), products, atol=1e-10)


# =============================================================================
# Eigenvalues
# =============================================================================

class TestMinEig:
    """Test smallest-eigenvalue computations."""

    def test_two_by_two(self):
        assert matcore.min_eig(np.array([[1.0, 2.0], [2.0, 1.0]])) == pytest.approx(-1.0, abs=1e-12)

    def test_identity(self):
        assert matcore.min_eig(np.eye(3)) == pytest.approx(1.0)

    def test_swap(self):
        # SWAP is an involution with eigenvalues +1 (x3) and -1
        assert matcore.min_eig(matcore.swap(2)) == pytest.approx(-1.0, abs=1e-12)
        assert np.allclose(matcore.swap(2) @ matcore.swap(2), np.eye(4))

    def test_rejects_non_hermitian(self):
        with pytest.raises(InputError):
            matcore.min_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_pair_gives_eigenvector(self):
        h = np.array([[2.0, 1j], [-1j, 2.0]])
        w, v = matcore.min_eig_pair(h)
        assert w == pytest.approx(1.0)
        assert np.allclose(h @ v, w * v)


class TestHermitize:
    """Test symmetrization and its warnings."""

    def test_small_asymmetry_warns(self):
        h = np.array([[1.0, 1e-7], [0.0, 1.0]])
        with pytest.warns(AsymmetryWarning):
            out = matcore.hermitize(h)
        assert np.allclose(out, out.conj().T)

    def test_exact_input_unchanged(self):
        h = np.array([[1.0, 2 - 1j], [2 + 1j, -3.0]])
        assert np.array_equal(matcore.hermitize(h), h)

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            matcore.hermitize(np.zeros((2, 3)))


# =============================================================================
# Hilbert-Schmidt geometry
# =============================================================================

class TestHsInner:
    """Test the trace pairing."""

    def test_identity(self):
        assert matcore.hs_inner(np.eye(2), np.eye(2)) == pytest.approx(2.0)

    def test_off_diagonal(self):
        x = matcore.elementary(0, 1, 2) + matcore.elementary(1, 0, 2)
        assert matcore.hs_inner(x, x) == pytest.approx(2.0)

    def test_matches_entrywise_sum(self, rng):
        a = matcore.random_hermitian(rng, 3)
        b = matcore.random_hermitian(rng, 3)
        assert matcore.hs_inner(a, b) == pytest.approx(np.sum(a.conj() * b))
        assert abs(matcore.hs_inner(a, b).imag) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            matcore.hs_inner(np.eye(2), np.eye(3))

    def test_herm_basis_is_orthonormal(self):
        basis = matcore.herm_basis(3)
        assert basis.shape == (9, 3, 3)
        gram = np.array([[matcore.hs_inner(a, b).real for b in basis] for a in basis])
        assert np.allclose(gram, np.eye(9), atol=1e-12)


class TestRealify:
    """Test the real symmetric embedding."""

    def test_identity(self):
        assert np.array_equal(matcore.realify(np.eye(2)), np.eye(4))

    def test_pauli_y(self):
        r = matcore.realify(np.array([[0, 1j], [-1j, 0]]))
        assert np.allclose(r, r.T)
        assert np.allclose(np.linalg.eigvalsh(r), [-1, -1, 1, 1])

    def test_spectrum_doubles(self, rng):
        for _ in range(50):
            h = matcore.random_hermitian(rng, 3)
            w = np.linalg.eigvalsh(h)
            assert np.allclose(np.linalg.eigvalsh(matcore.realify(h)), np.sort(np.repeat(w, 2)), atol=1e-10)

    def test_complexify_inverts(self, rng):
        h = matcore.random_hermitian(rng, 4)
        assert np.allclose(matcore.complexify(matcore.realify(h)), h)


class TestPairs:
    """Test the [re, im] pair encoding."""

    def test_bare_reals_accepted(self):
        assert np.array_equal(matcore.from_pairs([[1, 0], [0, 1]]), np.eye(2))

    def test_pairs(self):
        m = np.array([[1 + 2j, 0], [3, -1j]])
        assert np.array_equal(matcore.from_pairs(matcore.to_pairs(m)), m)

    def test_ragged_rows_rejected(self):
        with pytest.raises(InputError):
            matcore.from_pairs([[1, 2], [3]])

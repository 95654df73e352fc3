"""Shared fixtures: seeded generators, small canonical systems and maps."""

import numpy as np
import pytest

from opsystk.atlas.canonical import diag, full, m_mod_j, transpose_map, tridiagonal
from opsystk.linalg import matcore
from opsystk.systems.opsys import LevelElement, LinearMapSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def m2():
    return full(2)


@pytest.fixture
def m3():
    return full(3)


@pytest.fixture
def c2():
    return diag(2)


@pytest.fixture
def t3():
    return tridiagonal(3)


@pytest.fixture
def m3_mod_j():
    return m_mod_j(3)


@pytest.fixture
def transpose2():
    return transpose_map(2)


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setenv("OSTK_THREADS", "1")


def kraus_map(source, target, kraus):
    """X -> sum_r K_r X K_r* restricted to the source basis."""
    images = [target.coefficients(sum(k @ b @ k.conj().T for k in kraus)) for b in source.basis]
    return LinearMapSpec(source, target, np.array(images), name="kraus")


def random_cp_map(rng, source, target, rank=2):
    q, d = target.ambient_dim, source.ambient_dim
    kraus = [rng.standard_normal((q, d)) + 1j * rng.standard_normal((q, d)) for _ in range(rank)]
    return kraus_map(source, target, kraus)


def element(system, matrix):
    return LevelElement.from_realized(system, np.asarray(matrix, dtype=complex))


def psd_element(rng, system, n=1, shift=0.1):
    """Random element of M_n(S) whose realization has least eigenvalue `shift`."""
    c = rng.standard_normal((n, n, system.dim)) + 1j * rng.standard_normal((n, n, system.dim))
    u = LevelElement(system, (c + c.conj().transpose(1, 0, 2)) / 2)
    return u + (shift - matcore.min_eig(u.realize())) * LevelElement.unit(system, n)

"""Canonical systems and maps, addressable by name.

Names: ``full(n)``, ``diag(n)``, ``T(n)`` (tridiagonal), ``M(n)/J(n)``,
``T(n)/J(n)``, ``S2d`` and ``Snd(n)``; maps: ``identity(n)``, ``transpose(n)``
and ``compression(m,n)``. J(n) is the span of the traceless diagonal
matrices. Snd(n) is realized block-diagonally in M_{2n} with one 2 x 2 block
[[a, b_i], [c_i, a]] per generator.
"""

from __future__ import annotations

import functools
import re

import numpy as np

from opsystk.errors import InputError
from opsystk.linalg import matcore
from opsystk.systems.opsys import LinearMapSpec, OperatorSystem, full_basis, make_concrete, matrix_algebra
from opsystk.systems.quotient import Subspace, quotient_system

SYSTEM_NAMES = ("full(n)", "diag(n)", "T(n)", "M(n)/J(n)", "T(n)/J(n)", "S2d", "Snd(n)")
MAP_NAMES = ("identity(n)", "transpose(n)", "compression(m,n)")

_PATTERN = re.compile(r"^\s*([A-Za-z]+)(?:\((\d+)(?:,\s*(\d+))?\))?\s*$")


def _size(n: int, least: int = 1) -> int:
    if n < least:
        raise InputError(f"size must be at least {least}, got {n}")
    return n


def full(n: int) -> OperatorSystem:
    return matrix_algebra(_size(n), name=f"full({n})")


def diag(n: int) -> OperatorSystem:
    """Diagonal matrices, the commutative C*-algebra C^n."""
    _size(n)
    basis = [np.eye(n)] + [matcore.elementary(i, i, n) for i in range(1, n)]
    return make_concrete(f"diag({n})", n, basis)


def tridiagonal(n: int) -> OperatorSystem:
    """T(n): matrices with a_ij = 0 whenever |i - j| >= 2."""
    _size(n, 2)
    basis = [b for b in full_basis(n) if _band(b) <= 1]
    system = make_concrete(f"T({n})", n, basis)
    system.provenance["band"] = "tridiagonal: a_ij = 0 for |i-j| >= 2"
    return system


def _band(b: np.ndarray) -> int:
    rows, cols = np.nonzero(np.abs(b) > 0)
    return int(np.max(np.abs(rows - cols), initial=0))


def traceless_diagonals(parent: OperatorSystem) -> Subspace:
    """J(n) inside a realized system containing the diagonal matrices."""
    n = parent.ambient_dim
    gens = [parent.coefficients(matcore.elementary(i, i, n) - matcore.elementary(i + 1, i + 1, n)) for i in range(n - 1)]
    return Subspace(parent, np.array(gens))


@functools.lru_cache(maxsize=None)
def m_mod_j(n: int) -> OperatorSystem:
    parent = full(_size(n, 2))
    return quotient_system(parent, traceless_diagonals(parent), name=f"M({n})/J({n})")


@functools.lru_cache(maxsize=None)
def t_mod_j(n: int) -> OperatorSystem:
    """T(n)/J(n), which is S_{n-1} as an abstract system."""
    parent = tridiagonal(_size(n, 2))
    return quotient_system(parent, traceless_diagonals(parent), name=f"T({n})/J({n})")


@functools.lru_cache(maxsize=None)
def snd(n: int) -> OperatorSystem:
    """Span of I, E_12 and E_21 in each 2 x 2 block of M_{2n}."""
    _size(n)
    d = 2 * n
    basis = [np.eye(d)]
    for i in range(n):
        e = matcore.elementary(2 * i, 2 * i + 1, d)
        basis += [e + e.T, 1j * (e - e.T)]
    name = "S2d" if n == 2 else f"Snd({n})"
    return make_concrete(name, d, basis)


def s2d() -> OperatorSystem:
    return snd(2)


def canonical(name: str) -> OperatorSystem:
    """Look up a system by its canonical name."""
    text = name.replace(" ", "")
    if text == "S2d":
        return s2d()
    quotient = re.fullmatch(r"(M|T)\((\d+)\)/J\((\d+)\)", text)
    if quotient:
        head, a, b = quotient.groups()
        if a != b:
            raise InputError(f"quotient sizes differ in '{name}'")
        return m_mod_j(int(a)) if head == "M" else t_mod_j(int(a))
    match = _PATTERN.match(text)
    builders = {"full": full, "diag": diag, "T": tridiagonal, "Snd": snd}
    if match and match.group(1) in builders and match.group(2) and not match.group(3):
        return builders[match.group(1)](int(match.group(2)))
    raise InputError(f"unknown canonical system '{name}'", suggestion=f"Known systems: {', '.join(SYSTEM_NAMES)}")


# -----------------------------------------------------------------------------
# Maps
# -----------------------------------------------------------------------------


def _on_full(name: str, source: OperatorSystem, target: OperatorSystem, fn) -> LinearMapSpec:
    images = np.array([target.coefficients(fn(b)) for b in source.basis])
    return LinearMapSpec(source, target, images, name=name)


def identity_map(n: int) -> LinearMapSpec:
    s = full(n)
    return _on_full(f"identity({n})", s, s, lambda b: b)


def transpose_map(n: int) -> LinearMapSpec:
    s = full(n)
    return _on_full(f"transpose({n})", s, s, lambda b: b.T)


def compression_map(m: int, n: int) -> LinearMapSpec:
    """M_m -> M_n, X -> upper-left n x n corner."""
    if n > m:
        raise InputError(f"compression needs n <= m, got m={m}, n={n}")
    return _on_full(f"compression({m},{n})", full(m), full(n), lambda b: b[:n, :n])


def canonical_map(name: str) -> LinearMapSpec:
    match = _PATTERN.match(name)
    if match and match.group(2):
        head, a, b = match.group(1), int(match.group(2)), match.group(3)
        if head == "identity" and b is None:
            return identity_map(a)
        if head == "transpose" and b is None:
            return transpose_map(a)
        if head == "compression" and b is not None:
            return compression_map(a, int(b))
    raise InputError(f"unknown canonical map '{name}'", suggestion=f"Known maps: {', '.join(MAP_NAMES)}")

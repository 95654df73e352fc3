"""Dual operator systems.

The dual S^d of a finite-dimensional system carries the dual basis of S. Its
unit is the designated faithful state of S and its own designated state is
evaluation at the unit of S, so taking the dual twice returns the original
coefficient data. An element F of M_m(S^d) is positive exactly when the map
S -> M_m, b_k -> F[:, :, k] is completely positive.
"""

from __future__ import annotations

import functools
import logging

import numpy as np

from opsystk.errors import InputError
from opsystk.linalg.sdpcore import DEFAULT_TOL
from opsystk.systems.opsys import (
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    apply_map,
    cp_check,
    kpos_refute,
    matrix_algebra,
    register_oracle,
    register_verifier,
    undecided,
    verify,
)

logger = logging.getLogger(__name__)


def dual_system(s: OperatorSystem, name: str | None = None) -> OperatorSystem:
    """S^d with unit = the faithful state of S."""
    return OperatorSystem(
        name=name or f"{s.name}^d",
        kind=SystemKind.DUAL,
        unit=np.array(s.state, dtype=complex),
        state=np.array(s.unit, dtype=complex),
        parents=(s,),
        provenance={
            "parent": s.name,
            "unit": "faithful state of parent",
            "parent_state": s.provenance.get("faithful_state", "given"),
        },
    )


@functools.lru_cache(maxsize=None)
def _target_algebra(m: int) -> OperatorSystem:
    return matrix_algebra(m)


def element_map(f: LevelElement) -> LinearMapSpec:
    """The map S -> M_m, s -> (f_ij(s)), attached to F in M_m(S^d)."""
    system = f.system
    if system.kind is not SystemKind.DUAL:
        raise InputError(f"'{system.name}' is not a dual system")
    target = _target_algebra(f.level)
    mats = f.coeffs.transpose(2, 0, 1)
    mats = (mats + mats.conj().transpose(0, 2, 1)) / 2
    images = np.array([target.coefficients(m) for m in mats])
    return LinearMapSpec(system.parent(), target, images, name=f"map({system.name})")


@register_oracle(SystemKind.DUAL)
def dual_cone_member(f: LevelElement, tol: float = DEFAULT_TOL) -> ConeVerdict:
    """F is in M_m(S^d)^+ iff its map S -> M_m is completely positive."""
    phi = element_map(f.hermitian())
    inner = cp_check(phi, tol)
    return ConeVerdict(inner.answer, {"kind": "via-map", "map": phi, "inner": inner}, tol)


@register_verifier("via-map")
def _verify_via_map(_: LevelElement, verdict: ConeVerdict) -> bool:
    return verify(verdict.certificate["map"], verdict.certificate["inner"])


def dual_map(
    phi: LinearMapSpec,
    source_dual: OperatorSystem | None = None,
    target_dual: OperatorSystem | None = None,
) -> LinearMapSpec:
    """phi^d: T^d -> S^d, f -> f o phi."""
    src = source_dual or dual_system(phi.target)
    tgt = target_dual or dual_system(phi.source)
    if src.dim != phi.target.dim or tgt.dim != phi.source.dim:
        raise InputError("dual systems do not match the map's source and target")
    return LinearMapSpec(src, tgt, phi.images.T, name=f"{phi.name}^d")


def evaluate(f: np.ndarray, s: np.ndarray) -> complex:
    """f(s) for coefficient vectors f over the dual basis and s over the basis."""
    return complex(np.asarray(s) @ np.asarray(f))


def double_dual_pairing(s: OperatorSystem) -> np.ndarray:
    """Matrix of iota(b_k)(delta_j) = delta_j(b_k), where iota: S -> S^dd is evaluation.

    The identity matrix means S^dd is S with the same basis, unit and state.
    """
    d = dual_system(s)
    dd = dual_system(d)
    eye = np.eye(s.dim, dtype=complex)
    pairing = np.array([[evaluate(eye[j], eye[k]) for j in range(d.dim)] for k in range(s.dim)])
    if not (np.allclose(dd.unit, s.unit) and np.allclose(dd.state, s.state)):
        logger.warning("double dual of '%s' does not reproduce its unit and state", s.name)
    return pairing


def double_dual_map(s: OperatorSystem) -> LinearMapSpec:
    """The canonical identification S -> S^dd."""
    return LinearMapSpec(s, dual_system(dual_system(s)), np.eye(s.dim), name=f"iota({s.name})")


def primal_map(phi_d: LinearMapSpec) -> LinearMapSpec:
    """Recover phi: S -> T from a map T^d -> S^d between dual systems."""
    src, tgt = phi_d.source, phi_d.target
    if src.kind is not SystemKind.DUAL or tgt.kind is not SystemKind.DUAL:
        raise InputError("primal_map needs a map between dual systems")
    return LinearMapSpec(tgt.parent(), src.parent(), phi_d.images.T, name=f"pre({phi_d.name})")


def dual_kpos_refute(
    phi_d: LinearMapSpec,
    k: int,
    budget: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    tol: float = DEFAULT_TOL,
) -> ConeVerdict:
    """k-positivity of a map between duals, searched through the primal map.

    A violation (X, v) for phi gives the cp map F(t) = W* t W with the
    columns of W the blocks of v; then phi^d(F) = F o phi is not k-positive,
    which the dual cone oracle certifies.
    """
    phi = primal_map(phi_d)
    found = kpos_refute(phi, k, budget=budget, seed=seed, tol=tol)
    if found.member:
        return ConeVerdict(Answer.MEMBER, {"kind": "via-primal", "primal": phi, "inner": found}, tol)
    if found.kind != "kpos-violation":
        return found if found.undecided else undecided(tol, "primal refutation without a vector", inner=found)
    q = phi.target.ambient_dim
    w = found.certificate["vector"].reshape(k, q).T
    t_basis = phi.target.basis
    f = LevelElement(phi_d.source, np.einsum("xi,lxy,yj->ijl", w.conj(), t_basis, w))
    g = apply_map(phi_d, f)
    f_verdict = dual_cone_member(f, tol)
    g_verdict = dual_cone_member(g, tol)
    if not (f_verdict.member and g_verdict.refuted):
        logger.debug("dual witness did not certify: F %s, phi^d(F) %s", f_verdict.answer, g_verdict.answer)
        return undecided(tol, "dual witness not certified", level=k)
    return ConeVerdict(
        Answer.NOT_MEMBER,
        {"kind": "dual-kpos", "element": f, "image": g, "positive": f_verdict, "violated": g_verdict, "level": k},
        tol,
    )


@register_verifier("via-primal")
def _verify_via_primal(_: LinearMapSpec, verdict: ConeVerdict) -> bool:
    return verify(verdict.certificate["primal"], verdict.certificate["inner"])


@register_verifier("dual-kpos")
def _verify_dual_kpos(phi_d: LinearMapSpec, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    image = apply_map(phi_d, cert["element"])
    if not np.allclose(image.coeffs, cert["image"].coeffs, atol=10 * verdict.tol):
        return False
    return (
        cert["positive"].member
        and cert["violated"].refuted
        and verify(cert["element"], cert["positive"])
        and verify(cert["image"], cert["violated"])
    )

"""Null subspaces, quotient systems and the coproduct.

Only null subspaces (kernels containing no nonzero positive element) are
used as kernels. For those the quotient cone needs no Archimedean closure:
u + J is positive at level n iff some representative u + j with j in M_n(J)
is positive in the parent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from opsystk.errors import InputError, UnsupportedQueryError
from opsystk.linalg import matcore
from opsystk.linalg.sdpcore import DEFAULT_TOL, SdpStatus, max_min_eigenvalue
from opsystk.systems.opsys import (
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    direct_sum,
    inner_tol,
    is_unital,
    register_oracle,
    register_verifier,
    undecided,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Subspace:
    """A *-closed subspace of a system, spanned by coefficient vectors."""

    parent: OperatorSystem
    generators: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.generators, dtype=complex)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        if g.size and g.shape[1] != self.parent.dim:
            raise InputError(f"subspace generators need {self.parent.dim} coefficients, got {g.shape[1]}")
        object.__setattr__(self, "generators", g.reshape(-1, self.parent.dim))

    def hermitian_basis(self, rank_tol: float = 1e-10) -> np.ndarray:
        """Orthonormal real coefficient vectors spanning the self-adjoint part, shape (dim, r)."""
        if not self.generators.size:
            return np.zeros((self.parent.dim, 0))
        stacked = np.vstack([self.generators.real, self.generators.imag]).T
        u, s, _ = np.linalg.svd(stacked, full_matrices=False)
        rank = int(np.sum(s > rank_tol * max(1.0, s[0] if len(s) else 0.0)))
        return u[:, :rank]

    @property
    def dim(self) -> int:
        return self.hermitian_basis().shape[1]

    def is_star_closed(self, tol: float = 1e-9) -> bool:
        h = self.hermitian_basis()
        if not self.generators.size:
            return True
        resid = self.generators.T - h @ (h.T @ self.generators.T)
        return float(np.max(np.abs(resid))) <= tol * max(1.0, float(np.max(np.abs(self.generators))))

    def contains(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        h = self.hermitian_basis()
        x = np.asarray(x, dtype=complex)
        resid = x - h @ (h.T @ x)
        return float(np.linalg.norm(resid)) <= tol * max(1.0, float(np.linalg.norm(x)))


def _realized_parent(sub: Subspace) -> OperatorSystem:
    parent = sub.parent
    if not (parent.realized and parent.spatial):
        raise UnsupportedQueryError(
            f"kernels are supported in realized systems; '{parent.name}' is {parent.kind.value}"
        )
    return parent


def _level_directions(sub: Subspace, n: int) -> list[np.ndarray]:
    """Realized Hermitian basis of M_n(J)."""
    parent = _realized_parent(sub)
    mats = [parent.realize(h) for h in sub.hermitian_basis().T]
    out = []
    for m in mats:
        for i in range(n):
            out.append(matcore.kron(matcore.elementary(i, i, n), m))
            for j in range(i + 1, n):
                e = matcore.elementary(i, j, n)
                out.append(matcore.kron(e + e.T, m))
                out.append(matcore.kron(1j * (e - e.T), m))
    return out


def _complement(directions: list[np.ndarray], size: int) -> list[np.ndarray]:
    """Hermitian basis of the orthogonal complement of span(directions) in H_size."""
    if not directions:
        return list(matcore.herm_basis(size))
    coords = np.array([matcore.hvec(d) for d in directions]).real
    null = scipy.linalg.null_space(coords)
    return [matcore.hunvec(v, size) for v in null.T]


def is_null_subspace(sub: Subspace, tol: float = DEFAULT_TOL, level: int = 1) -> ConeVerdict:
    """MEMBER when M_level(J) contains no nonzero positive element.

    The null certificate is a positive definite density orthogonal to
    M_level(J); otherwise the certificate is a positive element of M_level(J).
    """
    parent = _realized_parent(sub)
    if not sub.is_star_closed():
        raise InputError("subspace is not closed under the involution")
    if sub.contains(parent.unit):
        raise InputError("subspace contains the unit", suggestion="A kernel never contains the order unit")
    size = level * parent.ambient_dim
    directions = _level_directions(sub, level)
    if not directions:
        return ConeVerdict(Answer.MEMBER, {"kind": "null-density", "density": np.eye(size) / size, "margin": 1.0 / size}, tol)
    perp = _complement(directions, size)
    # Trace-one element of the complement, then trace-zero directions inside it
    proj = sum(np.trace(p).real * p for p in perp)
    base = proj / np.trace(proj).real
    moves = [p - np.trace(p).real * base for p in perp]
    coords = np.array([matcore.hvec(m) for m in moves]).real
    u, s, _ = np.linalg.svd(coords.T, full_matrices=False) if len(moves) else (None, np.zeros(0), None)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 0.0)))
    moves = [matcore.hunvec(u[:, r], size) for r in range(rank)]
    result = max_min_eigenvalue(base, moves, inner_tol(tol))
    if result.status is not SdpStatus.OPTIMAL:
        return undecided(tol, "sdp", status=result.status.value)
    if result.value > tol:
        return ConeVerdict(
            Answer.MEMBER,
            {"kind": "null-density", "density": result.witness, "margin": result.value, "level": level},
            tol,
        )
    positive = result.functional - result.value * np.eye(size)
    return ConeVerdict(
        Answer.NOT_MEMBER,
        {"kind": "kernel-positive", "positive": positive, "margin": result.value, "level": level},
        tol,
    )


@register_verifier("null-density")
def _verify_null(sub: Subspace, verdict: ConeVerdict) -> bool:
    rho = verdict.certificate["density"]
    level = verdict.certificate.get("level", 1)
    tol = verdict.tol
    if matcore.min_eig(rho) <= 0:
        return False
    return all(abs(matcore.hs_inner(g, rho)) <= 10 * tol * max(1.0, matcore.op_norm(g)) for g in _level_directions(sub, level))


@register_verifier("kernel-positive")
def _verify_kernel_positive(sub: Subspace, verdict: ConeVerdict) -> bool:
    pos = verdict.certificate["positive"]
    level = verdict.certificate.get("level", 1)
    directions = _level_directions(sub, level)
    coords = np.array([matcore.hvec(d) for d in directions]).real.T
    target = matcore.hvec(pos).real
    fit = np.linalg.lstsq(coords, target, rcond=None)[0]
    inside = np.linalg.norm(coords @ fit - target) <= 10 * verdict.tol * max(1.0, np.linalg.norm(target))
    return bool(inside) and matcore.min_eig(pos) >= -10 * verdict.tol and np.trace(pos).real > 0


def _representatives(parent: OperatorSystem, kernel: np.ndarray) -> np.ndarray:
    """Coset representatives orthogonal to J, with e - P_J e first."""
    metric = parent.gram().real if parent.realized else np.eye(parent.dim)
    unit = parent.unit.real
    if kernel.shape[1]:
        mj = metric @ kernel
        proj = kernel @ np.linalg.solve(kernel.T @ mj, mj.T)
        first = unit - proj @ unit
        comp = scipy.linalg.null_space(mj.T)
    else:
        first = unit.copy()
        comp = np.eye(parent.dim)
    first = first / np.sqrt(first @ metric @ first)
    rest = comp - np.outer(first, first @ metric @ comp)
    # Orthonormalize what is left in the metric
    w, v = scipy.linalg.eigh(rest.T @ metric @ rest)
    keep = v[:, w > 1e-10 * max(1.0, w[-1] if len(w) else 0.0)]
    rest = rest @ keep
    if rest.shape[1]:
        g = rest.T @ metric @ rest
        rest = rest @ np.linalg.inv(np.linalg.cholesky(g)).T
    return np.column_stack([first, rest]) if rest.shape[1] else first[:, None]


def quotient_system(
    parent: OperatorSystem,
    kernel: Subspace,
    tol: float = DEFAULT_TOL,
    name: str | None = None,
    kind: SystemKind = SystemKind.QUOTIENT,
) -> OperatorSystem:
    """S/J for a null subspace J."""
    if kernel.parent is not parent:
        raise InputError("kernel does not live in the given system")
    null = is_null_subspace(kernel, tol)
    if not null.member:
        low = null.certificate.get("margin")
        raise InputError(
            f"subspace of '{parent.name}' is not null: it contains a positive element (margin {low})",
            suggestion="Only null subspaces can be used as kernels",
        )
    jbasis = kernel.hermitian_basis()
    reps = _representatives(parent, jbasis)
    # e = e_K + P_J e, so the unit coset is represented by reps[:, 0] up to scale
    full = np.column_stack([reps, jbasis]) if jbasis.shape[1] else reps
    inverse = np.linalg.inv(full)
    qmap = inverse[: reps.shape[1], :].T
    scale = (parent.unit.real @ qmap)[0]
    reps[:, 0] *= scale
    qmap[:, 0] /= scale
    unit = parent.unit @ qmap

    state_on_kernel = np.abs(jbasis.T @ parent.state) if jbasis.shape[1] else np.zeros(0)
    provenance = {
        "parent": parent.name,
        "kernel_dim": int(jbasis.shape[1]),
        "representatives": "orthogonal complement of the kernel",
    }
    if not state_on_kernel.size or np.max(state_on_kernel) <= 1e-10:
        state = reps.T @ parent.state
        provenance["faithful_state"] = "parent state"
    else:
        rho = null.certificate["density"]
        state = np.array([np.trace(rho @ parent.realize(r)) for r in reps.T])
        state = state / (unit @ state)
        provenance["faithful_state"] = "faithful state vanishing on the kernel"
        logger.info("parent state of '%s' does not vanish on the kernel; using a density orthogonal to it", parent.name)
    return OperatorSystem(
        name=name or f"{parent.name}/J",
        kind=kind,
        unit=np.asarray(unit, dtype=complex),
        state=np.asarray(state, dtype=complex),
        parents=(parent,),
        params={"kernel": kernel, "representatives": reps, "quotient_map": qmap},
        provenance=provenance,
    )


def quotient_map(quotient: OperatorSystem) -> LinearMapSpec:
    """The ucp map q: S -> S/J."""
    return LinearMapSpec(quotient.parent(), quotient, quotient.params["quotient_map"], name="q")


def lift(u: LevelElement) -> LevelElement:
    """Representative of u in the parent, built from the coset representatives."""
    reps = u.system.params["representatives"]
    return LevelElement(u.system.parent(), u.coeffs @ reps.T)


def project(quotient: OperatorSystem, x: LevelElement) -> LevelElement:
    """x + M_n(J) as an element of M_n(S/J)."""
    return LevelElement(quotient, x.coeffs @ quotient.params["quotient_map"])


def _quotient_margin(u: LevelElement, representative: LevelElement | None, tol: float):
    system = u.system
    kernel: Subspace = system.params["kernel"]
    _realized_parent(kernel)
    rep = representative if representative is not None else lift(u)
    base = rep.hermitian().realize()
    return rep, max_min_eigenvalue(base, _level_directions(kernel, u.level), inner_tol(tol))


@register_oracle(SystemKind.QUOTIENT, SystemKind.COPRODUCT)
def quotient_cone_member(
    u: LevelElement,
    tol: float = DEFAULT_TOL,
    representative: LevelElement | None = None,
) -> ConeVerdict:
    """Is u in the level-n cone of S/J? Decided on a representative in the parent."""
    rep, result = _quotient_margin(u, representative, tol)
    if result.status is not SdpStatus.OPTIMAL:
        return undecided(tol, "sdp", status=result.status.value)
    base = rep.realize()
    if result.value >= -tol:
        correction = LevelElement.from_realized(rep.system, result.witness - base)
        return ConeVerdict(
            Answer.MEMBER,
            {"kind": "quotient-witness", "representative": rep, "correction": correction, "margin": result.value},
            tol,
        )
    return ConeVerdict(
        Answer.NOT_MEMBER,
        {"kind": "quotient-separation", "representative": rep, "functional": result.functional, "margin": result.value},
        tol,
    )


def quotient_margin(u: LevelElement, tol: float = DEFAULT_TOL) -> float:
    """Largest t with rep(u) + j - t e_n positive for some j in M_n(J)."""
    _, result = _quotient_margin(u, None, tol)
    return result.value


def _same_coset(u: LevelElement, rep: LevelElement, tol: float) -> bool:
    back = project(u.system, rep)
    return bool(np.allclose(back.coeffs, u.hermitian().coeffs, atol=10 * tol * max(1.0, np.max(np.abs(u.coeffs)))))


@register_verifier("quotient-witness")
def _verify_quotient_witness(u: LevelElement, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    rep, corr = cert["representative"], cert["correction"]
    kernel: Subspace = u.system.params["kernel"]
    in_kernel = all(kernel.contains(corr.coeffs[i, j], tol=1e-6) for i in range(u.level) for j in range(u.level))
    total = (rep + corr).hermitian().realize()
    scale = max(1.0, matcore.op_norm(total))
    return _same_coset(u, rep, verdict.tol) and in_kernel and matcore.min_eig(total) >= -10 * verdict.tol * scale


@register_verifier("quotient-separation")
def _verify_quotient_separation(u: LevelElement, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    w = cert["functional"]
    rep = cert["representative"]
    tol = verdict.tol
    kernel: Subspace = u.system.params["kernel"]
    vanishes = all(
        abs(matcore.hs_inner(g, w)) <= 10 * tol * max(1.0, matcore.op_norm(g)) for g in _level_directions(kernel, u.level)
    )
    value = matcore.hs_inner(w, rep.hermitian().realize()).real
    return _same_coset(u, rep, tol) and vanishes and matcore.min_eig(w) >= -10 * tol and value < -tol


# -----------------------------------------------------------------------------
# Coproduct
# -----------------------------------------------------------------------------


def coproduct(s: OperatorSystem, t: OperatorSystem, tol: float = DEFAULT_TOL, name: str | None = None) -> OperatorSystem:
    """S (+)_1 T = (S (+) T) / span{(e, -e)}."""
    total = direct_sum(s, t)
    kernel = np.zeros(total.dim)
    kernel[-1] = 1.0
    out = quotient_system(total, Subspace(total, kernel), tol, name=name or f"{s.name}*{t.name}", kind=SystemKind.COPRODUCT)
    out.params["summands"] = (s, t)
    out.provenance["summands"] = [s.name, t.name]
    return out


def coproduct_embeddings(c: OperatorSystem) -> tuple[LinearMapSpec, LinearMapSpec]:
    """i(s) = (2s, 0) + J and j(t) = (0, 2t) + J."""
    s, t = c.params["summands"]
    qmap = c.params["quotient_map"]
    n1, n2 = s.dim, t.dim
    last = qmap.shape[0] - 1
    left = np.zeros((n1, qmap.shape[0]))
    left[0, 0] = left[0, last] = 1.0
    for k in range(1, n1):
        left[k, k] = 2.0
    right = np.zeros((n2, qmap.shape[0]))
    right[0, 0], right[0, last] = 1.0, -1.0
    for k in range(1, n2):
        right[k, n1 - 1 + k] = 2.0
    return (
        LinearMapSpec(s, c, left @ qmap, name="i"),
        LinearMapSpec(t, c, right @ qmap, name="j"),
    )


def coproduct_universal_map(c: OperatorSystem, phi: LinearMapSpec, psi: LinearMapSpec) -> LinearMapSpec:
    """(s, t) + J -> (phi(s) + psi(t)) / 2 for unital phi, psi into the same target."""
    s, t = c.params["summands"]
    if phi.target.dim != psi.target.dim:
        raise InputError("universal map needs phi and psi with the same target")
    if not (is_unital(phi, 1e-8) and is_unital(psi, 1e-8)):
        raise InputError("universal map needs unital phi and psi", suggestion="Unitalize the maps first")
    n1, n2 = s.dim, t.dim
    rows = [(phi.images[0] + psi.images[0]) / 2]
    rows += [phi.images[k] / 2 for k in range(1, n1)]
    rows += [psi.images[k] / 2 for k in range(1, n2)]
    rows.append((phi.images[0] - psi.images[0]) / 2)
    on_sum = np.array(rows)
    reps = c.params["representatives"]
    return LinearMapSpec(c, phi.target, reps.T @ on_sum, name=f"({phi.name}+{psi.name})/2")


# -----------------------------------------------------------------------------
# First isomorphism
# -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FirstIsomorphism:
    quotient: OperatorSystem
    induced: LinearMapSpec
    kernel: Subspace


def kernel_of(phi: LinearMapSpec, rank_tol: float = 1e-10) -> Subspace:
    null = scipy.linalg.null_space(phi.images.T, rcond=rank_tol)
    return Subspace(phi.source, null.T)


def first_isomorphism(phi: LinearMapSpec, tol: float = DEFAULT_TOL) -> FirstIsomorphism:
    """Factor a ucp phi through S/ker(phi); the induced map is injective and unital."""
    if not is_unital(phi, 1e-8):
        raise InputError(f"map '{phi.name}' is not unital")
    kernel = kernel_of(phi)
    quotient = quotient_system(phi.source, kernel, tol, name=f"{phi.source.name}/ker({phi.name})")
    induced = LinearMapSpec(quotient, phi.target, quotient.params["representatives"].T @ phi.images, name=f"{phi.name}~")
    if np.linalg.matrix_rank(induced.images) < quotient.dim:
        raise InputError("induced map is not injective")
    return FirstIsomorphism(quotient, induced, kernel)

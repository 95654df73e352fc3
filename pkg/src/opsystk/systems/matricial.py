"""OMIN_k / OMAX_k structures, matricial numerical ranges and finite k-lifts.

OMIN_k(S) and OMAX_k(S) share the basis of a concrete parent; their cones are
defined by queries rather than stored. Up to level k both agree with the
parent's PSD cones. Above level k the OMIN cone is tested against ucp maps
into M_k (parametrized by unital Choi matrices over the ambient algebra) and
the OMAX cone by decompositions sum_i A_i* D_i A_i with D_i in M_k(S)^+.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from opsystk.errors import InputError, VerificationError
from opsystk.linalg import matcore
from opsystk.linalg.sdpcore import DEFAULT_TOL, ComplexSdpBuilder, SdpStatus, max_min_eigenvalue, solve
from opsystk.systems.dualize import dual_system
from opsystk.systems.opsys import (
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    SEARCH_ROUNDS,
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    compose,
    apply_map,
    cp_check,
    dual_basis,
    full_basis,
    inner_tol,
    is_unital,
    kpos_refute,
    make_concrete,
    matrix_algebra,
    project_span,
    register_oracle,
    register_verifier,
    span_complement,
    spatial_cone_member,
    undecided,
)

logger = logging.getLogger(__name__)

OMAX_ROUNDS = 3
OMAX_FRAMES = 4
# Coordinate frames beyond this count are sampled instead of enumerated
MAX_COORDINATE_FRAMES = 10
# Restarts spent re-checking k-positivity of a separating map
SEPARATION_CHECK_BUDGET = 4


def _require_concrete(parent: OperatorSystem) -> None:
    if not (parent.realized and parent.spatial):
        raise InputError(
            f"'{parent.name}' is not a concrete system",
            suggestion="OMIN/OMAX structures and numerical ranges need a realized parent",
        )


def _k_structure(parent: OperatorSystem, k: int, kind: SystemKind, label: str, name: str | None) -> OperatorSystem:
    _require_concrete(parent)
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    return OperatorSystem(
        name=name or f"{label}_{k}({parent.name})",
        kind=kind,
        unit=parent.unit,
        state=parent.state,
        basis=parent.basis,
        spatial=False,
        parents=(parent,),
        params={"k": k, "budget": DEFAULT_RESTARTS, "seed": DEFAULT_SEED},
        provenance={"parent": parent.name, "k": k},
    )


def omin_system(parent: OperatorSystem, k: int, name: str | None = None) -> OperatorSystem:
    return _k_structure(parent, k, SystemKind.OMIN_K, "OMIN", name)


def omax_system(parent: OperatorSystem, k: int, name: str | None = None) -> OperatorSystem:
    return _k_structure(parent, k, SystemKind.OMAX_K, "OMAX", name)


def _parent_verdict(u: LevelElement, tol: float) -> ConeVerdict:
    element = LevelElement(u.system.parent(), u.coeffs)
    inner = spatial_cone_member(element, tol)
    return ConeVerdict(inner.answer, {"kind": "via-element", "element": element, "inner": inner}, tol)


# -----------------------------------------------------------------------------
# OMIN
# -----------------------------------------------------------------------------


def ucp_image(realized: np.ndarray, choi: np.ndarray, n: int, d: int, k: int) -> np.ndarray:
    """phi^(n)(U) for the map with Choi matrix sum_ab E_ab (x) phi(E_ab)."""
    u4 = realized.reshape(n, d, n, d)
    c4 = choi.reshape(d, k, d, k)
    return np.einsum("iajb,axby->ixjy", u4, c4).reshape(n * k, n * k)


def _unital_rows(builder: ComplexSdpBuilder, blk: int, d: int, k: int) -> None:
    for x in range(k):
        builder.constrain({blk: matcore.kron(np.eye(d), matcore.elementary(x, x, k))}, 1.0)
        for y in range(x + 1, k):
            builder.constrain_complex({blk: matcore.kron(np.eye(d), matcore.elementary(x, y, k))}, 0.0)


def _best_ucp(realized: np.ndarray, v: np.ndarray, n: int, d: int, k: int, tol: float) -> tuple[float, np.ndarray] | None:
    """Minimize v* phi^(n)(U) v over unital Choi matrices of maps M_d -> M_k."""
    vs = v.reshape(n, k)
    u4 = realized.reshape(n, d, n, d)
    g = np.einsum("iajb,ix,jy->axby", u4.conj(), vs, vs.conj()).reshape(d * k, d * k)
    builder = ComplexSdpBuilder()
    blk = builder.add_block(d * k)
    builder.objective(blk, g)
    _unital_rows(builder, blk, d, k)
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        logger.debug("ucp step: %s", sol.message)
        return None
    return sol.objective, matcore.hermitize(builder.decode(sol.primal)[0], "choi iterate")


def omin_search(
    u: LevelElement, k: int, budget: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL
) -> ConeVerdict:
    """Alternate between a ucp map into M_k and a unit vector to push v* phi^(n)(u) v below zero."""
    d = u.system.ambient_dim
    n = u.level
    realized = matcore.hermitize(u.realize(), "element")
    best = float("inf")
    for restart in range(budget):
        rng = np.random.default_rng([seed, restart])
        v = rng.standard_normal(n * k) + 1j * rng.standard_normal(n * k)
        v /= np.linalg.norm(v)
        last = float("inf")
        for _ in range(SEARCH_ROUNDS):
            step = _best_ucp(realized, v, n, d, k, tol)
            if step is None:
                break
            _, choi = step
            value, v = matcore.min_eig_pair(matcore.hermitize(ucp_image(realized, choi, n, d, k), "image"))
            best = min(best, value)
            if value < -tol:
                return ConeVerdict(
                    Answer.NOT_MEMBER,
                    {"kind": "omin-violation", "choi": choi, "vector": v, "value": value, "k": k, "seed": seed},
                    tol,
                )
            if value >= last - 1e-12:
                break
            last = value
    return undecided(tol, "no ucp map into M_k separates the element", k=k, budget=budget, best=best, seed=seed)


@register_oracle(SystemKind.OMIN_K)
def omin_member(
    u: LevelElement, tol: float = DEFAULT_TOL, budget: int | None = None, seed: int | None = None
) -> ConeVerdict:
    """Cone of OMIN_k(S).

    Parent-positive elements pass every ucp test. At levels up to k, and for
    k at least the ambient size, the cone is the parent's.
    """
    system = u.system
    k = system.params["k"]
    parent = _parent_verdict(u, tol)
    if parent.member or u.level <= k or k >= system.ambient_dim:
        return parent
    return omin_search(
        u,
        k,
        budget if budget is not None else system.params["budget"],
        system.params["seed"] if seed is None else seed,
        tol,
    )


@register_verifier("omin-violation")
def _verify_omin(u: LevelElement, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    choi, v, k = cert["choi"], cert["vector"], cert["k"]
    d, n = u.system.ambient_dim, u.level
    scale = max(1.0, matcore.op_norm(choi))
    if matcore.min_eig(choi) < -10 * verdict.tol * scale:
        return False
    unit_image = np.einsum("axay->xy", choi.reshape(d, k, d, k))
    if not np.allclose(unit_image, np.eye(k), atol=10 * verdict.tol):
        return False
    image = ucp_image(matcore.hermitize(u.realize(), "element"), choi, n, d, k)
    value = float(np.real(v.conj() @ image @ v) / np.real(v.conj() @ v))
    return value < -verdict.tol


# -----------------------------------------------------------------------------
# OMAX
# -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OmaxCertificate:
    """u + slack * e_n = sum_i A_i* D_i A_i with D_i in M_k(S)^+ and A_i of size k x n."""

    blocks: list[tuple[np.ndarray, LevelElement]]
    slack: float
    k: int
    residual: float = 0.0

    def assemble(self) -> np.ndarray:
        return sum(d.compress(a).coeffs for a, d in self.blocks)

    def verify(self, u: LevelElement, tol: float) -> bool:
        if not self.blocks or self.slack > 10 * tol:
            return False
        for _, d in self.blocks:
            if d.level > self.k or not spatial_cone_member(d, tol).member:
                return False
        target = u.coeffs + self.slack * LevelElement.unit(u.system, u.level).coeffs
        gap = float(np.max(np.abs(self.assemble() - target), initial=0.0))
        return gap <= 10 * tol * max(1.0, float(np.max(np.abs(u.coeffs), initial=0.0)))


def _coordinate_frames(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    subsets = list(itertools.combinations(range(n), k))
    if len(subsets) > MAX_COORDINATE_FRAMES:
        picks = rng.choice(len(subsets), MAX_COORDINATE_FRAMES, replace=False)
        subsets = [subsets[i] for i in sorted(picks)]
    frames = []
    for sub in subsets:
        a = np.zeros((k, n), dtype=complex)
        for r, i in enumerate(sub):
            a[r, i] = 1.0
        frames.append(a)
    return frames


def _random_frames(n: int, k: int, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    out = []
    for _ in range(count):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, _ = np.linalg.qr(g)
        out.append(q[:, :k].conj().T)
    return out


def _omax_decompose(
    u: LevelElement, frames: list[np.ndarray], k: int, tol: float
) -> tuple[float, list[LevelElement]] | None:
    """min t with u + t e_n = sum_i A_i* D_i A_i over D_i in M_k(parent)^+."""
    parent = u.system.parent()
    d = parent.ambient_dim
    n = u.level
    duals = dual_basis(parent)
    builder = ComplexSdpBuilder()
    blocks = [builder.add_block(k * d) for _ in frames]
    gs = []
    for a in frames:
        g = np.zeros((n, n, parent.dim, k * d, k * d), dtype=complex)
        for i in range(n):
            for j in range(n):
                outer = np.outer(a[:, i], a[:, j].conj())
                for p in range(parent.dim):
                    g[i, j, p] = matcore.kron(outer, duals[p])
        gs.append(g)
    sigma = parent.state.real
    hs = [np.einsum("iipxy,p->xy", g, sigma) / n for g in gs]
    psi_u = float(np.real(np.einsum("iip,p->", u.coeffs, sigma))) / n
    for blk, h in zip(blocks, hs):
        builder.objective(blk, h)
    for i in range(n):
        for j in range(i, n):
            for p in range(parent.dim):
                shift = parent.unit[p] if i == j else 0.0
                terms = {blk: g[i, j, p] - shift * h for blk, g, h in zip(blocks, gs, hs)}
                rhs = complex(u.coeffs[i, j, p] - shift * psi_u)
                if i == j:
                    builder.constrain(terms, rhs.real)
                else:
                    builder.constrain_complex(terms, rhs)
    for blk in blocks:
        for nr in span_complement(parent.basis):
            for x in range(k):
                builder.constrain({blk: matcore.kron(matcore.elementary(x, x, k), nr)}, 0.0)
                for y in range(x + 1, k):
                    builder.constrain_complex({blk: matcore.kron(matcore.elementary(x, y, k), nr)}, 0.0)
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        logger.debug("omax decomposition: %s", sol.message)
        return None
    ds = [
        LevelElement.from_realized(parent, project_span(parent, matcore.hermitize(m, "block"), k))
        for m in builder.decode(sol.primal)
    ]
    return sol.objective - psi_u, ds


def omax_search(
    u: LevelElement, k: int, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL, rounds: int = OMAX_ROUNDS
) -> tuple[OmaxCertificate | None, float]:
    rng = np.random.default_rng([seed, k, u.level])
    frames = _coordinate_frames(u.level, k, rng)
    best = float("inf")
    for _ in range(rounds):
        found = _omax_decompose(u, frames, k, tol)
        if found is not None:
            slack, ds = found
            best = min(best, slack)
            if slack <= tol:
                blocks = [(a, d) for a, d in zip(frames, ds) if np.max(np.abs(d.coeffs)) > 1e-12]
                cert = OmaxCertificate(blocks, slack, k)
                if blocks:
                    target = u.coeffs + slack * LevelElement.unit(u.system, u.level).coeffs
                    cert = OmaxCertificate(blocks, slack, k, float(np.max(np.abs(cert.assemble() - target))))
                if cert.verify(u, tol):
                    return cert, best
        frames = frames + _random_frames(u.level, k, rng, OMAX_FRAMES)
    return None, best


def _reduction_image(x: np.ndarray, k: int) -> np.ndarray:
    # tr(x) 1 - x / k is k-positive on every M_d
    return np.trace(x) * np.eye(x.shape[0]) - x / k


def _separating_map(parent: OperatorSystem, fn: Callable[[np.ndarray], np.ndarray], label: str) -> LinearMapSpec:
    target = matrix_algebra(parent.ambient_dim)
    images = np.array([target.coefficients(fn(b)) for b in parent.basis])
    return LinearMapSpec(parent, target, images, name=f"{label}|{parent.name}")


def separating_maps(
    parent: OperatorSystem, k: int, seed: int = DEFAULT_SEED, count: int = OMAX_FRAMES
) -> list[LinearMapSpec]:
    """k-positive maps out of the parent into its ambient algebra.

    The transpose (k = 1) and the map x -> tr(x) 1 - x/k, each also twisted
    by seeded unitaries on both sides.
    """
    bases = [("reduction", lambda x: _reduction_image(x, k))]
    if k == 1:
        bases.insert(0, ("transpose", lambda x: x.T))
    rng = np.random.default_rng([seed, k, parent.ambient_dim])
    d = parent.ambient_dim
    out = [_separating_map(parent, fn, label) for label, fn in bases]
    for i in range(count):
        v, w = (_random_frames(d, d, rng, 1)[0] for _ in range(2))
        label, fn = bases[i % len(bases)]
        out.append(
            _separating_map(parent, lambda x, fn=fn, v=v, w=w: w @ fn(v @ x @ v.conj().T) @ w.conj().T, f"{label}~{i}")
        )
    return out


def omax_separate(
    u: LevelElement, k: int, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL
) -> ConeVerdict | None:
    """Look for a k-positive map phi with phi^(n)(u) not positive.

    k-positive maps are completely positive on OMAX_k, so such a map refutes
    membership.
    """
    parent = u.system.parent()
    element = LevelElement(parent, u.coeffs)
    for phi in separating_maps(parent, k, seed):
        value, v = matcore.min_eig_pair(matcore.hermitize(apply_map(phi, element).realize(), "image"))
        if value < -tol:
            logger.debug("%s separates at level %d (%.3g)", phi.name, u.level, value)
            return ConeVerdict(
                Answer.NOT_MEMBER,
                {"kind": "omax-separation", "map": phi, "vector": v, "value": value, "k": k, "seed": seed},
                tol,
            )
    return None


@register_oracle(SystemKind.OMAX_K)
def omax_member(u: LevelElement, tol: float = DEFAULT_TOL, seed: int | None = None) -> ConeVerdict:
    """Cone of OMAX_k(S); parent refutations carry over since the OMAX cones are smaller.

    Above level k a failed decomposition search is followed by a search for a
    k-positive map that separates the element.
    """
    system = u.system
    k = system.params["k"]
    parent = _parent_verdict(u, tol)
    if parent.refuted or u.level <= k:
        return parent
    seed = system.params["seed"] if seed is None else seed
    cert, best = omax_search(u, k, seed, tol)
    if cert is not None:
        return ConeVerdict(Answer.MEMBER, {"kind": "omax-decomposition", "decomposition": cert}, tol)
    separated = omax_separate(u, k, seed, tol)
    if separated is not None:
        return separated
    return undecided(tol, "no k-block decomposition found", k=k, best_slack=best, seed=seed)


@register_verifier("omax-decomposition")
def _verify_omax(u: LevelElement, verdict: ConeVerdict) -> bool:
    return verdict.certificate["decomposition"].verify(u, verdict.tol)


@register_verifier("omax-separation")
def _verify_omax_separation(u: LevelElement, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    phi, v = cert["map"], cert["vector"]
    if phi.source.dim != u.system.dim:
        return False
    if kpos_refute(phi, cert["k"], budget=SEPARATION_CHECK_BUDGET, seed=cert["seed"], tol=verdict.tol).refuted:
        return False
    image = matcore.hermitize(apply_map(phi, LevelElement(phi.source, u.coeffs)).realize(), "image")
    value = float(np.real(v.conj() @ image @ v) / np.real(v.conj() @ v))
    return value < -verdict.tol


# -----------------------------------------------------------------------------
# Matricial numerical ranges
# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class NumericalRangeQuery:
    system: OperatorSystem
    x: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        _require_concrete(self.system)
        x = np.asarray(self.x, dtype=complex).reshape(-1)
        if x.shape[0] != self.system.dim:
            raise InputError(f"element needs {self.system.dim} coefficients, got {x.shape[0]}")
        a = matcore.as_matrix(self.target, "target")
        if a.shape[0] != a.shape[1]:
            raise InputError(f"target must be square, got {a.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "target", a)

    @property
    def n(self) -> int:
        return self.target.shape[0]


def _ucp_family(query: NumericalRangeQuery) -> tuple[np.ndarray | None, list[np.ndarray], float]:
    """Affine set of Hermitian Choi matrices of unital maps with phi(x) = A.

    Returns (base, directions, residual); base is None when the linear
    conditions are inconsistent.
    """
    d, n = query.system.ambient_dim, query.n
    x_mat = query.system.realize(query.x)
    functionals: list[tuple[np.ndarray, float]] = []
    for r in range(n):
        for s in range(n):
            unit = matcore.kron(np.eye(d), matcore.elementary(r, s, n))
            pin = matcore.kron(x_mat.conj(), matcore.elementary(r, s, n))
            want = 1.0 if r == s else 0.0
            functionals.append((unit, want))
            functionals.append((1j * unit, 0.0))
            functionals.append((pin, query.target[r, s].real))
            functionals.append((1j * pin, query.target[r, s].imag))
    basis = matcore.herm_basis(d * n)
    rows = np.array([[np.real(np.vdot(g, b)) for b in basis] for g, _ in functionals])
    rhs = np.array([v for _, v in functionals])
    c0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    residual = float(np.linalg.norm(rows @ c0 - rhs))
    if residual > 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
        return None, [], residual
    base = np.einsum("j,jab->ab", c0, basis)
    null = scipy.linalg.null_space(rows)
    return base, [np.einsum("j,jab->ab", v, basis) for v in null.T], residual


def numerical_range_member(query: NumericalRangeQuery, tol: float = DEFAULT_TOL) -> ConeVerdict:
    """Is A = phi(x) for some ucp phi: S -> M_n?"""
    base, directions, residual = _ucp_family(query)
    if base is None:
        return ConeVerdict(Answer.NOT_MEMBER, {"kind": "range-inconsistent", "residual": residual}, tol)
    margin = max_min_eigenvalue(base, directions, inner_tol(tol))
    if margin.status is not SdpStatus.OPTIMAL:
        return undecided(tol, f"solver {margin.status.value}")
    if margin.value >= -tol:
        return ConeVerdict(Answer.MEMBER, {"kind": "range-choi", "choi": margin.witness, "margin": margin.value}, tol)
    return ConeVerdict(
        Answer.NOT_MEMBER,
        {"kind": "range-separation", "functional": margin.functional, "value": margin.value},
        tol,
    )


@register_verifier("range-choi")
def _verify_range_choi(query: NumericalRangeQuery, verdict: ConeVerdict) -> bool:
    choi = verdict.certificate["choi"]
    d, n = query.system.ambient_dim, query.n
    if matcore.min_eig(choi) < -10 * verdict.tol * max(1.0, matcore.op_norm(choi)):
        return False
    c4 = choi.reshape(d, n, d, n)
    unit_image = np.einsum("axay->xy", c4)
    image = np.einsum("ab,axby->xy", query.system.realize(query.x), c4)
    return np.allclose(unit_image, np.eye(n), atol=10 * verdict.tol) and np.allclose(
        image, query.target, atol=10 * verdict.tol * max(1.0, matcore.op_norm(query.target))
    )


@register_verifier("range-separation")
def _verify_range_separation(query: NumericalRangeQuery, verdict: ConeVerdict) -> bool:
    w = verdict.certificate["functional"]
    base, directions, _ = _ucp_family(query)
    if base is None or matcore.min_eig(w) < -10 * verdict.tol:
        return False
    scale = max(1.0, matcore.op_norm(base))
    if any(abs(matcore.hs_inner(g, w)) > 10 * verdict.tol * scale for g in directions):
        return False
    return float(np.real(matcore.hs_inner(base, w))) < -verdict.tol


@register_verifier("range-inconsistent")
def _verify_range_inconsistent(query: NumericalRangeQuery, verdict: ConeVerdict) -> bool:
    base, _, _ = _ucp_family(query)
    return base is None


def _support(system: OperatorSystem, x: np.ndarray, direction: np.ndarray, tol: float) -> tuple[float, np.ndarray]:
    d = system.ambient_dim
    direction = matcore.as_matrix(direction, "direction")
    n = direction.shape[0]
    x_mat = system.realize(np.asarray(x, dtype=complex).reshape(-1))
    builder = ComplexSdpBuilder()
    blk = builder.add_block(d * n)
    builder.objective(blk, -matcore.kron(x_mat.conj(), direction))
    _unital_rows(builder, blk, d, n)
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        raise VerificationError(f"support function solve ended {sol.status.value}: {sol.message}")
    choi = builder.decode(sol.primal)[0].reshape(d, n, d, n)
    return -sol.objective, np.einsum("ab,axby->xy", x_mat, choi)


def numerical_range_support(
    system: OperatorSystem, x: np.ndarray, direction: np.ndarray, tol: float = DEFAULT_TOL
) -> float:
    """max Re trace(D* A) over A in w_n(x)."""
    _require_concrete(system)
    return _support(system, x, direction, tol)[0]


@dataclass(frozen=True)
class BoundaryPoint:
    angle: float
    support: float
    point: complex


def numerical_range_boundary(
    system: OperatorSystem, x: np.ndarray, directions: int = 64, tol: float = DEFAULT_TOL
) -> list[BoundaryPoint]:
    """Support values of w_1(x) and the attaining points on evenly spaced directions."""
    _require_concrete(system)
    if directions < 3:
        raise InputError(f"need at least 3 directions, got {directions}")
    out = []
    for theta in np.linspace(0.0, 2 * np.pi, directions, endpoint=False):
        value, point = _support(system, x, np.array([[np.exp(1j * theta)]]), tol)
        out.append(BoundaryPoint(float(theta), value, complex(point[0, 0])))
    return out


# -----------------------------------------------------------------------------
# Finite k-lifting
# -----------------------------------------------------------------------------


def block_algebra(sizes: list[int], name: str | None = None) -> OperatorSystem:
    """The C*-algebra of block-diagonal matrices with the given block sizes."""
    if not sizes or any(s < 1 for s in sizes):
        raise InputError(f"block sizes must be positive, got {sizes}")
    total = sum(sizes)
    basis = []
    offset = 0
    for size in sizes:
        for b in full_basis(size):
            m = np.zeros((total, total), dtype=complex)
            m[offset : offset + size, offset : offset + size] = b
            basis.append(m)
        offset += size
    # drop one diagonal unit so that the identity can lead the basis
    basis = [np.eye(total)] + basis[1:]
    return make_concrete(name or "+".join(f"M{s}" for s in sizes), total, basis)


@dataclass(frozen=True, eq=False)
class BlockIdeal:
    """I = the blocks listed in ``dropped`` of the block algebra A."""

    sizes: tuple[int, ...]
    dropped: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(not 0 <= i < len(self.sizes) for i in self.dropped) or len(set(self.dropped)) != len(self.dropped):
            raise InputError(f"ideal blocks {self.dropped} do not index the blocks {self.sizes}")
        if len(self.dropped) == len(self.sizes):
            raise InputError("the ideal cannot be the whole algebra")

    @property
    def kept(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.sizes)) if i not in self.dropped)

    def algebra(self) -> OperatorSystem:
        return block_algebra(list(self.sizes))

    def quotient(self) -> OperatorSystem:
        return block_algebra([self.sizes[i] for i in self.kept], name="A/I")

    @property
    def offsets(self) -> list[int]:
        """Start of every block along the diagonal, followed by the total size."""
        return list(np.cumsum((0,) + self.sizes))

    def restrict(self, matrix: np.ndarray) -> np.ndarray:
        off = self.offsets
        return matcore.direct_sum([matrix[off[i] : off[i + 1], off[i] : off[i + 1]] for i in self.kept])

    def quotient_map(self, algebra: OperatorSystem, quotient: OperatorSystem) -> LinearMapSpec:
        images = np.array([quotient.coefficients(self.restrict(b)) for b in algebra.basis])
        return LinearMapSpec(algebra, quotient, images, name="q")


def klift_demo(
    phi: LinearMapSpec,
    ideal: BlockIdeal,
    k: int,
    budget: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    tol: float = DEFAULT_TOL,
) -> LinearMapSpec:
    """Unital k-positive lift of a ucp map into A/I through the quotient map.

    The kept blocks carry phi and every dropped block carries the faithful
    state of the source times the identity.
    """
    quotient = phi.target
    if quotient.ambient_dim != sum(ideal.sizes[i] for i in ideal.kept):
        raise InputError("map target does not match the kept blocks of the ideal")
    if not is_unital(phi, 1e-8) or not cp_check(phi, tol).member:
        raise InputError(f"map '{phi.name}' is not unital and completely positive")
    algebra = ideal.algebra()
    src = phi.source
    off = ideal.offsets
    kept_images = phi.image_matrices()
    images = []
    for idx in range(src.dim):
        full = np.zeros((algebra.ambient_dim, algebra.ambient_dim), dtype=complex)
        pos = 0
        for i in range(len(ideal.sizes)):
            size = ideal.sizes[i]
            if i in ideal.kept:
                full[off[i] : off[i + 1], off[i] : off[i + 1]] = kept_images[idx][pos : pos + size, pos : pos + size]
                pos += size
            else:
                full[off[i] : off[i + 1], off[i] : off[i + 1]] = src.state[idx] * np.eye(size)
        images.append(algebra.coefficients(full))
    lift = LinearMapSpec(src, algebra, np.array(images), name=f"lift({phi.name})")

    q = ideal.quotient_map(algebra, quotient)
    if not np.allclose(compose(q, lift).images, phi.images, atol=10 * tol):
        raise VerificationError("lift does not factor through the quotient map")
    if not is_unital(lift, 1e-8):
        raise VerificationError("lift is not unital")
    verdict = kpos_refute(lift, k, budget=budget, seed=seed, tol=tol)
    if verdict.refuted:
        raise VerificationError(f"lift is not {k}-positive")
    logger.info("lifted '%s' to %s (%d-positivity: %s)", phi.name, algebra.name, k, verdict.answer.value)
    return lift


# -----------------------------------------------------------------------------
# Gamma embedding
# -----------------------------------------------------------------------------


def _gamma_frame(n: int) -> tuple[OperatorSystem, np.ndarray, np.ndarray]:
    """T(n+1)/J(n+1), the coordinates K of {e, g_i, g_i*} and the target images of their dual basis."""
    from opsystk.atlas.canonical import t_mod_j

    quotient = t_mod_j(n + 1)
    tri = quotient.parent()
    qmap = quotient.params["quotient_map"]

    def coords(m: np.ndarray) -> np.ndarray:
        return tri.coefficients(m) @ qmap

    rows = [coords(np.eye(n + 1))]
    images = [np.eye(2 * n, dtype=complex)]
    for i in range(n):
        g = (n + 1) * matcore.elementary(i, i + 1, n + 1)
        rows += [coords(g), coords(g.conj().T)]
        block_12 = np.zeros((2 * n, 2 * n), dtype=complex)
        block_12[2 * i, 2 * i + 1] = 1.0
        images += [block_12, block_12.T.copy()]
    return quotient, np.array(rows), np.array(images)


def gamma_generators(n: int) -> np.ndarray:
    """Coordinates of delta, delta_1, delta_1*, ... in the dual basis of S_n^d (one row each)."""
    _, k, _ = _gamma_frame(n)
    return np.linalg.inv(k).T


def gamma_map(n: int) -> LinearMapSpec:
    """gamma: S_n^d -> Snd(n), delta -> I, delta_i -> E_12 and delta_i* -> E_21 in block i.

    S_n is T(n+1)/J(n+1) with g_i = (n+1) E_{i,i+1} + J; the dual basis
    {delta, delta_i, delta_i*} is taken against {e, g_i, g_i*}.
    """
    from opsystk.atlas.canonical import snd

    quotient, k, images = _gamma_frame(n)
    source = dual_system(quotient, name=f"S{n}^d")
    target = snd(n)
    # coordinate functional m equals sum_j K[j, m] delta_j
    mats = np.einsum("jm,jab->mab", k, images)
    coeffs = np.array([target.coefficients(matcore.hermitize(m, "gamma image")) for m in mats])
    return LinearMapSpec(source, target, coeffs, name="gamma")

"""Minimal and maximal tensor products of operator systems.

The minimal tensor product of realized spatial factors is spatial in the
Kronecker basis b_i (x) c_j, stored with index i * dim(T) + j. The maximal
tensor product is decided exactly in two situations: when a factor is a
C*-algebra (max = min, spatially or through the min cone of the same factors)
and when both factors are duals of realized systems (then max is the dual of
a spatial min cone). Every other max cone goes to a bounded decomposition
search whose positive answers carry a DecompositionCertificate and whose
negative answers come from the min cone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from opsystk.errors import InputError, UnsupportedQueryError
from opsystk.linalg import matcore
from opsystk.linalg.sdpcore import DEFAULT_TOL, ComplexSdpBuilder, SdpStatus, solve
from opsystk.systems.dualize import dual_cone_member, dual_system
from opsystk.systems.opsys import (
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    SystemKind,
    cone_member,
    cp_check,
    dual_basis,
    inner_tol,
    is_cstar_algebra,
    project_span,
    register_oracle,
    register_verifier,
    span_complement,
    spatial_cone_member,
    undecided,
    verify,
)

logger = logging.getLogger(__name__)

DEFAULT_HIER_LEVEL = 2
HIER_SEEDS = 8
HIER_ROUNDS = 3
# Blocks whose trace falls below this are dropped from certificates
BLOCK_DROP_TOL = 1e-12


class Exactness(str, Enum):
    EXACT_SPATIAL = "exact-spatial"
    EXACT_DUAL_SDP = "exact-dual-sdp"
    EXACT_NUCLEAR = "exact-nuclear"
    HIERARCHY = "hierarchy"


def factors(system: OperatorSystem) -> tuple[OperatorSystem, OperatorSystem]:
    if system.kind not in (SystemKind.TENSOR_MIN, SystemKind.TENSOR_MAX):
        raise InputError(f"'{system.name}' is not a tensor product")
    return system.parents[0], system.parents[1]


def exactness(system: OperatorSystem) -> Exactness:
    factors(system)
    return system.params["exactness"]


def _spatial_realized(s: OperatorSystem) -> bool:
    return s.realized and s.spatial


def _dual_of_realized(s: OperatorSystem) -> bool:
    return s.kind is SystemKind.DUAL and _spatial_realized(s.parent())


def _build(
    s: OperatorSystem,
    t: OperatorSystem,
    kind: SystemKind,
    symbol: str,
    name: str | None,
    klass: Exactness,
    spatial: bool,
    hier_level: int,
    seed: int,
) -> OperatorSystem:
    basis = None
    if s.realized and t.realized:
        basis = np.array([matcore.kron(b, c) for b in s.basis for c in t.basis])
    system = OperatorSystem(
        name=name or f"{s.name}{symbol}{t.name}",
        kind=kind,
        unit=np.kron(s.unit, t.unit),
        state=np.kron(s.state, t.state),
        basis=basis,
        spatial=spatial,
        parents=(s, t),
        params={"exactness": klass, "hier_level": hier_level, "seed": seed},
        provenance={"factors": [s.name, t.name], "exactness": klass.value, "basis_labels": "factor-index pairs"},
    )
    logger.debug("built %s (%s, dim %d)", system.name, klass.value, system.dim)
    return system


def tensor_min(
    s: OperatorSystem,
    t: OperatorSystem,
    name: str | None = None,
    hier_level: int = DEFAULT_HIER_LEVEL,
    seed: int = DEFAULT_SEED,
) -> OperatorSystem:
    """S (x)min T."""
    if _spatial_realized(s) and _spatial_realized(t):
        klass, spatial = Exactness.EXACT_SPATIAL, True
    elif _spatial_realized(s) or _spatial_realized(t):
        klass, spatial = Exactness.EXACT_DUAL_SDP, False
    elif _dual_of_realized(s) and _dual_of_realized(t) and (
        is_cstar_algebra(s.parent()) or is_cstar_algebra(t.parent())
    ):
        klass, spatial = Exactness.EXACT_DUAL_SDP, False
    else:
        klass, spatial = Exactness.HIERARCHY, False
    return _build(s, t, SystemKind.TENSOR_MIN, "(x)min", name, klass, spatial, hier_level, seed)


def tensor_max(
    s: OperatorSystem,
    t: OperatorSystem,
    name: str | None = None,
    hier_level: int = DEFAULT_HIER_LEVEL,
    seed: int = DEFAULT_SEED,
    force_hierarchy: bool = False,
) -> OperatorSystem:
    """S (x)max T.

    ``force_hierarchy`` skips the C*-algebra shortcuts so the decomposition
    search can be exercised on pairs where the answer is known.
    """
    if hier_level < 1:
        raise InputError(f"hierarchy level must be at least 1, got {hier_level}")
    cstar = _spatial_realized(s) and _spatial_realized(t) and (is_cstar_algebra(s) or is_cstar_algebra(t))
    if cstar and not force_hierarchy:
        klass, spatial = Exactness.EXACT_SPATIAL, True
    elif (is_cstar_algebra(s) or is_cstar_algebra(t)) and not force_hierarchy:
        # a C*-algebra factor makes max and min agree
        klass, spatial = Exactness.EXACT_NUCLEAR, False
    elif _dual_of_realized(s) and _dual_of_realized(t):
        klass, spatial = Exactness.EXACT_DUAL_SDP, False
    else:
        klass, spatial = Exactness.HIERARCHY, False
    system = _build(s, t, SystemKind.TENSOR_MAX, "(x)max", name, klass, spatial, hier_level, seed)
    system.params["force_hierarchy"] = force_hierarchy
    return system


def commuting_alias(s: OperatorSystem, t: OperatorSystem, name: str | None = None) -> OperatorSystem:
    """S (x)c T, available only when a factor is a finite-dimensional C*-algebra."""
    if not ((s.realized and is_cstar_algebra(s)) or (t.realized and is_cstar_algebra(t))):
        raise UnsupportedQueryError(
            f"commuting tensor of '{s.name}' and '{t.name}' needs a C*-algebra factor",
            suggestion="Use tensor_max or tensor_min; the commuting tensor of two general systems is not computed",
        )
    system = tensor_max(s, t, name=name or f"{s.name}(x)c{t.name}")
    system.provenance["alias"] = "commuting tensor equals max for a C*-algebra factor"
    return system


def tensor_map(
    phi: LinearMapSpec,
    psi: LinearMapSpec,
    source: OperatorSystem,
    target: OperatorSystem,
) -> LinearMapSpec:
    """phi (x) psi between tensor systems built from the maps' sources and targets."""
    if source.dim != phi.source.dim * psi.source.dim or target.dim != phi.target.dim * psi.target.dim:
        raise InputError("tensor systems do not match the factor maps")
    return LinearMapSpec(source, target, np.kron(phi.images, psi.images), name=f"{phi.name}(x){psi.name}")


def split(u: LevelElement) -> np.ndarray:
    """Coefficients of u as an (n, n, dim S, dim T) array."""
    s, t = factors(u.system)
    n = u.level
    return u.coeffs.reshape(n, n, s.dim, t.dim)


# -----------------------------------------------------------------------------
# Cone seeds
# -----------------------------------------------------------------------------


def shift_positive(x: LevelElement, margin: float = 1e-3) -> LevelElement:
    """x + c * unit with c just large enough for x to sit inside the cone."""
    w = matcore.min_eig(matcore.hermitize(x.realize(), "seed"))
    c = max(0.0, -w) + margin * max(1.0, matcore.op_norm(x.realize()))
    return x + c * LevelElement.unit(x.system, x.level)


def cone_seeds(system: OperatorSystem, k: int, rng: np.random.Generator, count: int = HIER_SEEDS) -> list[LevelElement]:
    """Members of M_k(S)^+: projected identity, unit, product and random elements."""
    d = system.ambient_dim
    seeds = []
    omega = np.zeros((k * d, k * d), dtype=complex)
    for r in range(min(k, d)):
        for s in range(min(k, d)):
            omega[r * d : (r + 1) * d, s * d : (s + 1) * d] = matcore.elementary(r, s, d)
    seeds.append(shift_positive(LevelElement.from_realized(system, project_span(system, omega, k))))
    seeds.append(LevelElement.unit(system, k))
    for j in range(1, system.dim):
        if len(seeds) >= count // 2 + 1:
            break
        b = system.basis[j]
        coeffs = np.zeros((k, k, system.dim), dtype=complex)
        for r in range(k):
            coeffs[r, r] = system.unit
            coeffs[r, r, j] += (-1) ** r / matcore.op_norm(b)
        seeds.append(LevelElement(system, coeffs))
    while len(seeds) < count:
        h = rng.standard_normal((k, k, system.dim)) + 1j * rng.standard_normal((k, k, system.dim))
        h = (h + h.transpose(1, 0, 2).conj()) / 2
        seeds.append(shift_positive(LevelElement(system, h), margin=0.0))
    return seeds


# -----------------------------------------------------------------------------
# Decomposition certificates
# -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecompositionCertificate:
    """u + slack * e_n = sum_i A_i* (P_i (x) Q_i) A_i with P_i, Q_i cone members."""

    blocks: list[tuple[np.ndarray, LevelElement, LevelElement]]
    slack: float
    level: int
    seed: int = DEFAULT_SEED
    residual: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)

    def assemble(self) -> np.ndarray:
        out = None
        for a, p, q in self.blocks:
            kp, kq = p.level, q.level
            pq = np.einsum("rsp,xyq->rxsypq", p.coeffs, q.coeffs)
            pq = pq.reshape(kp * kq, kp * kq, p.system.dim * q.system.dim)
            term = np.einsum("ia,ijc,jb->abc", a.conj(), pq, a)
            out = term if out is None else out + term
        return out

    def verify(self, u: LevelElement, tol: float) -> bool:
        if not self.blocks or self.slack > 10 * tol:
            return False
        for _, p, q in self.blocks:
            if not (cone_member(p, tol).member and cone_member(q, tol).member):
                return False
        target = u.coeffs + self.slack * LevelElement.unit(u.system, u.level).coeffs
        gap = float(np.max(np.abs(self.assemble() - target), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(u.coeffs), initial=0.0)))
        return gap <= 10 * tol * scale


def product_certificate(u_system: OperatorSystem, p: LevelElement, q: LevelElement, a: np.ndarray) -> LevelElement:
    """The element A* (P (x) Q) A of M_n(u_system)."""
    cert = DecompositionCertificate([(np.asarray(a, dtype=complex), p, q)], 0.0, max(p.level, q.level))
    return LevelElement(u_system, cert.assemble())


def _embedding(k: int, n: int, fixed_side: int) -> np.ndarray:
    """A with A* (P (x) W) A = sum_rs P_rs (x) W_rs, where W has k x k blocks of size n."""
    a = np.zeros((k * k * n, n), dtype=complex)
    for r in range(k):
        for i in range(n):
            x = r * n + i
            row = r * k * n + x if fixed_side == 0 else x * k + r
            a[row, i] = 1.0
    return a


def _decompose(
    u: LevelElement, fixed: list[LevelElement], side: int, k: int, tol: float
) -> tuple[float, list[LevelElement]] | None:
    """Solve for W_i in M_{kn}(other factor)^+ minimizing t with sum_i L_i(W_i) = u + t e_n.

    ``side`` is the position of the fixed factor. t is eliminated by pairing
    both sides with the product state, so every equation has e_n removed.
    """
    s, t = factors(u.system)
    free = t if side == 0 else s
    n = u.level
    d = free.ambient_dim
    size = k * n * d
    duals = dual_basis(free)
    sigma = np.kron(s.state, t.state).real
    unit = np.kron(s.unit, t.unit)
    dim_s, dim_t = s.dim, t.dim

    builder = ComplexSdpBuilder()
    blocks = [builder.add_block(size) for _ in fixed]
    # g[i][a, b, p, q] is the functional giving coefficient (p, q) of entry (a, b) of L_i(W)
    gs = []
    for f in fixed:
        g = np.zeros((n, n, dim_s, dim_t, size, size), dtype=complex)
        for a in range(n):
            for b in range(n):
                eab = matcore.elementary(a, b, n)
                for fi in range(f.system.dim):
                    outer = matcore.kron(f.coeffs[:, :, fi].conj(), eab)
                    for gi in range(free.dim):
                        mat = matcore.kron(outer, duals[gi])
                        if side == 0:
                            g[a, b, fi, gi] = mat
                        else:
                            g[a, b, gi, fi] = mat
        gs.append(g)
    sig = sigma.reshape(dim_s, dim_t)
    hs = [np.einsum("aapqxy,pq->xy", g, sig) / n for g in gs]
    u4 = split(u)
    psi_u = float(np.real(np.einsum("aapq,pq->", u4, sig))) / n
    for blk, h in zip(blocks, hs):
        builder.objective(blk, h)
    unit2 = unit.reshape(dim_s, dim_t)
    for a in range(n):
        for b in range(a, n):
            for p in range(dim_s):
                for q in range(dim_t):
                    shift = unit2[p, q] if a == b else 0.0
                    terms = {blk: g[a, b, p, q] - shift * h for blk, g, h in zip(blocks, gs, hs)}
                    rhs = complex(u4[a, b, p, q] - shift * psi_u)
                    if a == b:
                        builder.constrain(terms, rhs.real)
                    else:
                        builder.constrain_complex(terms, rhs)
    comp = span_complement(free.basis)
    for blk in blocks:
        for nr in comp:
            for x in range(k * n):
                builder.constrain({blk: matcore.kron(matcore.elementary(x, x, k * n), nr)}, 0.0)
                for y in range(x + 1, k * n):
                    builder.constrain_complex({blk: matcore.kron(matcore.elementary(x, y, k * n), nr)}, 0.0)
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        logger.debug("decomposition step (side %d): %s", side, sol.message)
        return None
    mats = builder.decode(sol.primal)
    ws = [
        LevelElement.from_realized(free, project_span(free, matcore.hermitize(w, "decomposition block"), k * n))
        for w in mats
    ]
    return sol.objective - psi_u, ws


def _shadow_compress(w: LevelElement, k: int) -> LevelElement:
    """Compress a level-kn element to level k along the top eigenvectors of its scalar shadow."""
    shadow = np.einsum("ijl,l->ij", w.coeffs, w.system.state)
    shadow = (shadow + shadow.conj().T) / 2
    _, vecs = np.linalg.eigh(shadow)
    return w.compress(vecs[:, -k:])


def _certificate(
    u: LevelElement, fixed: list[LevelElement], ws: list[LevelElement], side: int, k: int, slack: float, seed: int
) -> DecompositionCertificate:
    a = _embedding(k, u.level, side)
    blocks = []
    for f, w in zip(fixed, ws):
        if abs(np.real(np.einsum("iil,l->", w.coeffs, w.system.state))) <= BLOCK_DROP_TOL:
            continue
        p, q = (f, w) if side == 0 else (w, f)
        blocks.append((a, p, q))
    cert = DecompositionCertificate(blocks, slack, k, seed)
    if blocks:
        target = u.coeffs + slack * LevelElement.unit(u.system, u.level).coeffs
        residual = float(np.max(np.abs(cert.assemble() - target)))
        cert = DecompositionCertificate(blocks, slack, k, seed, residual)
    return cert


def hierarchy_search(
    u: LevelElement, k: int, tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED, rounds: int = HIER_ROUNDS
) -> tuple[DecompositionCertificate | None, float]:
    """Alternating decomposition search at block level k; returns (certificate, best slack)."""
    s, t = factors(u.system)
    rng = np.random.default_rng([seed, k])
    fixed = cone_seeds(s, k, rng)
    side = 0
    best = float("inf")
    for step in range(2 * rounds):
        found = _decompose(u, fixed, side, k, tol)
        if found is not None:
            slack, ws = found
            best = min(best, slack)
            logger.debug("hierarchy step %d (side %d): slack %.3g", step, side, slack)
            if slack <= tol:
                cert = _certificate(u, fixed, ws, side, k, slack, seed)
                if cert.verify(u, tol):
                    return cert, best
                logger.debug("decomposition did not re-verify (residual %.3g)", cert.residual)
            other = t if side == 0 else s
            nxt = [_shadow_compress(w, k) for w in ws if np.any(np.abs(w.coeffs) > BLOCK_DROP_TOL)]
            nxt = [shift_positive(x, margin=0.0) for x in nxt[: HIER_SEEDS // 2]]
            fixed = nxt + cone_seeds(other, k, rng, HIER_SEEDS - len(nxt))[: HIER_SEEDS - len(nxt)]
        else:
            other = t if side == 0 else s
            fixed = cone_seeds(other, k, rng)
        side = 1 - side
    return None, best


# -----------------------------------------------------------------------------
# Cone oracles
# -----------------------------------------------------------------------------


def _over_factor(u: LevelElement, side: int) -> LevelElement:
    """u as an element over factor ``side`` at level n * d, via the realized other factor."""
    s, t = factors(u.system)
    u4 = split(u)
    n = u.level
    if side == 0:
        d = t.ambient_dim
        blocks = np.einsum("abpq,qxy->axbyp", u4, t.basis)
        return LevelElement(s, blocks.reshape(n * d, n * d, s.dim))
    d = s.ambient_dim
    blocks = np.einsum("abpq,pxy->axbyq", u4, s.basis)
    return LevelElement(t, blocks.reshape(n * d, n * d, t.dim))


def _parent_product(system: OperatorSystem, maximal: bool) -> OperatorSystem:
    s, t = factors(system)
    cache = system.params.setdefault("_parent_products", {})
    if maximal not in cache:
        build = tensor_max if maximal else tensor_min
        cache[maximal] = build(s.parent(), t.parent())
    return cache[maximal]


def _via(element: LevelElement, inner: ConeVerdict, tol: float) -> ConeVerdict:
    return ConeVerdict(inner.answer, {"kind": "via-element", "element": element, "inner": inner}, tol)


def product_test(u: LevelElement, p: LevelElement, q: LevelElement) -> np.ndarray:
    """(phi_P (x) psi_Q)^(n)(u) for the maps out of the factors given by P and Q.

    P and Q are matrix coefficient arrays over the factors' bases (for dual
    factors: cone members of the parents); the result is the realized matrix
    sum_pq u[:, :, (p, q)] (x) P[:, :, p] (x) Q[:, :, q].
    """
    u4 = split(u)
    n, kp, kq = u.level, p.level, q.level
    out = np.einsum("abpq,rsp,xyq->arxbsy", u4, p.coeffs, q.coeffs)
    return out.reshape(n * kp * kq, n * kp * kq)


def product_refute(
    u: LevelElement, k: int = 2, budget: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL
) -> ConeVerdict:
    """Search products of cp maps out of dual factors that send u outside the PSD cone."""
    s, t = factors(u.system)
    rng = np.random.default_rng([seed, k, budget])
    ps = cone_seeds(s.parent(), k, rng, budget)
    qs = cone_seeds(t.parent(), k, rng, budget)
    best = float("inf")
    for p in ps:
        for q in qs:
            w, v = matcore.min_eig_pair(matcore.hermitize(product_test(u, p, q), "product image"))
            best = min(best, w)
            if w < -tol:
                return ConeVerdict(
                    Answer.NOT_MEMBER,
                    {"kind": "product-test", "left": p, "right": q, "vector": v, "value": w},
                    tol,
                )
    return undecided(tol, "no product test separates the element", budget=budget, best=best, seed=seed)


@register_verifier("product-test")
def _verify_product_test(u: LevelElement, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    p, q, v = cert["left"], cert["right"], cert["vector"]
    if not (cone_member(p, verdict.tol).member and cone_member(q, verdict.tol).member):
        return False
    m = product_test(u, p, q)
    value = float(np.real(v.conj() @ m @ v) / np.real(v.conj() @ v))
    return value < -verdict.tol


@register_oracle(SystemKind.TENSOR_MIN)
def min_cone_member(u: LevelElement, tol: float = DEFAULT_TOL, budget: int = DEFAULT_RESTARTS) -> ConeVerdict:
    """Cone of S (x)min T for factors without a joint spatial realization.

    With one realized spatial factor the element is read as a matrix over the
    other factor (cp maps out of the dual correspond to min-positive
    elements). For two duals of realized systems, max of the duals is decided
    exactly and sits inside min; product tests refute.
    """
    system = u.system
    if system.spatial:
        return spatial_cone_member(u, tol)
    s, t = factors(system)
    if _spatial_realized(t):
        element = _over_factor(u, 0)
        return _via(element, cone_member(element, tol), tol)
    if _spatial_realized(s):
        element = _over_factor(u, 1)
        return _via(element, cone_member(element, tol), tol)
    if not (_dual_of_realized(s) and _dual_of_realized(t)):
        raise UnsupportedQueryError(
            f"min cone of '{system.name}' needs a realized factor or two duals of realized systems"
        )
    if system.params["exactness"] is Exactness.EXACT_DUAL_SDP:
        # min of duals is the dual of max of the parents, which is spatial here
        element = LevelElement(dual_system(_parent_product(system, maximal=True)), u.coeffs)
        return _via(element, dual_cone_member(element, tol), tol)
    upper = LevelElement(tensor_max(s, t), u.coeffs)
    inner = max_cone_member(upper, tol)
    if inner.member:
        return _via(upper, inner, tol)
    return product_refute(u, k=system.params["hier_level"], budget=budget, seed=system.params["seed"], tol=tol)


def _min_check(u: LevelElement, tol: float) -> ConeVerdict | None:
    """Refute max membership through the min cone when that cone is decidable."""
    s, t = factors(u.system)
    if not (s.realized and t.realized):
        return None
    lower = LevelElement(tensor_min(s, t), u.coeffs)
    try:
        inner = cone_member(lower, tol)
    except UnsupportedQueryError:
        return None
    return inner if inner.refuted else None


@register_oracle(SystemKind.TENSOR_MAX)
def max_cone_member(
    u: LevelElement, tol: float = DEFAULT_TOL, hier_level: int | None = None, seed: int | None = None
) -> ConeVerdict:
    """Cone of S (x)max T.

    Exact for C*-algebra factors (spatially, or through the min cone when the
    other factor has no realization) and for duals of realized systems;
    otherwise a min-cone refutation pass followed by the decomposition search.
    """
    system = u.system
    if system.spatial:
        return spatial_cone_member(u, tol)
    u = u.hermitian()
    klass = system.params["exactness"]
    if klass is Exactness.EXACT_DUAL_SDP:
        element = LevelElement(dual_system(_parent_product(system, maximal=False)), u.coeffs)
        return _via(element, dual_cone_member(element, tol), tol)
    if klass is Exactness.EXACT_NUCLEAR:
        element = LevelElement(tensor_min(*factors(system)), u.coeffs)
        return _via(element, min_cone_member(element, tol), tol)
    k = hier_level or system.params["hier_level"]
    seed = system.params["seed"] if seed is None else seed
    refuted = _min_check(u, tol)
    if refuted is not None:
        return ConeVerdict(
            Answer.NOT_MEMBER,
            {"kind": "min-refutation", "element": LevelElement(tensor_min(*factors(system)), u.coeffs), "inner": refuted},
            tol,
        )
    s, t = factors(system)
    if not (_spatial_realized(s) and _spatial_realized(t)):
        return undecided(tol, "decomposition search needs realized spatial factors", level=k)
    cert, best = hierarchy_search(u, k, tol, seed)
    if cert is not None:
        return ConeVerdict(Answer.MEMBER, {"kind": "decomposition", "decomposition": cert}, tol)
    return undecided(tol, "hierarchy level reached", level=k, best_slack=best, seed=seed)


@register_verifier("decomposition")
def _verify_decomposition(u: LevelElement, verdict: ConeVerdict) -> bool:
    return verdict.certificate["decomposition"].verify(u, verdict.tol)


@register_verifier("min-refutation")
def _verify_min_refutation(_: LevelElement, verdict: ConeVerdict) -> bool:
    return verify(verdict.certificate["element"], verdict.certificate["inner"])


# -----------------------------------------------------------------------------
# Functoriality
# -----------------------------------------------------------------------------


@dataclass
class FunctorialityReport:
    samples: int
    preserved: int = 0
    undecided: int = 0
    violations: list[dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _push(phi: LinearMapSpec, x: LevelElement) -> LevelElement:
    return LevelElement(phi.target, np.einsum("ijk,kl->ijl", x.coeffs, phi.images))


def max_functoriality_check(
    phi1: LinearMapSpec,
    phi2: LinearMapSpec,
    samples: int = 20,
    k: int = DEFAULT_HIER_LEVEL,
    n: int = 1,
    seed: int = DEFAULT_SEED,
    tol: float = DEFAULT_TOL,
) -> FunctorialityReport:
    """Push certificate-built members of S1 (x)max S2 through phi1 (x) phi2.

    The pushed element carries the pushed certificate; the target max cone is
    also queried directly when it is exact.
    """
    for phi in (phi1, phi2):
        if not cp_check(phi, tol).member:
            raise InputError(f"map '{phi.name}' is not completely positive")
    source = tensor_max(phi1.source, phi2.source)
    target = tensor_max(phi1.target, phi2.target)
    rng = np.random.default_rng([seed, samples])
    report = FunctorialityReport(samples)
    for i in range(samples):
        p = cone_seeds(phi1.source, k, rng)[-1]
        q = cone_seeds(phi2.source, k, rng)[-1]
        a = rng.standard_normal((k * k, n)) + 1j * rng.standard_normal((k * k, n))
        u = product_certificate(source, p, q, a)
        pushed = DecompositionCertificate([(a, _push(phi1, p), _push(phi2, q))], 0.0, k, seed)
        image = LevelElement(target, pushed.assemble())
        ok = pushed.verify(image, tol)
        direct = cone_member(image, tol) if target.params["exactness"] is not Exactness.HIERARCHY else None
        if direct is not None and direct.refuted:
            ok = False
        mapped = tensor_map(phi1, phi2, source, target)
        if not np.allclose(_push(mapped, u).coeffs, image.coeffs, atol=10 * tol * max(1.0, np.abs(u.coeffs).max())):
            ok = False
        if ok:
            report.preserved += 1
        else:
            report.violations.append({"sample": i, "element": u, "image": image})
            logger.warning("functoriality violated on sample %d", i)
    return report

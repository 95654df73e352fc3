"""Operator systems, matrix-level elements, linear maps and cone oracles.

A system is a finite-dimensional unital *-vector space with a fixed basis
whose first element is the unit. Every basis element is self-adjoint, so the
involution on coefficient vectors is entrywise complex conjugation.

Concrete systems (and every derived system that comes with a faithful
realization, such as the minimal tensor product of concrete systems) are
*spatial*: their matrix cones are the PSD cones of the realization. All other
kinds answer cone queries through an oracle registered by the module that
builds them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np
import scipy.linalg

from opsystk.errors import InputError, UnsupportedQueryError, VerificationError
from opsystk.linalg import matcore
from opsystk.linalg.sdpcore import DEFAULT_TOL, ComplexSdpBuilder, SdpStatus, solve

logger = logging.getLogger(__name__)

# Gram condition above this is reported but accepted
GRAM_CONDITION_WARN = 1e8
# Relative eigenvalue floor of the Gram matrix below which a basis is dependent
GRAM_RANK_TOL = 1e-12
UNIT_TOL = 1e-10
DEFAULT_RESTARTS = 8
SEARCH_ROUNDS = 20
DEFAULT_SEED = 0


class SystemKind(str, Enum):
    CONCRETE = "concrete"
    DUAL = "dual"
    QUOTIENT = "quotient"
    COPRODUCT = "coproduct"
    TENSOR_MIN = "tensor_min"
    TENSOR_MAX = "tensor_max"
    OMIN_K = "omin"
    OMAX_K = "omax"


class Answer(str, Enum):
    MEMBER = "member"
    NOT_MEMBER = "not_member"
    UNDECIDED = "undecided"


def inner_tol(tol: float) -> float:
    """Tolerance handed to the SDP engine for an oracle running at ``tol``."""
    return max(tol * 0.1, 1e-10)


@dataclass(frozen=True, eq=False)
class OperatorSystem:
    """A finite-dimensional operator system with a distinguished basis.

    ``unit`` and ``state`` are coefficient data: ``unit`` is the coefficient
    vector of the order unit, ``state[k]`` the value of the designated faithful
    state on basis element k. ``basis`` holds a realization in M_d when one is
    known; ``spatial`` says whether the matrix cones are exactly the PSD cones
    of that realization.
    """

    name: str
    kind: SystemKind
    unit: np.ndarray
    state: np.ndarray
    basis: np.ndarray | None = None
    spatial: bool = False
    parents: tuple["OperatorSystem", ...] = ()
    params: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.unit)

    @property
    def realized(self) -> bool:
        return self.basis is not None

    @property
    def ambient_dim(self) -> int | None:
        return None if self.basis is None else int(self.basis.shape[1])

    def _require_basis(self) -> np.ndarray:
        if self.basis is None:
            raise UnsupportedQueryError(
                f"system '{self.name}' ({self.kind.value}) has no matrix realization"
            )
        return self.basis

    def gram(self) -> np.ndarray:
        """Hilbert-Schmidt Gram matrix trace(b_i* b_j)."""
        b = self._require_basis()
        return np.einsum("iab,jab->ij", b.conj(), b)

    def realize(self, coeffs: np.ndarray) -> np.ndarray:
        b = self._require_basis()
        return np.einsum("k,kab->ab", np.asarray(coeffs, dtype=complex), b)

    def coefficients(self, matrix: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        """Coefficient vector of a matrix in the span of the basis."""
        b = self._require_basis()
        m = np.asarray(matrix, dtype=complex)
        if m.shape != b.shape[1:]:
            raise InputError(f"{self.name}: expected a {b.shape[1]}x{b.shape[2]} matrix, got {m.shape}")
        rhs = np.einsum("kab,ab->k", b.conj(), m)
        c = np.linalg.solve(self.gram(), rhs)
        gap = float(np.linalg.norm(self.realize(c) - m))
        if gap > tol * max(1.0, float(np.linalg.norm(m))):
            raise InputError(f"matrix is not in the span of '{self.name}' (distance {gap:.3g})")
        return c

    def evaluate_state(self, coeffs: np.ndarray) -> complex:
        return complex(np.asarray(coeffs) @ self.state)

    def parent(self, index: int = 0) -> "OperatorSystem":
        if len(self.parents) <= index:
            raise InputError(f"system '{self.name}' has no parent #{index}")
        return self.parents[index]

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind.value, "dim": self.dim}
        if self.basis is not None:
            out["ambient_dim"] = self.ambient_dim
        out["spatial"] = self.spatial
        if self.parents:
            out["parents"] = [p.name for p in self.parents]
        out.update(self.provenance)
        return out


@dataclass(frozen=True, eq=False)
class LevelElement:
    """An element of M_n(S), stored as an (n, n, dim) coefficient array."""

    system: OperatorSystem
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c.reshape(1, 1, -1)
        if c.ndim != 3 or c.shape[0] != c.shape[1]:
            raise InputError(f"element coefficients must have shape (n, n, dim), got {c.shape}")
        if c.shape[2] != self.system.dim:
            raise InputError(
                f"element has {c.shape[2]} coefficients per entry but '{self.system.name}' has dimension {self.system.dim}"
            )
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def unit(cls, system: OperatorSystem, n: int = 1) -> "LevelElement":
        c = np.zeros((n, n, system.dim), dtype=complex)
        for i in range(n):
            c[i, i] = system.unit
        return cls(system, c)

    @classmethod
    def from_realized(cls, system: OperatorSystem, matrix: np.ndarray) -> "LevelElement":
        """Decompose an (n d) x (n d) block matrix over a realized system."""
        d = system.ambient_dim
        if d is None:
            system._require_basis()
        m = np.asarray(matrix, dtype=complex)
        if m.shape[0] != m.shape[1] or m.shape[0] % d:
            raise InputError(f"realized element must be square with size a multiple of {d}, got {m.shape}")
        n = m.shape[0] // d
        c = np.zeros((n, n, system.dim), dtype=complex)
        for i in range(n):
            for j in range(n):
                c[i, j] = system.coefficients(m[i * d : (i + 1) * d, j * d : (j + 1) * d])
        return cls(system, c)

    @property
    def level(self) -> int:
        return self.coeffs.shape[0]

    def adjoint(self) -> "LevelElement":
        return LevelElement(self.system, self.coeffs.transpose(1, 0, 2).conj())

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.coeffs.transpose(1, 0, 2).conj()), initial=0.0))

    def is_hermitian(self, tol: float = matcore.SYMMETRIZE_WARN_TOL) -> bool:
        return self.hermitian_defect() <= tol

    def hermitian(self) -> "LevelElement":
        """Symmetrized copy; rejects elements that are far from self-adjoint."""
        gap = self.hermitian_defect()
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        if gap > matcore.HERMITIAN_REJECT_TOL * scale:
            raise InputError(
                f"element of M_{self.level}({self.system.name}) is not self-adjoint (defect {gap:.3g})",
                suggestion="Cone queries need self-adjoint elements; norm queries accept any element",
            )
        if gap == 0.0:
            return self
        if gap > matcore.SYMMETRIZE_WARN_TOL:
            logger.warning("element symmetrized (defect %.3g)", gap)
        return LevelElement(self.system, (self.coeffs + self.adjoint().coeffs) / 2)

    def realize(self) -> np.ndarray:
        b = self.system._require_basis()
        n, d = self.level, b.shape[1]
        return np.einsum("ijk,kab->iajb", self.coeffs, b).reshape(n * d, n * d)

    def compress(self, a: np.ndarray) -> "LevelElement":
        """a* u a for a scalar n x p matrix a."""
        a = np.asarray(a, dtype=complex)
        return LevelElement(self.system, np.einsum("xi,xyc,yj->ijc", a.conj(), self.coeffs, a))

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.coeffs[i, j]

    def __add__(self, other: "LevelElement") -> "LevelElement":
        if other.system is not self.system or other.level != self.level:
            raise InputError("cannot add elements of different systems or levels")
        return LevelElement(self.system, self.coeffs + other.coeffs)

    def __sub__(self, other: "LevelElement") -> "LevelElement":
        return self + (-1.0) * other

    def __neg__(self) -> "LevelElement":
        return (-1.0) * self

    def __mul__(self, scalar: complex) -> "LevelElement":
        return LevelElement(self.system, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class LinearMapSpec:
    """A linear map S -> T; row k of ``images`` is the target coefficient vector of phi(b_k)."""

    source: OperatorSystem
    target: OperatorSystem
    images: np.ndarray
    name: str = "phi"

    def __post_init__(self) -> None:
        img = np.asarray(self.images, dtype=complex)
        if img.shape != (self.source.dim, self.target.dim):
            raise InputError(
                f"map '{self.name}' needs images of shape {(self.source.dim, self.target.dim)}, got {img.shape}"
            )
        object.__setattr__(self, "images", img)

    def image_matrices(self) -> np.ndarray:
        """phi(b_k) realized in the target's ambient algebra, shape (dim_src, q, q)."""
        return np.einsum("kl,lab->kab", self.images, self.target._require_basis())

    def unit_image(self) -> np.ndarray:
        return self.source.unit @ self.images


@dataclass(frozen=True, eq=False)
class ConeVerdict:
    """Tri-state answer plus the data needed to re-check it."""

    answer: Answer
    certificate: dict[str, Any]
    tol: float

    @property
    def member(self) -> bool:
        return self.answer is Answer.MEMBER

    @property
    def refuted(self) -> bool:
        return self.answer is Answer.NOT_MEMBER

    @property
    def undecided(self) -> bool:
        return self.answer is Answer.UNDECIDED

    @property
    def kind(self) -> str:
        return str(self.certificate.get("kind", ""))


def undecided(tol: float, reason: str, **extra: Any) -> ConeVerdict:
    return ConeVerdict(Answer.UNDECIDED, {"kind": "undecided", "reason": reason, **extra}, tol)


# -----------------------------------------------------------------------------
# Registries
# -----------------------------------------------------------------------------

ConeOracle = Callable[[LevelElement, float], ConeVerdict]
Verifier = Callable[[Any, ConeVerdict], bool]

_ORACLES: dict[SystemKind, ConeOracle] = {}
_VERIFIERS: dict[str, Verifier] = {}


def register_oracle(*kinds: SystemKind) -> Callable[[ConeOracle], ConeOracle]:
    def decorator(fn: ConeOracle) -> ConeOracle:
        for kind in kinds:
            _ORACLES[kind] = fn
        return fn

    return decorator


def register_verifier(*names: str) -> Callable[[Verifier], Verifier]:
    def decorator(fn: Verifier) -> Verifier:
        for name in names:
            _VERIFIERS[name] = fn
        return fn

    return decorator


def verify(subject: Any, verdict: ConeVerdict) -> bool:
    """Re-check a MEMBER or NOT_MEMBER certificate from scratch.

    ``subject`` is whatever the verdict is about: a LevelElement for cone
    queries, a LinearMapSpec for map queries.
    """
    if verdict.undecided:
        return True
    check = _VERIFIERS.get(verdict.kind)
    if check is None:
        logger.debug("no verifier for certificate kind %r", verdict.kind)
        return False
    return bool(check(subject, verdict))


def require_verified(subject: Any, verdict: ConeVerdict) -> ConeVerdict:
    if not verify(subject, verdict):
        raise VerificationError(f"{verdict.answer.value} certificate of kind '{verdict.kind}' failed re-verification")
    return verdict


# -----------------------------------------------------------------------------
# Construction
# -----------------------------------------------------------------------------


def _validate_basis(name: str, basis: np.ndarray) -> float:
    gram = np.einsum("iab,jab->ij", basis.conj(), basis)
    w = scipy.linalg.eigvalsh(gram)
    if w[0] <= GRAM_RANK_TOL * w[-1]:
        raise InputError(
            f"basis of '{name}' is linearly dependent",
            suggestion="Remove duplicate or redundant basis elements",
        )
    cond = float(w[-1] / w[0])
    if cond > GRAM_CONDITION_WARN:
        logger.warning("basis of '%s' is nearly dependent (Gram condition %.3g)", name, cond)
    return cond


def _spot_check_state(system: OperatorSystem, samples: int = 20, seed: int = DEFAULT_SEED) -> None:
    if abs(system.evaluate_state(system.unit) - 1) > 1e-8:
        raise InputError(f"faithful state of '{system.name}' does not take the value 1 on the unit")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        c = rng.standard_normal(system.dim)
        h = system.realize(c)
        low = matcore.min_eig(h)
        p = c - low * system.unit
        if system.evaluate_state(p).real <= 1e-12 * max(1.0, float(np.linalg.norm(p))):
            raise InputError(f"state given for '{system.name}' is not faithful")


def make_concrete(
    name: str,
    ambient_dim: int,
    basis: Sequence[np.ndarray],
    state: Sequence[float] | None = None,
) -> OperatorSystem:
    """Build a concrete operator system spanned by Hermitian matrices in M_d.

    Args:
        name: Identifier used in reports.
        ambient_dim: The size d of the ambient matrix algebra.
        basis: Hermitian d x d matrices. The first should be the identity; if
            it is not, the identity is moved or added to the front.
        state: Optional values of a faithful state on the basis. Defaults to
            the normalized trace.
    """
    if not len(basis):
        raise InputError(f"system '{name}' needs a nonempty basis")
    mats = [matcore.hermitize(b, f"{name} basis[{k}]", strict=True) for k, b in enumerate(basis)]
    eye = np.eye(ambient_dim)
    for k, m in enumerate(mats):
        if m.shape != (ambient_dim, ambient_dim):
            raise InputError(f"{name} basis[{k}] has shape {m.shape}, expected {(ambient_dim, ambient_dim)}")
    provenance: dict[str, Any] = {}
    if not np.allclose(mats[0], eye, atol=UNIT_TOL):
        at = next((k for k, m in enumerate(mats) if np.allclose(m, eye, atol=UNIT_TOL)), None)
        if at is None:
            logger.warning("basis of '%s' does not start with the identity; prepending it", name)
            mats.insert(0, eye.astype(complex))
            provenance["unit_added"] = True
        else:
            mats.insert(0, mats.pop(at))
    b = np.array(mats)
    provenance["gram_condition"] = _validate_basis(name, b)
    if state is None:
        values = np.trace(b, axis1=1, axis2=2).real / ambient_dim
        provenance["faithful_state"] = "normalized trace"
    else:
        values = np.asarray(state, dtype=complex)
        if provenance.get("unit_added"):
            values = np.concatenate([[1.0], values])
        if values.shape != (len(b),):
            raise InputError(f"faithful state of '{name}' needs {len(b)} values, got {values.shape}")
        provenance["faithful_state"] = "given"
    unit = np.zeros(len(b), dtype=complex)
    unit[0] = 1.0
    system = OperatorSystem(
        name=name,
        kind=SystemKind.CONCRETE,
        unit=unit,
        state=np.asarray(values, dtype=complex),
        basis=b,
        spatial=True,
        provenance=provenance,
    )
    if state is not None:
        _spot_check_state(system)
    return system


def full_basis(n: int) -> list[np.ndarray]:
    """I, E_ii - E_{i+1,i+1}, then E_ij + E_ji and i(E_ij - E_ji) for i < j."""
    out = [np.eye(n, dtype=complex)]
    for i in range(n - 1):
        out.append(matcore.elementary(i, i, n) - matcore.elementary(i + 1, i + 1, n))
    for i in range(n):
        for j in range(i + 1, n):
            e, f = matcore.elementary(i, j, n), matcore.elementary(j, i, n)
            out.extend([e + f, 1j * (e - f)])
    return out


def matrix_algebra(n: int, name: str | None = None) -> OperatorSystem:
    return make_concrete(name or f"M{n}", n, full_basis(n))


def direct_sum(s: OperatorSystem, t: OperatorSystem, name: str | None = None) -> OperatorSystem:
    """Block-diagonal S (+) T with basis (e,e), (b_k,0), (0,c_l), (e,-e).

    The faithful state averages the two factor states, so it vanishes on (e,-e).
    """
    bs, bt = s._require_basis(), t._require_basis()
    if not (s.spatial and t.spatial):
        raise UnsupportedQueryError("direct sums need spatial summands")
    d1, d2 = bs.shape[1], bt.shape[1]
    z1, z2 = np.zeros((d1, d1)), np.zeros((d2, d2))
    basis = [np.eye(d1 + d2, dtype=complex)]
    state = [1.0]
    for k in range(1, s.dim):
        basis.append(matcore.direct_sum([bs[k], z2]))
        state.append(s.state[k] / 2)
    for k in range(1, t.dim):
        basis.append(matcore.direct_sum([z1, bt[k]]))
        state.append(t.state[k] / 2)
    basis.append(matcore.direct_sum([np.eye(d1), -np.eye(d2)]))
    state.append(0.0)
    out = make_concrete(name or f"{s.name}+{t.name}", d1 + d2, basis, state=state)
    out.provenance["summands"] = [s.name, t.name]
    return out


def is_cstar_algebra(system: OperatorSystem, tol: float = 1e-9) -> bool:
    """True when the realized span is closed under multiplication."""
    if not (system.realized and system.spatial):
        return False
    b = system.basis
    gram_inv = np.linalg.inv(system.gram())
    for x in b:
        for y in b:
            p = x @ y
            c = gram_inv @ np.einsum("kab,ab->k", b.conj(), p)
            if np.linalg.norm(system.realize(c) - p) > tol * max(1.0, np.linalg.norm(p)):
                return False
    return True


# -----------------------------------------------------------------------------
# Cones and norms
# -----------------------------------------------------------------------------


def spatial_cone_member(u: LevelElement, tol: float = DEFAULT_TOL) -> ConeVerdict:
    w, v = matcore.min_eig_pair(u.realize())
    if w >= -tol:
        return ConeVerdict(Answer.MEMBER, {"kind": "eigen-witness", "min_eig": w}, tol)
    return ConeVerdict(Answer.NOT_MEMBER, {"kind": "eigen-witness", "min_eig": w, "vector": v}, tol)


@register_verifier("eigen-witness")
def _verify_eigen(u: LevelElement, verdict: ConeVerdict) -> bool:
    m = matcore.hermitize(u.realize(), "realized element")
    scale = max(1.0, matcore.op_norm(m))
    if verdict.member:
        return matcore.min_eig(m) >= -10 * verdict.tol * scale
    v = verdict.certificate["vector"]
    value = float(np.real(v.conj() @ m @ v) / np.real(v.conj() @ v))
    return value < -verdict.tol and abs(value - verdict.certificate["min_eig"]) <= 10 * verdict.tol * scale


def cone_member(u: LevelElement, tol: float = DEFAULT_TOL) -> ConeVerdict:
    """Is the self-adjoint element u in the level-n cone of its system?"""
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    u = u.hermitian()
    system = u.system
    if system.spatial:
        return spatial_cone_member(u, tol)
    oracle = _ORACLES.get(system.kind)
    if oracle is None:
        raise UnsupportedQueryError(f"no cone oracle for systems of kind '{system.kind.value}'")
    return oracle(u, tol)


@dataclass(frozen=True)
class NormBounds:
    lower: float
    upper: float
    steps: int = 0

    @property
    def value(self) -> float:
        return (self.lower + self.upper) / 2


def norm_block(u: LevelElement, alpha: float) -> LevelElement:
    """[[alpha e_n, u], [u*, alpha e_n]] in M_2n(S)."""
    n = u.level
    unit = LevelElement.unit(u.system, n).coeffs * alpha
    top = np.concatenate([unit, u.coeffs], axis=1)
    bottom = np.concatenate([u.adjoint().coeffs, unit], axis=1)
    return LevelElement(u.system, np.concatenate([top, bottom], axis=0))


def norm_bounds(u: LevelElement, tol: float = DEFAULT_TOL, precision: float = 1e-7, max_steps: int = 80) -> NormBounds:
    """Bracket the canonical norm by bisection on the 2x2 block cone test."""
    if not np.any(u.coeffs):
        return NormBounds(0.0, 0.0)

    def inside(alpha: float) -> bool | None:
        v = cone_member(norm_block(u, alpha), tol)
        return None if v.undecided else v.member

    hi, steps = 1.0, 0
    while True:
        steps += 1
        got = inside(hi)
        if got:
            break
        if got is None or steps > 60:
            return NormBounds(0.0, float("inf"), steps)
        hi *= 2.0
    lo = 0.0
    while hi - lo > precision * max(1.0, hi) and steps < max_steps:
        steps += 1
        mid = (lo + hi) / 2
        got = inside(mid)
        if got is None:
            break
        if got:
            hi = mid
        else:
            lo = mid
    return NormBounds(lo, hi, steps)


def os_norm(u: LevelElement, tol: float = DEFAULT_TOL) -> float:
    """Canonical operator-space norm of u (not necessarily self-adjoint)."""
    if u.system.spatial:
        return matcore.op_norm(u.realize())
    bounds = norm_bounds(u, tol)
    if bounds.upper - bounds.lower > 1e-6 * max(1.0, bounds.upper):
        logger.info("norm of element of '%s' only bracketed: [%.6g, %.6g]", u.system.name, bounds.lower, bounds.upper)
    return bounds.upper


# -----------------------------------------------------------------------------
# Maps
# -----------------------------------------------------------------------------


def apply_map(phi: LinearMapSpec, u: LevelElement) -> LevelElement:
    """The amplification phi^(n)(u)."""
    if u.system is not phi.source and u.system.dim != phi.source.dim:
        raise InputError(f"element lives in '{u.system.name}', map '{phi.name}' starts at '{phi.source.name}'")
    return LevelElement(phi.target, u.coeffs @ phi.images)


def compose(psi: LinearMapSpec, phi: LinearMapSpec) -> LinearMapSpec:
    """psi o phi."""
    if phi.target.dim != psi.source.dim:
        raise InputError(f"cannot compose '{psi.name}' after '{phi.name}': dimension mismatch")
    return LinearMapSpec(phi.source, psi.target, phi.images @ psi.images, name=f"{psi.name}.{phi.name}")


def is_unital(phi: LinearMapSpec, tol: float = UNIT_TOL) -> bool:
    return bool(np.max(np.abs(phi.unit_image() - phi.target.unit)) <= tol)


def _spatial_target(phi: LinearMapSpec) -> None:
    if not (phi.target.realized and phi.target.spatial):
        raise UnsupportedQueryError(
            f"map '{phi.name}' has target '{phi.target.name}' ({phi.target.kind.value}); "
            "complete positivity is decided for targets realized in a matrix algebra"
        )


def concrete_form(phi: LinearMapSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(source basis in M_d, source unit coefficients, images in M_q) after pulling back through quotients."""
    _spatial_target(phi)
    src = phi.source
    if src.spatial and src.realized:
        return src.basis, src.unit, phi.image_matrices()
    if src.kind in (SystemKind.QUOTIENT, SystemKind.COPRODUCT):
        pulled = LinearMapSpec(src.parent(), phi.target, src.params["quotient_map"] @ phi.images, name=phi.name)
        return concrete_form(pulled)
    raise UnsupportedQueryError(f"complete positivity on '{src.name}' ({src.kind.value}) is not supported")


def _choi_operator(basis: np.ndarray, functional: np.ndarray) -> np.ndarray:
    """sum_k conj(b_k) (x) L_k, the adjoint of C -> (Tr_1[(b_k^T (x) I) C])_k."""
    return sum(matcore.kron(b.conj(), f) for b, f in zip(basis, functional))


def _choi_constraints(basis: np.ndarray, choi: np.ndarray, q: int) -> np.ndarray:
    d = basis.shape[1]
    c4 = choi.reshape(d, q, d, q)
    # Tr_1[(b^T (x) I) C]_{rs} = sum_{ab} b_{ab} C_{(a,r),(b,s)}
    return np.einsum("kab,arbs->krs", basis, c4)


def choi_check(basis: np.ndarray, unit: np.ndarray, images: np.ndarray, tol: float) -> ConeVerdict:
    """Is there a PSD Choi matrix of a map M_d -> M_q taking b_k to images[k]?

    Margin formulation: with W = C - t I PSD, minimize trace W. The trace of
    C is pinned by the unit, so the optimum gives the largest t with C - t I
    PSD among all extensions.
    """
    dim, d, _ = basis.shape
    q = images.shape[1]
    n = d * q
    for k, y in enumerate(images):
        gap = matcore.asymmetry(y)
        if gap > matcore.HERMITIAN_REJECT_TOL * max(1.0, matcore.op_norm(y)):
            return ConeVerdict(Answer.NOT_MEMBER, {"kind": "hermiticity", "index": k, "defect": gap}, tol)
    images = np.array([(y + y.conj().T) / 2 for y in images])
    tau0 = float(np.real(np.einsum("k,kaa->", unit, images)))
    traces = np.trace(basis, axis1=1, axis2=2)
    hb = matcore.herm_basis(q)
    builder = ComplexSdpBuilder()
    blk = builder.add_block(n)
    builder.objective(blk, np.eye(n))
    for k in range(dim):
        target = images[k] - tau0 / n * traces[k] * np.eye(q)
        for h in hb:
            g = matcore.kron(basis[k].conj(), h) - (traces[k] * np.trace(h)).real / n * np.eye(n)
            builder.constrain({blk: g}, float(np.real(np.trace(h @ target))))
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        return undecided(tol, "sdp", status=sol.status.value, message=sol.message)
    w = builder.decode(sol.primal)[0]
    margin = (tau0 - float(np.trace(w).real)) / n
    if margin >= -tol:
        return ConeVerdict(Answer.MEMBER, {"kind": "choi", "choi": w + margin * np.eye(n), "margin": margin}, tol)
    y = sol.dual.reshape(dim, q * q)
    lam = np.einsum("ka,axy->kxy", y, hb)
    c = float(np.real(np.sum(traces * np.trace(lam, axis1=1, axis2=2)))) / n
    functional = (1.0 + c) * np.conj(unit)[:, None, None] * np.eye(q) - lam
    scale = float(np.trace(_choi_operator(basis, functional)).real)
    if scale > 0:
        functional = functional / scale
    pairing = float(np.real(np.einsum("kxy,kyx->", images, functional)))
    return ConeVerdict(
        Answer.NOT_MEMBER,
        {"kind": "choi-separation", "functional": functional, "pairing": pairing, "margin": margin},
        tol,
    )


def cp_check(phi: LinearMapSpec, tol: float = DEFAULT_TOL) -> ConeVerdict:
    """Decide complete positivity of phi.

    Maps out of a realized system go through the Choi matrix of an extension
    to the ambient algebra; maps out of a quotient are pulled back to the
    parent; a map out of a dual system is an element of M_q of the parent and
    is tested there.
    """
    src = phi.source
    if src.kind is SystemKind.DUAL:
        _spatial_target(phi)
        images = phi.image_matrices()
        element = LevelElement(src.parent(), images.transpose(1, 2, 0))
        inner = cone_member(element, tol)
        return ConeVerdict(inner.answer, {"kind": "via-element", "element": element, "inner": inner}, tol)
    basis, unit, images = concrete_form(phi)
    return choi_check(basis, unit, images, tol)


@register_verifier("via-element")
def _verify_via_element(_: Any, verdict: ConeVerdict) -> bool:
    return verify(verdict.certificate["element"], verdict.certificate["inner"])


@register_verifier("hermiticity")
def _verify_hermiticity(phi: LinearMapSpec, verdict: ConeVerdict) -> bool:
    _, _, images = concrete_form(phi)
    return matcore.asymmetry(images[verdict.certificate["index"]]) > 10 * verdict.tol


@register_verifier("choi", "choi-separation")
def _verify_choi(phi: LinearMapSpec, verdict: ConeVerdict) -> bool:
    basis, _, images = concrete_form(phi)
    q = images.shape[1]
    tol = verdict.tol
    if verdict.kind == "choi":
        choi = verdict.certificate["choi"]
        scale = max(1.0, matcore.op_norm(choi))
        fit = float(np.max(np.abs(_choi_constraints(basis, choi, q) - images)))
        return fit <= 10 * tol * scale and matcore.min_eig(choi) >= -10 * tol * scale
    functional = verdict.certificate["functional"]
    op = _choi_operator(basis, functional)
    pairing = float(np.real(np.einsum("kxy,kyx->", images, functional)))
    return matcore.min_eig(op) >= -10 * tol * max(1.0, matcore.op_norm(op)) and pairing < -tol


# -----------------------------------------------------------------------------
# k-positivity
# -----------------------------------------------------------------------------


def span_complement(basis: np.ndarray) -> np.ndarray:
    """Hermitian matrices spanning the orthogonal complement of span(basis) in M_d."""
    d = basis.shape[1]
    coords = np.array([matcore.hvec(b) for b in basis]).real
    null = scipy.linalg.null_space(coords)
    return np.array([matcore.hunvec(v, d) for v in null.T]).reshape(-1, d, d)


def dual_basis(system: OperatorSystem) -> np.ndarray:
    """D_l with coefficient_l(X) = trace(D_l* X)."""
    ginv = np.linalg.inv(system.gram())
    return np.einsum("lm,mab->lab", ginv.conj(), system.basis)


def _level_k_state(phi: LinearMapSpec, k: int, v: np.ndarray, tol: float) -> tuple[float, LevelElement] | None:
    """Minimize v* phi^(k)(X) v over X in M_k(S)^+ with trace one."""
    src = phi.source
    d = src.ambient_dim
    q = phi.target.ambient_dim
    n = k * d
    dual = dual_basis(src)
    images = phi.image_matrices()
    vs = v.reshape(k, q)
    # s[l, i, j] = v_i* phi(b_l) v_j
    s = np.einsum("ix,lxy,jy->lij", vs.conj(), images, vs)
    kmat = np.einsum("lij,lab->iajb", s.conj(), dual).reshape(n, n)
    builder = ComplexSdpBuilder()
    blk = builder.add_block(n)
    builder.objective(blk, kmat)
    builder.constrain({blk: np.eye(n)}, 1.0)
    for nr in span_complement(src.basis):
        for i in range(k):
            builder.constrain({blk: matcore.kron(matcore.elementary(i, i, k), nr)}, 0.0)
            for j in range(i + 1, k):
                builder.constrain_complex({blk: matcore.kron(matcore.elementary(i, j, k), nr)}, 0.0)
    sol = solve(builder.compile(), inner_tol(tol))
    if sol.status is not SdpStatus.OPTIMAL:
        logger.debug("level-%d search step: %s", k, sol.message)
        return None
    x = matcore.hermitize(builder.decode(sol.primal)[0], "search iterate")
    return sol.objective, LevelElement.from_realized(src, project_span(src, x, k))


def project_span(system: OperatorSystem, x: np.ndarray, k: int) -> np.ndarray:
    d = system.ambient_dim
    out = np.zeros_like(x)
    gram_inv = np.linalg.inv(system.gram())
    for i in range(k):
        for j in range(k):
            blk = x[i * d : (i + 1) * d, j * d : (j + 1) * d]
            c = gram_inv @ np.einsum("kab,ab->k", system.basis.conj(), blk)
            out[i * d : (i + 1) * d, j * d : (j + 1) * d] = system.realize(c)
    return out


def kpos_search(
    phi: LinearMapSpec,
    k: int,
    budget: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    tol: float = DEFAULT_TOL,
) -> ConeVerdict:
    """Alternating search for X in M_k(S)^+ and a unit v with v* phi^(k)(X) v < 0."""
    if not (phi.source.spatial and phi.source.realized):
        return undecided(tol, "no level-k search for this source", source_kind=phi.source.kind.value)
    _spatial_target(phi)
    q = phi.target.ambient_dim
    best = np.inf
    for restart in range(budget):
        rng = np.random.default_rng([seed, restart])
        v = rng.standard_normal(k * q) + 1j * rng.standard_normal(k * q)
        v /= np.linalg.norm(v)
        last = np.inf
        for _ in range(SEARCH_ROUNDS):
            step = _level_k_state(phi, k, v, tol)
            if step is None:
                break
            _, x = step
            image = apply_map(phi, x).realize()
            value, v = matcore.min_eig_pair(image)
            best = min(best, value)
            if value < -tol:
                logger.debug("k-positivity violation %.3g found on restart %d", value, restart)
                return ConeVerdict(
                    Answer.NOT_MEMBER,
                    {"kind": "kpos-violation", "element": x, "vector": v, "value": value, "level": k},
                    tol,
                )
            if value >= last - 1e-9:
                break
            last = value
    return undecided(tol, "search budget exhausted", restarts=budget, best_value=best, level=k)


@register_verifier("kpos-violation")
def _verify_kpos(phi: LinearMapSpec, verdict: ConeVerdict) -> bool:
    cert = verdict.certificate
    x = cert["element"]
    v = cert["vector"]
    inside = cone_member(x, verdict.tol)
    value = float(np.real(v.conj() @ apply_map(phi, x).realize() @ v))
    return inside.member and value < -verdict.tol


@register_verifier("via-cp")
def _verify_via_cp(phi: LinearMapSpec, verdict: ConeVerdict) -> bool:
    return verify(phi, verdict.certificate["inner"])


def kpos_refute(
    phi: LinearMapSpec,
    k: int,
    budget: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    tol: float = DEFAULT_TOL,
) -> ConeVerdict:
    """Try to show phi is not k-positive.

    MEMBER is only returned when phi is certified completely positive.
    """
    if k < 1:
        raise InputError(f"level k must be at least 1, got {k}")
    if phi.source.kind is SystemKind.DUAL and phi.target.kind is SystemKind.DUAL:
        from opsystk.systems.dualize import dual_kpos_refute

        return dual_kpos_refute(phi, k, budget=budget, seed=seed, tol=tol)
    cp = cp_check(phi, tol)
    if cp.member:
        return ConeVerdict(Answer.MEMBER, {"kind": "via-cp", "inner": cp}, tol)
    if cp.refuted and cp.kind == "hermiticity":
        return cp
    return kpos_search(phi, k, budget=budget, seed=seed, tol=tol)


# -----------------------------------------------------------------------------
# Unitalization
# -----------------------------------------------------------------------------


def unitalizing_factor(phi: LinearMapSpec) -> np.ndarray:
    """R = phi(e)^{1/2}."""
    _spatial_target(phi)
    return matcore.psd_sqrt(phi.target.realize(phi.unit_image()))


def unitalize(phi: LinearMapSpec) -> LinearMapSpec:
    """psi = R^{-1} phi(.) R^{-1} with R = phi(e)^{1/2}, so that phi = R psi(.) R."""
    _spatial_target(phi)
    unit_img = phi.target.realize(phi.unit_image())
    if matcore.min_eig(unit_img) <= 1e-8:
        raise InputError(
            f"map '{phi.name}' sends the unit to a singular matrix",
            suggestion="Unitalization needs phi(e) positive definite",
        )
    rinv = matcore.psd_inv_sqrt(unit_img)
    mats = np.einsum("ab,kbc,cd->kad", rinv, phi.image_matrices(), rinv)
    target = phi.target
    try:
        images = np.array([target.coefficients(m) for m in mats])
    except InputError:
        target = matrix_algebra(target.ambient_dim)
        logger.info("unitalized map leaves the span of '%s'; using %s as target", phi.target.name, target.name)
        images = np.array([target.coefficients(m) for m in mats])
    return LinearMapSpec(phi.source, target, images, name=f"unital({phi.name})")

"""Property suites: seeded randomized checks of the structural theorems.

A suite draws every check from ``default_rng([seed, index])``, fans the
checks out over a thread pool and reports pass / fail / undecided per check.
A check fails only on a certificate-verified contradiction or on a
certificate that does not re-verify.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from opsystk.atlas.canonical import diag, full, m_mod_j, s2d, tridiagonal
from opsystk.errors import InputError, SolverError
from opsystk.formatters.json_fmt import dumps, to_jsonable
from opsystk.linalg import matcore
from opsystk.systems.dualize import dual_system, evaluate
from opsystk.systems.matricial import gamma_generators, gamma_map, omax_member, omax_system, omin_member, omin_system
from opsystk.systems.opsys import (
    Answer,
    ConeVerdict,
    LevelElement,
    LinearMapSpec,
    OperatorSystem,
    apply_map,
    cone_member,
    cp_check,
    is_unital,
    verify,
)
from opsystk.systems.quotient import coproduct, coproduct_embeddings, coproduct_universal_map, project
from opsystk.systems.tensor import max_cone_member, min_cone_member, tensor_max, tensor_min

logger = logging.getLogger(__name__)

THREADS_ENV = "OSTK_THREADS"
SEED_ENV = "OSTK_SEED"
PAIRING_TOL = 1e-7


def _env_int(name: str, default: int, least: int) -> int:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise InputError(f"{name} must be an integer, got '{raw}'") from e
    if value < least:
        raise InputError(f"{name} must be at least {least}, got {value}")
    return value


def get_threads() -> int:
    """Worker count for suites, from OSTK_THREADS."""
    return _env_int(THREADS_ENV, min(4, os.cpu_count() or 1), 1)


def get_seed() -> int:
    """Default suite seed, from OSTK_SEED."""
    return _env_int(SEED_ENV, 0, 0)


# -----------------------------------------------------------------------------
# Records and reports
# -----------------------------------------------------------------------------


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNDECIDED = "undecided"


@dataclass
class CheckOutcome:
    status: CheckStatus
    verdicts: dict[str, str] = field(default_factory=dict)
    certificates: dict[str, Any] = field(default_factory=dict)
    detail: str = ""


@dataclass(frozen=True)
class CheckRecord:
    check_id: str
    status: CheckStatus
    verdicts: dict[str, str]
    digest: str
    elapsed: float
    detail: str = ""

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.check_id,
            "status": self.status.value,
            "verdicts": dict(self.verdicts),
            "certificate_digest": self.digest,
        }
        if self.detail:
            out["detail"] = self.detail
        if timings:
            out["elapsed"] = round(self.elapsed, 6)
        return out


@dataclass
class SuiteReport:
    suite: str
    seed: int
    budget: int
    min_pass: float
    checks: list[CheckRecord]

    def count(self, status: CheckStatus) -> int:
        return sum(1 for c in self.checks if c.status is status)

    @property
    def counts(self) -> dict[str, int]:
        return {s.value: self.count(s) for s in CheckStatus}

    @property
    def status(self) -> CheckStatus:
        if self.count(CheckStatus.FAIL):
            return CheckStatus.FAIL
        if self.count(CheckStatus.PASS) >= self.min_pass * len(self.checks):
            return CheckStatus.PASS
        return CheckStatus.UNDECIDED

    @property
    def elapsed(self) -> float:
        return sum(c.elapsed for c in self.checks)

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "suite": self.suite,
            "seed": self.seed,
            "budget": self.budget,
            "min_pass": self.min_pass,
            "status": self.status.value,
            "counts": self.counts,
            "checks": [c.to_dict(timings) for c in self.checks],
        }
        if timings:
            out["elapsed"] = round(self.elapsed, 6)
        return out


# -----------------------------------------------------------------------------
# Registry and runner
# -----------------------------------------------------------------------------

CheckFn = Callable[[int, np.random.Generator, int], CheckOutcome]


@dataclass(frozen=True)
class Suite:
    name: str
    description: str
    check: CheckFn
    default_budget: int
    min_pass: float = 1.0


_SUITES: dict[str, Suite] = {}


def suite(name: str, description: str, default_budget: int, min_pass: float = 1.0) -> Callable[[CheckFn], CheckFn]:
    def decorator(fn: CheckFn) -> CheckFn:
        _SUITES[name] = Suite(name, description, fn, default_budget, min_pass)
        return fn

    return decorator


def suite_names() -> list[str]:
    return list(_SUITES)


def get_suite(name: str) -> Suite:
    try:
        return _SUITES[name]
    except KeyError:
        raise InputError(f"unknown suite '{name}'", suggestion=f"Known suites: {', '.join(_SUITES)}") from None


def _digest(certificates: dict[str, Any]) -> str:
    return hashlib.sha256(dumps(to_jsonable(certificates)).encode()).hexdigest()


def _run_check(spec: Suite, index: int, seed: int) -> CheckRecord:
    rng = np.random.default_rng([seed, index])
    search_seed = int(rng.integers(2**31))
    started = time.perf_counter()
    try:
        outcome = spec.check(index, rng, search_seed)
    except SolverError as e:
        outcome = CheckOutcome(CheckStatus.UNDECIDED, detail=f"solver: {e.message}")
    except Exception as e:  # noqa: BLE001
        logger.debug("check %s/%d raised", spec.name, index, exc_info=True)
        outcome = CheckOutcome(CheckStatus.FAIL, detail=f"{type(e).__name__}: {e}")
    elapsed = time.perf_counter() - started
    return CheckRecord(
        check_id=f"{spec.name}/{index:04d}",
        status=outcome.status,
        verdicts=outcome.verdicts,
        digest=_digest(outcome.certificates),
        elapsed=elapsed,
        detail=outcome.detail,
    )


def run_suite(name: str, seed: int | None = None, budget: int | None = None, threads: int | None = None) -> SuiteReport:
    """Run a property suite; records come back ordered by check id."""
    spec = get_suite(name)
    seed = get_seed() if seed is None else seed
    budget = spec.default_budget if budget is None else budget
    if budget < 1:
        raise InputError(f"budget must be at least 1, got {budget}")
    workers = threads or get_threads()
    logger.info("suite %s: %d checks, seed %d, %d threads", name, budget, seed, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(lambda i: _run_check(spec, i, seed), range(budget)))
    records.sort(key=lambda r: r.check_id)
    report = SuiteReport(name, seed, budget, spec.min_pass, records)
    logger.info("suite %s: %s %s", name, report.status.value, report.counts)
    return report


# -----------------------------------------------------------------------------
# Check helpers
# -----------------------------------------------------------------------------


def _random_element(system: OperatorSystem, n: int, rng: np.random.Generator, min_eig: float) -> LevelElement:
    """Random self-adjoint element of M_n(S), shifted along the unit to the given least eigenvalue."""
    c = rng.standard_normal((n, n, system.dim)) + 1j * rng.standard_normal((n, n, system.dim))
    u = LevelElement(system, (c + c.conj().transpose(1, 0, 2)) / 2)
    w = matcore.min_eig(u.realize())
    return u + (min_eig - w) * LevelElement.unit(system, n)


def _margin(rng: np.random.Generator, member: bool) -> float:
    m = float(rng.uniform(0.02, 0.5))
    return m if member else -m


def _outcome(status: CheckStatus, pairs: dict[str, tuple[Any, ConeVerdict]], detail: str = "") -> CheckOutcome:
    return CheckOutcome(
        status,
        {key: v.answer.value for key, (_, v) in pairs.items()},
        {key: v for key, (_, v) in pairs.items()},
        detail,
    )


def _screen(pairs: dict[str, tuple[Any, ConeVerdict]]) -> CheckOutcome | None:
    """FAIL on a certificate that does not re-verify, UNDECIDED when any verdict is; None to go on."""
    for key, (subject, verdict) in pairs.items():
        if not verify(subject, verdict):
            return _outcome(CheckStatus.FAIL, pairs, f"{key}: certificate does not re-verify")
    open_keys = [key for key, (_, v) in pairs.items() if v.undecided]
    if open_keys:
        return _outcome(CheckStatus.UNDECIDED, pairs, f"undecided: {', '.join(open_keys)}")
    return None


def _agreement(pairs: dict[str, tuple[Any, ConeVerdict]]) -> CheckOutcome:
    screened = _screen(pairs)
    if screened is not None:
        return screened
    answers = {v.answer for _, v in pairs.values()}
    if len(answers) == 1:
        return _outcome(CheckStatus.PASS, pairs)
    return _outcome(CheckStatus.FAIL, pairs, "verified verdicts disagree")


# -----------------------------------------------------------------------------
# Suites
# -----------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _minmax_systems() -> tuple[OperatorSystem, OperatorSystem]:
    s = full(2)
    sd = dual_system(s)
    return tensor_min(s, s), tensor_max(sd, sd)


@suite("duality-minmax", "(M2 (x)min M2)^d against M2^d (x)max M2^d", default_budget=40)
def _duality_minmax(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    mn, mx = _minmax_systems()
    if index % 2 == 0:
        u = _random_element(mn, 1, rng, float(rng.uniform(0.0, 0.5)))
        rho = matcore.random_psd(rng, 4, int(rng.integers(1, 5)))
        functional = np.einsum("ab,kba->k", rho, mn.basis)
    else:
        u = _random_element(mn, 1, rng, _margin(rng, member=False))
        functional = None
    vu = cone_member(u)
    if vu.refuted:
        v = vu.certificate["vector"]
        functional = np.einsum("a,kab,b->k", v.conj(), mn.basis, v) / np.real(v.conj() @ v)
    if functional is None:
        return _outcome(CheckStatus.FAIL, {"min": (u, vu)}, "shifted non-member accepted by the min cone")
    f = LevelElement(mx, functional.real.astype(complex))
    vf = cone_member(f)
    pairs = {"min": (u, vu), "max_dual": (f, vf)}
    screened = _screen(pairs)
    if screened is not None:
        return screened
    pairing = evaluate(f.coeffs[0, 0], u.coeffs[0, 0]).real
    if vf.refuted:
        return _outcome(CheckStatus.FAIL, pairs, "state of the min tensor refuted in the max tensor of duals")
    if vu.member and pairing < -PAIRING_TOL:
        return _outcome(CheckStatus.FAIL, pairs, f"negative pairing {pairing:.3g} on a min-positive element")
    if vu.refuted and pairing >= 0:
        return _outcome(CheckStatus.FAIL, pairs, "separating functional does not separate")
    return _outcome(CheckStatus.PASS, pairs)


@functools.lru_cache(maxsize=None)
def _cp_systems(which: int) -> tuple[OperatorSystem, OperatorSystem, OperatorSystem, OperatorSystem]:
    s, t = (diag(2), tridiagonal(3)) if which == 0 else (full(2), full(3))
    return s, t, tensor_min(s, t), dual_system(s)


@suite("min-cp-correspondence", "u in (S (x)min T)^+ iff S^d -> T, delta_l -> u_l is cp", default_budget=200)
def _min_cp_correspondence(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    s, t, mn, sd = _cp_systems(index % 2)
    u = _random_element(mn, 1, rng, _margin(rng, member=(index // 2) % 2 == 0))
    phi = LinearMapSpec(sd, t, u.coeffs[0, 0].real.reshape(s.dim, t.dim).astype(complex), name="phi_u")
    return _agreement({"min": (u, cone_member(u)), "cp": (phi, cp_check(phi))})


@suite("proximinality", "PSD + J(3) lies in (M(3)/J(3))^+ and -P + J(3) does not", default_budget=70)
def _proximinality(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    q = m_mod_j(3)
    parent = q.parent()
    member = index % 7 < 5
    p = matcore.random_psd(rng, 3, int(rng.integers(1, 4))) * float(rng.uniform(0.5, 3.0))
    d = rng.standard_normal(3)
    x = LevelElement.from_realized(parent, (p if member else -p) + np.diag(d - d.mean()))
    u = project(q, x)
    pairs = {"quotient": (u, cone_member(u))}
    screened = _screen(pairs)
    if screened is not None:
        return screened
    verdict = pairs["quotient"][1]
    expected = Answer.MEMBER if member else Answer.NOT_MEMBER
    if verdict.answer is expected:
        return _outcome(CheckStatus.PASS, pairs)
    return _outcome(CheckStatus.FAIL, pairs, f"expected {expected.value}")


@functools.lru_cache(maxsize=None)
def _gamma() -> LinearMapSpec:
    return gamma_map(2)


def _gamma_pattern() -> CheckOutcome:
    gamma = _gamma()
    target = gamma.target
    images = np.array([target.realize(row) for row in gamma_generators(2) @ gamma.images])
    expected = [np.eye(4)]
    for i in range(2):
        e = matcore.elementary(2 * i, 2 * i + 1, 4)
        expected += [e, e.T]
    gap = max(float(np.max(np.abs(a - b))) for a, b in zip(images, expected))
    status = CheckStatus.PASS if gap <= 1e-9 else CheckStatus.FAIL
    return CheckOutcome(status, {"pattern": f"{gap:.3g}"}, {}, "" if status is CheckStatus.PASS else "generator images off pattern")


@suite("gamma-embedding", "gamma: S_2^d -> S2d is a unital complete order isomorphism", default_budget=100)
def _gamma_embedding(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    gamma = _gamma()
    if index == 0:
        return _gamma_pattern()
    if index == 1:
        pairs = {"cp": (gamma, cp_check(gamma))}
        screened = _screen(pairs)
        if screened is not None:
            return screened
        if pairs["cp"][1].member and is_unital(gamma, 1e-8):
            return _outcome(CheckStatus.PASS, pairs)
        return _outcome(CheckStatus.FAIL, pairs, "gamma is not unital and completely positive")
    n = 1 + index % 2
    y = _random_element(gamma.target, n, rng, _margin(rng, member=(index // 2) % 2 == 0))
    x = LevelElement(gamma.source, y.coeffs @ np.linalg.inv(gamma.images))
    return _agreement({"dual": (x, cone_member(x)), "image": (y, cone_member(y))})


@functools.lru_cache(maxsize=None)
def _coproduct_systems() -> tuple[OperatorSystem, OperatorSystem, LinearMapSpec, LinearMapSpec]:
    s = diag(2)
    c = coproduct(s, s)
    i, j = coproduct_embeddings(c)
    return s, c, i, j


def _random_ucp(source: OperatorSystem, target: OperatorSystem, rng: np.random.Generator) -> LinearMapSpec:
    """diag(2) -> M_3 with I -> I and the second basis element to some 0 <= A <= I."""
    a = matcore.random_psd(rng, target.ambient_dim)
    a = a / matcore.op_norm(a) * float(rng.uniform(0.1, 1.0))
    images = np.array([target.coefficients(np.eye(target.ambient_dim)), target.coefficients(a)])
    return LinearMapSpec(source, target, images, name="phi")


@suite("coproduct-universal", "diag(2) *_1 diag(2): dimension, embeddings and the universal map", default_budget=42)
def _coproduct_universal(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    s, c, i, j = _coproduct_systems()
    if index == 0:
        status = CheckStatus.PASS if c.dim == 3 else CheckStatus.FAIL
        return CheckOutcome(status, {"dim": str(c.dim)})
    if index % 2:
        n = 1 + (index // 2) % 3
        emb = i if (index // 6) % 2 == 0 else j
        x = _random_element(s, n, rng, _margin(rng, member=bool(rng.integers(2))))
        y = apply_map(emb, x)
        return _agreement({"summand": (x, cone_member(x)), "coproduct": (y, cone_member(y))})
    target = full(3)
    phi, psi = _random_ucp(s, target, rng), _random_ucp(s, target, rng)
    universal = coproduct_universal_map(c, phi, psi)
    pairs = {"cp": (universal, cp_check(universal))}
    screened = _screen(pairs)
    if screened is not None:
        return screened
    if pairs["cp"][1].member and is_unital(universal, 1e-8):
        return _outcome(CheckStatus.PASS, pairs)
    return _outcome(CheckStatus.FAIL, pairs, "universal map of ucp maps is not ucp")


@functools.lru_cache(maxsize=None)
def _k_systems() -> tuple[OperatorSystem, OperatorSystem, OperatorSystem, OperatorSystem]:
    s = full(2)
    return s, omin_system(s, 1), omin_system(s, 2), omax_system(s, 1)


def _omax_element(s: OperatorSystem, omax: OperatorSystem, rng: np.random.Generator, terms: int = 3) -> LevelElement:
    """sum_r a_r* d_r a_r with d_r in the level-1 cone and scalar 1 x 2 matrices a_r."""
    total = None
    for _ in range(terms):
        d = LevelElement(omax, s.coefficients(matcore.random_psd(rng, 2)))
        a = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
        term = d.compress(a)
        total = term if total is None else total + term
    return total


@suite("omin-omax-duality", "OMIN_1 and OMAX_1 of M2 against the flip operator", default_budget=24)
def _omin_omax_duality(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    s, omin1, omin2, omax1 = _k_systems()
    kind = index % 4
    if kind == 0:
        u = LevelElement.from_realized(omin1, matcore.swap(2))
        v = omin_member(u, budget=4, seed=seed)
        pairs = {"omin_1": (u, v)}
        if not verify(u, v):
            return _outcome(CheckStatus.FAIL, pairs, "certificate does not re-verify")
        if v.refuted:
            return _outcome(CheckStatus.FAIL, pairs, "flip refuted in OMIN_1")
        return _outcome(CheckStatus.PASS, pairs)
    if kind == 1:
        u = LevelElement.from_realized(omin2, matcore.swap(2))
        pairs = {"omin_2": (u, omin_member(u, seed=seed))}
        screened = _screen(pairs)
        if screened is not None:
            return screened
        if pairs["omin_2"][1].refuted:
            return _outcome(CheckStatus.PASS, pairs)
        return _outcome(CheckStatus.FAIL, pairs, "flip accepted in OMIN_2")
    if kind == 2:
        # phi_F(s) = sum_r a_r* rho_r(s) a_r is cp, so phi_F^(2)(flip) >= 0
        flip = LevelElement.from_realized(s, matcore.swap(2))
        f = np.zeros((2, 2, s.dim), dtype=complex)
        for _ in range(3):
            rho = matcore.random_psd(rng, 2)
            a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            f += np.einsum("i,j,l->ijl", a.conj(), a, np.einsum("ab,lba->l", rho, s.basis))
        value = matcore.min_eig(np.einsum("ijl,xyl->ixjy", flip.coeffs, f).reshape(4, 4))
        status = CheckStatus.PASS if value >= -PAIRING_TOL else CheckStatus.FAIL
        return CheckOutcome(status, {"pairing_min_eig": f"{value:.6g}"}, {}, "" if status is CheckStatus.PASS else "negative pairing")
    u = _omax_element(s, omax1, rng)
    v = omax_member(u, seed=seed)
    pairs = {"omax_1": (u, v)}
    if not verify(u, v):
        return _outcome(CheckStatus.FAIL, pairs, "certificate does not re-verify")
    if v.refuted:
        return _outcome(CheckStatus.FAIL, pairs, "decomposable element refuted in OMAX_1")
    return _outcome(CheckStatus.PASS if v.member else CheckStatus.UNDECIDED, pairs)


@functools.lru_cache(maxsize=None)
def _nuclear_systems() -> tuple[OperatorSystem, OperatorSystem]:
    s = full(2)
    return tensor_max(s, s), tensor_max(s, s, force_hierarchy=True)


@suite("nuclearity-matrix-algebras", "M2 (x)max M2 = M2 (x)min M2 through the exact path and the hierarchy", default_budget=100, min_pass=0.9)
def _nuclearity(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    exact, forced = _nuclear_systems()
    p = matcore.random_psd(rng, 4) + float(rng.uniform(0.01, 0.2)) * np.eye(4)
    u = LevelElement.from_realized(exact, p)
    w = LevelElement(forced, u.coeffs)
    pairs = {"exact": (u, cone_member(u)), "hierarchy": (w, max_cone_member(w, seed=seed))}
    screened = _screen(pairs)
    if screened is not None:
        return screened
    if pairs["exact"][1].member and pairs["hierarchy"][1].member:
        return _outcome(CheckStatus.PASS, pairs)
    return _outcome(CheckStatus.FAIL, pairs, "PSD element refuted in M2 (x)max M2")


@functools.lru_cache(maxsize=None)
def _gap_systems() -> tuple[OperatorSystem, OperatorSystem]:
    sd = dual_system(s2d())
    return tensor_min(sd, sd), tensor_max(sd, sd)


@suite("kc-gap-search", "search for elements separating min and max on S2d^d (x) S2d^d", default_budget=12, min_pass=0.0)
def _kc_gap_search(index: int, rng: np.random.Generator, seed: int) -> CheckOutcome:
    mn, mx = _gap_systems()
    t = (0.25, 0.5, 1.0)[index % 3]
    h = rng.standard_normal(mx.dim)
    h *= np.linalg.norm(mx.unit) / np.linalg.norm(h)
    c = (mx.unit + t * h).astype(complex)
    u_min, u_max = LevelElement(mn, c), LevelElement(mx, c)
    pairs = {"max": (u_max, cone_member(u_max)), "min": (u_min, min_cone_member(u_min, budget=4))}
    screened = _screen(pairs)
    if screened is not None:
        return screened
    vmax, vmin = pairs["max"][1], pairs["min"][1]
    if vmax.member and vmin.refuted:
        return _outcome(CheckStatus.FAIL, pairs, "max-positive element refuted in min")
    if vmin.member and vmax.refuted:
        return _outcome(CheckStatus.PASS, pairs, "certified separation of min and max")
    return _outcome(CheckStatus.PASS, pairs)


SUITE_NAMES = tuple(_SUITES)

"""Dense small-scale semidefinite programming.

Problems are in the standard primal form

    minimize   sum_b <C_b, X_b>
    subject to sum_b <A_ib, X_b> = b_i,   X_b PSD

over real symmetric blocks. The solver is a homogeneous self-dual
interior-point method with HKM-scaled Newton directions and a predictor /
corrector choice of the centering parameter. Infeasible problems are
recognised through the homogeneous embedding, without a Slater assumption.
A presolve step removes dependent constraints and restricts blocks to the
face cut out by constraints of the form <A, X> = 0 with A semidefinite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from opsystk.errors import InputError
from opsystk.linalg import matcore

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    STALLED = "stalled"


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the interior-point engine."""

    max_iter: int = 200
    max_dim: int = 512
    step: float = 0.98
    rank_tol: float = 1e-10
    projection_iters: int = 5000


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Dense SDP in standard primal form.

    ``coefficients[b]`` has shape (m, n_b, n_b): slice i is the coefficient
    matrix of constraint i on block b.
    """

    blocks: tuple[int, ...]
    objective: tuple[np.ndarray, ...]
    coefficients: tuple[np.ndarray, ...]
    rhs: np.ndarray

    def __post_init__(self) -> None:
        m = len(self.rhs)
        if not (len(self.blocks) == len(self.objective) == len(self.coefficients)):
            raise InputError("SDP: one objective and one coefficient stack per block required")
        for k, (n, c, a) in enumerate(zip(self.blocks, self.objective, self.coefficients)):
            if c.shape != (n, n):
                raise InputError(f"SDP: objective of block {k} has shape {c.shape}, expected {(n, n)}")
            if a.shape != (m, n, n):
                raise InputError(f"SDP: coefficients of block {k} have shape {a.shape}, expected {(m, n, n)}")

    @classmethod
    def build(
        cls,
        blocks: Sequence[int],
        objective: Sequence[np.ndarray] | None,
        constraints: Iterable[tuple[Sequence[np.ndarray], float]],
    ) -> "SdpProblem":
        """Assemble from a list of (per-block matrices, rhs) pairs."""
        blocks = tuple(int(n) for n in blocks)
        rows = list(constraints)
        if objective is None:
            objective = [np.zeros((n, n)) for n in blocks]
        coeffs = []
        for k, n in enumerate(blocks):
            stack = np.zeros((len(rows), n, n))
            for i, (mats, _) in enumerate(rows):
                a = np.asarray(mats[k], dtype=float)
                stack[i] = (a + a.T) / 2
            coeffs.append(stack)
        obj = tuple(_sym(np.asarray(c, dtype=float)) for c in objective)
        rhs = np.array([float(r) for _, r in rows])
        return cls(blocks, obj, tuple(coeffs), rhs)

    @property
    def num_constraints(self) -> int:
        return len(self.rhs)

    @property
    def total_dim(self) -> int:
        return sum(self.blocks)

    @property
    def constraints(self) -> list[tuple[tuple[np.ndarray, ...], float]]:
        return [
            (tuple(a[i] for a in self.coefficients), float(self.rhs[i]))
            for i in range(self.num_constraints)
        ]

    def apply(self, x: Sequence[np.ndarray]) -> np.ndarray:
        """Constraint values <A_i, X>."""
        out = np.zeros(self.num_constraints)
        for a, xb in zip(self.coefficients, x):
            out += a.reshape(len(out), -1) @ np.asarray(xb).ravel()
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        """sum_i y_i A_i per block."""
        return [np.tensordot(y, a, axes=1) for a in self.coefficients]

    def value(self, x: Sequence[np.ndarray]) -> float:
        return float(sum(np.sum(c * xb) for c, xb in zip(self.objective, x)))


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float

    def worst(self) -> float:
        return max(self.primal, self.dual, self.gap)


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """Result of ``solve``.

    For INFEASIBLE results ``certificate`` holds y with b.y = 1 and
    sum_i y_i A_i (approximately) negative semidefinite.
    """

    status: SdpStatus
    primal: tuple[np.ndarray, ...]
    dual: np.ndarray
    objective: float
    dual_objective: float
    residuals: Residuals
    iterations: int = 0
    certificate: np.ndarray | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    status: SdpStatus
    witness: tuple[np.ndarray, ...] | None = None
    certificate: np.ndarray | None = None
    residual: float = float("inf")


class _Stall(Exception):
    pass


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


# -----------------------------------------------------------------------------
# Independent re-verification
# -----------------------------------------------------------------------------


def witness_residual(problem: SdpProblem, x: Sequence[np.ndarray]) -> tuple[float, float]:
    """(max constraint violation, min eigenvalue) of a candidate witness."""
    viol = problem.apply(x) - problem.rhs
    worst = float(np.max(np.abs(viol))) if len(viol) else 0.0
    eig = min((matcore.min_eig(xb) for xb in x if xb.size), default=float("inf"))
    return worst, eig


def farkas_residual(problem: SdpProblem, y: np.ndarray) -> tuple[float, float]:
    """(b.y, largest eigenvalue of sum_i y_i A_i) of a candidate certificate."""
    top = max(
        (matcore.max_eig(a) for a in problem.adjoint(y) if a.size),
        default=-float("inf"),
    )
    return float(problem.rhs @ y), top


# -----------------------------------------------------------------------------
# Presolve
# -----------------------------------------------------------------------------


@dataclass
class _Reduced:
    blocks: list[int]
    objective: list[np.ndarray]
    coefficients: list[np.ndarray]
    rhs: np.ndarray
    # Columns spanning the face each original block was restricted to
    faces: list[np.ndarray]
    facial_rows: list[int] = field(default_factory=list)


def _facial_reduction(problem: SdpProblem, opts: SolverOptions) -> _Reduced:
    faces = [np.eye(n) for n in problem.blocks]
    coeffs = [a.copy() for a in problem.coefficients]
    objective = [c.copy() for c in problem.objective]
    scale = 1.0 + float(np.max(np.abs(problem.rhs))) if len(problem.rhs) else 1.0
    facial: list[int] = []
    changed = True
    while changed:
        changed = False
        for i in range(problem.num_constraints):
            if i in facial or abs(problem.rhs[i]) > opts.rank_tol * scale:
                continue
            support = [k for k, a in enumerate(coeffs) if a.shape[1] and np.any(np.abs(a[i]) > opts.rank_tol)]
            if len(support) != 1:
                continue
            k = support[0]
            w, v = scipy.linalg.eigh(coeffs[k][i])
            top = float(np.max(np.abs(w)))
            if w[0] < -opts.rank_tol * top and w[-1] > opts.rank_tol * top:
                continue
            keep = v[:, np.abs(w) <= opts.rank_tol * top * 1e2]
            logger.debug("facial reduction on block %d via constraint %d: %d -> %d", k, i, len(w), keep.shape[1])
            coeffs[k] = np.einsum("ab,ibc,cd->iad", keep.T, coeffs[k], keep)
            objective[k] = keep.T @ objective[k] @ keep
            faces[k] = faces[k] @ keep
            facial.append(i)
            changed = True
    return _Reduced(
        blocks=[f.shape[1] for f in faces],
        objective=objective,
        coefficients=coeffs,
        rhs=problem.rhs.copy(),
        faces=faces,
        facial_rows=facial,
    )


def _lift_certificate(problem: SdpProblem, y: np.ndarray, facial: list[int], tol: float) -> np.ndarray:
    """Push a reduced-space Farkas vector back through the facial constraints."""
    y = y.copy()
    if not facial:
        return y
    lam = 1.0
    for _ in range(80):
        trial = y.copy()
        for i in facial:
            sign = 1.0 if matcore.max_eig(sum(a[i] for a in problem.coefficients if a.size)) > 0 else -1.0
            trial[i] = -sign * lam
        _, top = farkas_residual(problem, trial)
        if top <= tol:
            return trial
        lam *= 2.0
    return trial


# -----------------------------------------------------------------------------
# Interior-point core
# -----------------------------------------------------------------------------


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    if x.shape[0] == 0:
        return np.inf
    try:
        low = scipy.linalg.cholesky(x, lower=True)
    except np.linalg.LinAlgError as e:
        raise _Stall("iterate lost definiteness") from e
    z = scipy.linalg.solve_triangular(low, dx, lower=True)
    z = scipy.linalg.solve_triangular(low, z.T, lower=True).T
    lam = float(scipy.linalg.eigvalsh(_sym(z))[0])
    return -1.0 / lam if lam < 0 else np.inf


def _ratio(v: float, dv: float) -> float:
    return -v / dv if dv < 0 else np.inf


def _hsd(
    C: list[np.ndarray],
    A: list[np.ndarray],
    b: np.ndarray,
    tol: float,
    opts: SolverOptions,
):
    m = len(b)
    sizes = [c.shape[0] for c in C]
    N = sum(sizes)
    X = [np.eye(n) for n in sizes]
    S = [np.eye(n) for n in sizes]
    y = np.zeros(m)
    tau = kappa = 1.0
    normb = 1.0 + float(np.linalg.norm(b))
    normC = 1.0 + float(np.sqrt(sum(np.sum(c * c) for c in C)))
    flat = [a.reshape(m, -1) for a in A]

    def op(Z):
        out = np.zeros(m)
        for f, z in zip(flat, Z):
            out += f @ z.ravel()
        return out

    def tr_op(Z):
        # tr(A_i Z) for possibly non-symmetric Z
        out = np.zeros(m)
        for f, z in zip(flat, Z):
            out += f @ z.T.ravel()
        return out

    def adj(v):
        return [np.tensordot(v, a, axes=1) for a in A]

    best = None
    best_err = np.inf
    stalls = 0
    status = SdpStatus.STALLED
    cert = None
    it = 0
    message = "iteration limit reached"
    try:
        for it in range(1, opts.max_iter + 1):
            aty = adj(y)
            rp = op(X) - b * tau
            rd = [c * tau - t - s for c, t, s in zip(C, aty, S)]
            cx = float(sum(np.sum(c * x) for c, x in zip(C, X)))
            by = float(b @ y)
            rg = by - cx - kappa
            mu = (sum(float(np.sum(x * s)) for x, s in zip(X, S)) + tau * kappa) / (N + 1)

            pres = np.linalg.norm(rp) / tau / normb
            dres = np.sqrt(sum(np.sum(r * r) for r in rd)) / tau / normC
            gap = abs(cx - by) / tau / (1.0 + abs(cx) / tau + abs(by) / tau)
            err = max(pres, dres, gap)
            logger.debug(
                "it %3d  pres %.2e  dres %.2e  gap %.2e  mu %.2e  tau %.2e  kappa %.2e",
                it, pres, dres, gap, mu, tau, kappa,
            )
            if err < best_err:
                best_err = err
                best = ([x / tau for x in X], y / tau)
            if err <= tol:
                status = SdpStatus.OPTIMAL
                message = "converged"
                break
            if by > 0:
                top = max((float(scipy.linalg.eigvalsh(t)[-1]) for t in aty if t.size), default=-np.inf)
                if top / by <= tol:
                    status = SdpStatus.INFEASIBLE
                    cert = y / by
                    message = "primal infeasibility certificate found"
                    break
            if cx < 0:
                ray = [x / -cx for x in X]
                if np.linalg.norm(op(ray)) <= tol * normb:
                    status = SdpStatus.UNBOUNDED
                    message = "primal improving ray found"
                    break

            Sinv = []
            for s in S:
                try:
                    Sinv.append(scipy.linalg.cho_solve(scipy.linalg.cho_factor(s), np.eye(s.shape[0])))
                except np.linalg.LinAlgError as e:
                    raise _Stall("dual slack lost definiteness") from e
            M = np.zeros((m, m))
            for f, a, x, si in zip(flat, A, X, Sinv):
                T = np.matmul(np.matmul(x, a), si)
                M += f @ T.transpose(0, 2, 1).reshape(m, -1).T
            XCS = [x @ c @ si for x, c, si in zip(X, C, Sinv)]
            g = tr_op(XCS)
            c2 = float(sum(np.sum(c * z.T) for c, z in zip(C, XCS)))

            def direction(sigma: float, eta: float):
                Rc = [sigma * mu * si - x for si, x in zip(Sinv, X)]
                Xrd = [x @ r @ si for x, r, si in zip(X, rd, Sinv)]
                h = -eta * rp - tr_op(Rc) + eta * tr_op(Xrd)
                e = float(sum(np.sum(c * z.T) for c, z in zip(C, Xrd)))
                h2 = (
                    -eta * rg
                    + float(sum(np.sum(c * r) for c, r in zip(C, Rc)))
                    - eta * e
                    + (sigma * mu - tau * kappa) / tau
                )
                K = np.zeros((m + 1, m + 1))
                K[:m, :m] = M
                K[:m, m] = -(g + b)
                K[m, :m] = b - g
                K[m, m] = c2 + kappa / tau
                rhs = np.concatenate([h, [h2]])
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
                dy, dtau = sol[:m], float(sol[m])
                dS = [-t + c * dtau + eta * r for t, c, r in zip(adj(dy), C, rd)]
                dX = [rc - _sym(x @ ds @ si) for rc, x, ds, si in zip(Rc, X, dS, Sinv)]
                dkappa = (sigma * mu - tau * kappa - kappa * dtau) / tau
                return dX, dy, dS, dtau, dkappa

            def step_length(dX, dS, dtau, dkappa) -> float:
                alpha = min(_ratio(tau, dtau), _ratio(kappa, dkappa))
                for x, dx in zip(X, dX):
                    alpha = min(alpha, _max_step(x, dx))
                for s, ds in zip(S, dS):
                    alpha = min(alpha, _max_step(s, ds))
                return alpha

            aff = direction(0.0, 1.0)
            alpha_aff = min(1.0, step_length(aff[0], aff[2], aff[3], aff[4]))
            sigma = float(np.clip((1.0 - alpha_aff) ** 3, 1e-3, 0.9))
            dX, dy, dS, dtau, dkappa = direction(sigma, 1.0 - sigma)
            alpha = min(1.0, opts.step * step_length(dX, dS, dtau, dkappa))
            if alpha < 1e-10:
                stalls += 1
                if stalls >= 3:
                    message = "step length collapsed"
                    break
            X = [_sym(x + alpha * dx) for x, dx in zip(X, dX)]
            S = [_sym(s + alpha * ds) for s, ds in zip(S, dS)]
            y = y + alpha * dy
            tau += alpha * dtau
            kappa += alpha * dkappa
    except _Stall as e:
        message = str(e)
        status = SdpStatus.STALLED

    if status is SdpStatus.OPTIMAL or best is None:
        xs, ys = [x / tau for x in X], y / tau
    else:
        xs, ys = best
    return status, xs, ys, cert, it, message


# -----------------------------------------------------------------------------
# Public entry points
# -----------------------------------------------------------------------------


def _check_caps(problem: SdpProblem, tol: float, opts: SolverOptions) -> None:
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    if problem.total_dim > opts.max_dim:
        raise InputError(
            f"SDP has total dimension {problem.total_dim}, cap is {opts.max_dim}",
            suggestion="Lower the matrix level or raise SolverOptions.max_dim",
        )


def _residuals(problem: SdpProblem, x: Sequence[np.ndarray], y: np.ndarray) -> Residuals:
    normb = 1.0 + float(np.linalg.norm(problem.rhs))
    normC = 1.0 + float(np.sqrt(sum(np.sum(c * c) for c in problem.objective)))
    pres = float(np.linalg.norm(problem.apply(x) - problem.rhs)) / normb
    slack = [c - t for c, t in zip(problem.objective, problem.adjoint(y))]
    worst = min((matcore.min_eig(s) for s in slack if s.size), default=0.0)
    dres = max(0.0, -worst) / normC
    pobj = problem.value(x)
    dobj = float(problem.rhs @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return Residuals(pres, dres, gap)


def _repair_facial_duals(problem: SdpProblem, y: np.ndarray, facial: list[int], tol: float) -> np.ndarray:
    if not facial:
        return y
    y = y.copy()
    lam = 1.0
    for _ in range(60):
        slack = [c - t for c, t in zip(problem.objective, problem.adjoint(y))]
        worst = min((matcore.min_eig(s) for s in slack if s.size), default=0.0)
        if worst >= -tol:
            break
        for i in facial:
            a = sum(c[i] for c in problem.coefficients if c.size)
            y[i] = -lam if matcore.max_eig(a) > 0 else lam
        lam *= 2.0
    return y


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL, options: SolverOptions | None = None) -> SdpSolution:
    """Solve the SDP; never returns a silent wrong answer (ill-posed runs come back STALLED)."""
    opts = options or SolverOptions()
    _check_caps(problem, tol, opts)
    m = problem.num_constraints
    red = _facial_reduction(problem, opts)

    live = [k for k, n in enumerate(red.blocks) if n > 0]
    amat = (
        np.hstack([red.coefficients[k].reshape(m, -1) for k in live])
        if live and m
        else np.zeros((m, 0))
    )
    scale_b = 1.0 + float(np.linalg.norm(red.rhs))

    # Dependent rows; an inconsistent right-hand side is an exact Farkas certificate
    keep = np.arange(m)
    if m:
        u, s, _ = np.linalg.svd(amat, full_matrices=True) if amat.shape[1] else (np.eye(m), np.zeros(0), None)
        top = float(s[0]) if len(s) else 0.0
        rank = int(np.sum(s > opts.rank_tol * max(top, 1.0)))
        null = u[:, rank:]
        proj = null.T @ red.rhs
        if np.linalg.norm(proj) > tol * scale_b:
            y = null @ proj / float(proj @ proj)
            y = _lift_certificate(problem, y, red.facial_rows, tol)
            zero = tuple(np.zeros((n, n)) for n in problem.blocks)
            logger.debug("presolve: inconsistent linear constraints")
            return SdpSolution(
                status=SdpStatus.INFEASIBLE,
                primal=zero,
                dual=y,
                objective=float("nan"),
                dual_objective=float("nan"),
                residuals=Residuals(float("inf"), float("inf"), float("inf")),
                certificate=y,
                message="linear constraints are inconsistent",
            )
        if rank < m:
            _, _, piv = scipy.linalg.qr(amat.T, mode="economic", pivoting=True)
            keep = np.sort(piv[:rank])

    A = [red.coefficients[k][keep] for k in live]
    b = red.rhs[keep]
    norms = np.ones(len(keep))
    if len(keep):
        norms = np.sqrt(sum(np.sum(a * a, axis=(1, 2)) for a in A)) if A else np.ones(len(keep))
        norms = np.where(norms > 0, norms, 1.0)
        A = [a / norms[:, None, None] for a in A]
        b = b / norms
    C = [red.objective[k] for k in live]

    if live:
        status, xs, ys, cert, iterations, message = _hsd(C, A, b, tol, opts)
    else:
        status, xs, ys, cert, iterations, message = SdpStatus.OPTIMAL, [], np.zeros(len(keep)), None, 0, "empty"

    y_full = np.zeros(m)
    y_full[keep] = ys / norms
    x_full = [np.zeros((n, n)) for n in problem.blocks]
    for k, xk in zip(live, xs):
        face = red.faces[k]
        x_full[k] = _sym(face @ xk @ face.T)

    certificate = None
    if status is SdpStatus.INFEASIBLE and cert is not None:
        certificate = np.zeros(m)
        certificate[keep] = cert / norms
        certificate = _lift_certificate(problem, certificate, red.facial_rows, tol)
        y_full = certificate

    if status is SdpStatus.OPTIMAL:
        y_full = _repair_facial_duals(problem, y_full, red.facial_rows, tol)
    residuals = _residuals(problem, x_full, y_full)
    if status is SdpStatus.OPTIMAL and residuals.worst() > 10 * tol:
        status = SdpStatus.STALLED
        message = f"converged in reduced form but residual {residuals.worst():.2e} exceeds tolerance"

    return SdpSolution(
        status=status,
        primal=tuple(x_full),
        dual=y_full,
        objective=problem.value(x_full),
        dual_objective=float(problem.rhs @ y_full),
        residuals=residuals,
        iterations=iterations,
        certificate=certificate,
        message=message,
    )


def _alternating_projections(problem: SdpProblem, tol: float, opts: SolverOptions) -> tuple[list[np.ndarray], float]:
    m = problem.num_constraints
    sizes = problem.blocks
    amat = np.hstack([a.reshape(m, -1) for a in problem.coefficients]) if m else np.zeros((0, sum(n * n for n in sizes)))
    pinv = np.linalg.pinv(amat) if m else None
    x = [np.eye(n) / max(1, sum(sizes)) for n in sizes]
    for _ in range(opts.projection_iters):
        if m:
            flatx = np.concatenate([xb.ravel() for xb in x])
            flatx = flatx - pinv @ (amat @ flatx - problem.rhs)
            out, pos = [], 0
            for n in sizes:
                out.append(_sym(flatx[pos : pos + n * n].reshape(n, n)))
                pos += n * n
            x = out
        projected = []
        for xb in x:
            if xb.size:
                w, v = scipy.linalg.eigh(xb)
                projected.append((v * np.clip(w, 0, None)) @ v.T)
            else:
                projected.append(xb)
        x = projected
        viol, _ = witness_residual(problem, x)
        if viol <= tol:
            break
    viol, _ = witness_residual(problem, x)
    return x, viol


def feasibility(problem: SdpProblem, tol: float = DEFAULT_TOL, options: SolverOptions | None = None) -> FeasibilityResult:
    """Find a PSD witness or a Farkas certificate of infeasibility."""
    opts = options or SolverOptions()
    blank = SdpProblem(problem.blocks, tuple(np.zeros((n, n)) for n in problem.blocks), problem.coefficients, problem.rhs)
    sol = solve(blank, tol, opts)
    if sol.status is SdpStatus.INFEASIBLE:
        return FeasibilityResult(SdpStatus.INFEASIBLE, certificate=sol.certificate)
    if sol.status is SdpStatus.OPTIMAL:
        viol, eig = witness_residual(problem, sol.primal)
        if viol <= 10 * tol and eig >= -10 * tol:
            return FeasibilityResult(SdpStatus.OPTIMAL, witness=sol.primal, residual=viol)
    logger.debug("interior point stalled (%s); falling back to alternating projections", sol.message)
    x, viol = _alternating_projections(problem, tol, opts)
    _, eig = witness_residual(problem, x)
    if viol <= 10 * tol and eig >= -10 * tol:
        return FeasibilityResult(SdpStatus.OPTIMAL, witness=tuple(x), residual=viol)
    return FeasibilityResult(SdpStatus.STALLED, witness=tuple(x), residual=viol)


# -----------------------------------------------------------------------------
# Complex Hermitian front end
# -----------------------------------------------------------------------------


class ComplexSdpBuilder:
    """Build a real SDP over complex Hermitian PSD blocks.

    A complex block W of size n is carried by a real symmetric block Y of size
    2n with W = complexify(Y). Linear data is given as complex matrices G and
    enters through Re trace(G* W).
    """

    def __init__(self) -> None:
        self.sizes: list[int] = []
        self._objective: dict[int, np.ndarray] = {}
        self._rows: list[tuple[dict[int, np.ndarray], float]] = []

    def add_block(self, n: int) -> int:
        self.sizes.append(n)
        return len(self.sizes) - 1

    def objective(self, block: int, g: np.ndarray) -> None:
        self._objective[block] = self._objective.get(block, 0) + matcore.real_functional(g)

    def constrain(self, terms: dict[int, np.ndarray], rhs: float) -> None:
        """Add sum_b Re trace(G_b* W_b) = rhs."""
        self._rows.append(({k: matcore.real_functional(g) for k, g in terms.items()}, float(rhs)))

    def constrain_complex(self, terms: dict[int, np.ndarray], rhs: complex) -> None:
        """Add sum_b trace(G_b* W_b) = rhs as two real rows."""
        self.constrain(terms, rhs.real)
        self.constrain({k: 1j * g for k, g in terms.items()}, complex(rhs).imag)

    def compile(self) -> SdpProblem:
        real_sizes = [2 * n for n in self.sizes]
        objective = [self._objective.get(k, np.zeros((r, r))) for k, r in enumerate(real_sizes)]
        rows = []
        for terms, rhs in self._rows:
            rows.append(([terms.get(k, np.zeros((r, r))) for k, r in enumerate(real_sizes)], rhs))
        return SdpProblem.build(real_sizes, objective, rows)

    @staticmethod
    def decode(solution_blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
        return [matcore.complexify(y) for y in solution_blocks]


@dataclass(frozen=True, eq=False)
class MarginResult:
    """max t such that base - sum_l y_l G_l - t I is PSD.

    ``witness`` is the optimal base - sum_l y_l G_l, ``functional`` the optimal
    dual density W (PSD, trace one, orthogonal to every G_l).
    """

    status: SdpStatus
    value: float
    witness: np.ndarray | None
    functional: np.ndarray | None
    solution: SdpSolution | None


def max_min_eigenvalue(
    base: np.ndarray,
    directions: Sequence[np.ndarray],
    tol: float = DEFAULT_TOL,
    options: SolverOptions | None = None,
) -> MarginResult:
    """Largest achievable minimum eigenvalue over an affine family of Hermitian matrices."""
    base = matcore.hermitize(base, "margin base")
    n = base.shape[0]
    if not len(directions):
        value, v = matcore.min_eig_pair(base)
        return MarginResult(SdpStatus.OPTIMAL, value, base, np.outer(v, v.conj()), None)
    builder = ComplexSdpBuilder()
    k = builder.add_block(n)
    builder.objective(k, base)
    builder.constrain({k: np.eye(n)}, 1.0)
    for g in directions:
        builder.constrain({k: g}, 0.0)
    sol = solve(builder.compile(), tol, options)
    if sol.status is not SdpStatus.OPTIMAL:
        return MarginResult(sol.status, float("nan"), None, None, sol)
    functional = builder.decode(sol.primal)[0]
    y = sol.dual
    witness = base - sum(yl * g for yl, g in zip(y[1:], directions))
    witness = (witness + witness.conj().T) / 2
    return MarginResult(sol.status, float(y[0]), witness, functional, sol)


# -----------------------------------------------------------------------------
# Plain-text dump
# -----------------------------------------------------------------------------


def _fmt_matrix(a: np.ndarray) -> list[str]:
    return [" ".join(format(float(v), ".17g") for v in row) for row in a]


def dump_problem(problem: SdpProblem) -> str:
    """Block-format text: block dims, then objective and constraint matrices row-major."""
    lines = ["blocks " + " ".join(str(n) for n in problem.blocks)]
    lines.append(f"constraints {problem.num_constraints}")
    lines.append("objective")
    for c in problem.objective:
        lines.extend(_fmt_matrix(c))
    for i in range(problem.num_constraints):
        lines.append(f"constraint {i} rhs {format(float(problem.rhs[i]), '.17g')}")
        for a in problem.coefficients:
            lines.extend(_fmt_matrix(a[i]))
    return "\n".join(lines) + "\n"


def load_problem(text: str) -> SdpProblem:
    """Inverse of dump_problem."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        sizes = [int(t) for t in lines[0].split()[1:]]
        m = int(lines[1].split()[1])
        pos = 3

        def take(n: int) -> np.ndarray:
            nonlocal pos
            rows = [[float(t) for t in lines[pos + r].split()] for r in range(n)]
            pos += n
            return np.array(rows).reshape(n, n)

        objective = [take(n) for n in sizes]
        coeffs = [np.zeros((m, n, n)) for n in sizes]
        rhs = np.zeros(m)
        for i in range(m):
            rhs[i] = float(lines[pos].split()[3])
            pos += 1
            for k, n in enumerate(sizes):
                coeffs[k][i] = take(n)
    except (IndexError, ValueError) as e:
        raise InputError(f"malformed SDP dump: {e}") from e
    return SdpProblem(tuple(sizes), tuple(objective), tuple(coeffs), rhs)

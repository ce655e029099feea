"""Riemannian trust-region method with an exact subproblem solver.

Each iteration builds the quadratic model of the objective in an orthonormal
basis of the tangent space, solves the ball-constrained subproblem exactly
(so negative curvature is always exploited), retracts, and accepts or rejects
the step from the ratio of actual to predicted decrease.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .manifolds import ManifoldKind, ManifoldPoint, Sphere, hess_apply
from .problems import Problem, deflate, restrict_to_subspace
from .subproblem import TRSubproblem, solve_exact

_EPS = np.finfo(float).eps
# f differences below this many ulps of |f| are treated as unresolvable
_RESOLUTION_ULPS = 100.0
STALL_RADIUS = 1e-14


class Status(str, enum.Enum):
    STATIONARY = "stationary"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"


class NonFiniteObjective(RuntimeError):
    """Objective or derivatives became non-finite; ``trace`` holds the run so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TRConfig:
    delta0: float = 0.5
    delta_max: float = 8.0
    eta_accept: float = 0.1
    shrink: float = 0.25
    expand: float = 2.0
    rho_shrink: float = 0.25
    rho_expand: float = 0.75
    grad_tol: float = 1e-9
    curv_tol: float = 1e-7
    max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta_accept < 0.25:
            raise ValueError("eta_accept must lie in (0, 0.25)")
        if not 0.0 < self.shrink < 1.0 < self.expand:
            raise ValueError("need 0 < shrink < 1 < expand")
        if self.grad_tol <= 0 or self.curv_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class TRRecord:
    iter: int
    coords: np.ndarray
    f: float
    grad_norm: float
    lambda_min: float | None
    delta: float
    rho: float | None
    step_norm: float
    accepted: bool | None

    def as_dict(self) -> dict:
        return {
            "iter": self.iter,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "lambda_min": self.lambda_min,
            "delta": self.delta,
            "rho": self.rho,
            "step_norm": self.step_norm,
            "accepted": self.accepted,
        }


@dataclass
class TRTrace:
    records: list[TRRecord] = field(default_factory=list)
    status: Status | None = None
    message: str = ""

    @property
    def n_accepted(self) -> int:
        return sum(1 for r in self.records if r.accepted)

    @property
    def final(self) -> TRRecord:
        return self.records[-1]


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Quadratic model data at a point: derivatives, tangent basis, g, H and eig(H)."""

    x: np.ndarray
    f: float
    derivatives: object
    basis: np.ndarray
    g: np.ndarray
    H: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.g))

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else np.inf


def local_model(problem: Problem, x: np.ndarray, kind: ManifoldKind | None = None) -> LocalModel:
    kind = kind or problem.kind
    eu = problem.evaluate(x)
    U = kind.basis(x)
    rgrad = kind.project(x, eu.grad)
    g = U.T @ rgrad
    H = U.T @ hess_apply(kind, x, eu, U)
    H = 0.5 * (H + H.T)
    if not (np.isfinite(eu.value) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise NonFiniteObjective(f"non-finite objective or derivatives at x (f={eu.value})")
    w, V = np.linalg.eigh(H)
    return LocalModel(x, float(eu.value), eu, U, g, H, w, V)


def quadratic_model_at(problem: Problem, x: ManifoldPoint, radius: float = 1.0) -> TRSubproblem:
    """Tangent-basis model ``g = U^T grad f``, ``H = U^T Hess f [U]`` at ``x``."""
    if x.kind != problem.kind:
        raise ValueError("point and problem live on different manifolds")
    m = local_model(problem, x.coords)
    return TRSubproblem(m.g, m.H, radius)


@dataclass(frozen=True)
class Stationarity:
    first_order: bool
    second_order: bool
    lambda_min: float
    grad_norm: float


def check_stationarity(problem: Problem, x: ManifoldPoint, grad_tol: float, curv_tol: float) -> Stationarity:
    """First-order: ||grad|| <= grad_tol. Second-order: additionally lambda_min(Hess) >= -curv_tol."""
    m = local_model(problem, x.coords)
    first = m.grad_norm <= grad_tol
    return Stationarity(first, first and m.lambda_min >= -curv_tol, m.lambda_min, m.grad_norm)


def _stationary(m: LocalModel, cfg: TRConfig) -> bool:
    return m.grad_norm <= cfg.grad_tol and m.lambda_min >= -cfg.curv_tol


def minimize(problem: Problem, x0: ManifoldPoint, cfg: TRConfig | None = None) -> tuple[ManifoldPoint, TRTrace]:
    """Run the trust-region method from ``x0``.

    Record 0 describes ``x0``; record ``k >= 1`` describes trial step ``k``
    (its ratio, length and whether it was accepted) and the iterate after it.
    """
    cfg = cfg or TRConfig()
    kind = problem.kind
    if x0.kind != kind:
        raise ValueError(f"x0 lives on {x0.kind}, problem on {kind}")
    trace = TRTrace()
    try:
        model = local_model(problem, np.array(x0.coords))
    except NonFiniteObjective as exc:
        raise NonFiniteObjective(str(exc), trace) from None
    delta = cfg.delta0
    trace.records.append(TRRecord(0, model.x, model.f, model.grad_norm, model.lambda_min, delta, None, 0.0, None))

    for it in range(1, cfg.max_iters):
        if _stationary(model, cfg):
            break
        sub = TRSubproblem(model.g, model.H, delta)
        sol = solve_exact(sub, (model.eigenvalues, model.eigenvectors))
        step = model.basis @ sol.xi
        x_new = kind.retract(model.x, step)
        f_new = problem.value(x_new)
        if not np.isfinite(f_new):
            trace.status = None
            raise NonFiniteObjective(f"objective is non-finite after step {it} (f={f_new})", trace)

        floor = _RESOLUTION_ULPS * _EPS * max(1.0, abs(model.f))
        rho = (model.f - f_new + floor) / (sol.model_decrease + floor)
        new_model = None
        if rho > cfg.eta_accept and f_new < model.f:
            accepted = True
        elif sol.model_decrease <= floor and f_new <= model.f + floor:
            # predicted and actual changes are below the resolution of f, so
            # only the gradient can tell progress: accept if it shrinks
            try:
                new_model = local_model(problem, x_new)
            except NonFiniteObjective as exc:
                raise NonFiniteObjective(str(exc), trace) from None
            accepted = new_model.grad_norm < model.grad_norm
        else:
            accepted = False

        if rho < cfg.rho_shrink or not accepted:
            delta *= cfg.shrink
        elif rho > cfg.rho_expand and sol.on_boundary:
            delta = min(cfg.expand * delta, cfg.delta_max)

        if accepted:
            try:
                model = new_model if new_model is not None else local_model(problem, x_new)
            except NonFiniteObjective as exc:
                raise NonFiniteObjective(str(exc), trace) from None
        trace.records.append(TRRecord(
            it, model.x, model.f, model.grad_norm, model.lambda_min, delta,
            float(rho), float(np.linalg.norm(sol.xi)), accepted,
        ))
        if delta < STALL_RADIUS:
            trace.status = Status.STALLED
            trace.message = (
                f"trust radius fell below {STALL_RADIUS:g} at iteration {it}; "
                f"grad_norm={model.grad_norm:.3e}, lambda_min={model.lambda_min:.3e}"
            )
            return ManifoldPoint(kind, model.x), trace

    if _stationary(model, cfg):
        trace.status = Status.STATIONARY
    else:
        trace.status = Status.MAX_ITERS
        trace.message = f"grad_norm={model.grad_norm:.3e}, lambda_min={model.lambda_min:.3e}"
    return ManifoldPoint(kind, model.x), trace


def recover_by_deflation(problem: Problem, rng: np.random.Generator, cfg: TRConfig | None = None,
                         count: int | None = None) -> tuple[list[np.ndarray], list[TRTrace]]:
    """Recover sphere minimizers one at a time, restricting to the orthogonal
    complement of those already found.

    Suited to objectives whose minimizers are orthonormal (tensor components).
    Returns the recovered unit vectors in ambient coordinates and each run's trace.
    """
    if not isinstance(problem.kind, Sphere):
        raise ValueError("deflation needs a sphere problem")
    n = problem.kind.n
    count = n if count is None else count
    found: list[np.ndarray] = []
    traces: list[TRTrace] = []
    for _ in range(count):
        B = deflate(found, n)
        sub = restrict_to_subspace(problem, B) if found else problem
        x0 = ManifoldPoint(sub.kind, sub.kind.random_point(rng))
        x, trace = minimize(sub, x0, cfg)
        u = B @ x.coords
        found.append(u / np.linalg.norm(u))
        traces.append(trace)
    return found, traces

"""Empirical certification of ridable landscapes.

A point is covered if its Riemannian gradient is large (``>= beta``), its
Riemannian Hessian has a direction of curvature ``<= -alpha``, or it sits
within ``delta`` of a known minimizer around which the Hessian stays
``>= gamma``. The classifier restates measured quantities; the parameter
estimator sweeps a documented grid for the largest box that covers a sample.

Continuous symmetries (a global phase, a global rotation) make the Hessian
singular along the orbit of every minimizer. Convexity near minimizers is
therefore measured on the tangent directions orthogonal to the orbit.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .manifolds import EuclideanDerivatives, ManifoldKind, ManifoldPoint, Sphere, quotient_distance
from .problems import Problem
from .solver import LocalModel, TRConfig, local_model, minimize

#: log grid for the gradient and curvature thresholds
THRESHOLD_GRID = np.logspace(-6.0, 2.0, 33)
#: relative delta grid, scaled by a quarter of the minimizer separation
DELTA_FRACTIONS = np.logspace(-3.0, 0.0, 31)
NEIGHBORHOOD_SAMPLES = 200


class Regime(str, enum.Enum):
    STRONG_GRADIENT = "strong_gradient"
    NEGATIVE_CURVATURE = "negative_curvature"
    STRONG_CONVEXITY = "strong_convexity"


@dataclass(frozen=True)
class RidabilityParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v}")

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class RegimeReport:
    """Measured regime membership of one point.

    ``margins`` maps ``beta`` to the gradient norm, ``alpha`` to ``-lambda_min``
    and, when a minimizer is known, ``gamma`` to the smallest curvature orthogonal
    to the symmetry orbit (minimum over the sampled neighborhood if one was drawn).
    """

    point: np.ndarray
    grad_norm: float
    lambda_min: float
    nearest_min_dist: float | None
    regimes: frozenset
    margins: dict
    neighborhood_size: int = 0

    @property
    def unclassified(self) -> bool:
        return not self.regimes

    def as_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "lambda_min": self.lambda_min,
            "nearest_min_dist": self.nearest_min_dist,
            "regimes": sorted(r.value for r in self.regimes),
            "margins": dict(self.margins),
            "neighborhood_size": self.neighborhood_size,
            "unclassified": self.unclassified,
        }


@dataclass(eq=False)
class RidabilityEstimate:
    n_samples: int
    params: RidabilityParams | None
    coverage: dict
    alpha_hat: float | None
    beta_hat: float | None
    gamma_hat: float | None
    delta_hat: float | None
    unclassified: list = field(default_factory=list)
    qualitative: bool = False
    neighborhood_samples: int = 0
    representatives: int = 0

    @property
    def unclassified_fraction(self) -> float:
        return len(self.unclassified) / self.n_samples

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "params": None if self.params is None else self.params.as_dict(),
            "coverage": dict(self.coverage),
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "gamma_hat": self.gamma_hat,
            "delta_hat": self.delta_hat,
            "unclassified_count": len(self.unclassified),
            "unclassified_fraction": self.unclassified_fraction,
            "unclassified": [np.asarray(x).tolist() for x in self.unclassified],
            "qualitative": self.qualitative,
            "neighborhood_samples": self.neighborhood_samples,
            "convexity_check": "monte-carlo surrogate over the 2*delta ball",
        }


# --------------------------------------------------------------------------- curvature helpers


def symmetry_directions(kind: ManifoldKind, x: np.ndarray, quotient: str) -> np.ndarray:
    """Ambient tangent vectors generating the continuous symmetry orbit through ``x``.

    A global phase ``z -> z e^{it}`` and a global planar rotation of unit rows
    both move every 2-vector block by a quarter turn.
    """
    D = x.size
    if quotient == "phase" and kind.is_complex or quotient == "rotation" and kind.block_size == 2:
        blocks = x.reshape(-1, 2)
        return np.column_stack([-blocks[:, 1], blocks[:, 0]]).reshape(D, 1)
    return np.zeros((D, 0))


def horizontal_lambda_min(model: LocalModel, directions: np.ndarray) -> float:
    """Smallest Hessian eigenvalue on the tangent directions orthogonal to ``directions``."""
    if directions.shape[1] == 0:
        return model.lambda_min
    C = model.basis.T @ directions
    keep = np.linalg.norm(C, axis=0) > 1e-12
    if not np.any(keep):
        return model.lambda_min
    Q, _ = np.linalg.qr(C[:, keep], mode="complete")
    W = Q[:, int(np.sum(keep)):]
    if W.shape[1] == 0:
        return np.inf
    return float(np.linalg.eigvalsh(W.T @ model.H @ W)[0])


def _solution_quotient(problem: Problem) -> str:
    return problem.solution_set.quotient if problem.solution_set is not None else "none"


def _ball_samples(kind: ManifoldKind, center: np.ndarray, radius: float, count: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """Points ``retract(center, t u)`` with ``u`` a random unit tangent and ``t``
    uniform-in-volume up to ``radius``; metric-projection retraction only
    shortens the ambient distance, so each point lies in the ball."""
    d = max(kind.dim, 1)
    out = []
    for _ in range(count):
        u = kind.random_tangent(center, rng)
        t = radius * rng.random() ** (1.0 / d)
        out.append(kind.retract(center, t * u))
    return out


def _neighborhood_gamma(problem: Problem, center: np.ndarray, radius: float, count: int,
                        rng: np.random.Generator) -> float:
    quotient = _solution_quotient(problem)
    lo = np.inf
    for y in _ball_samples(problem.kind, center, radius, count, rng):
        m = local_model(problem, y)
        lo = min(lo, horizontal_lambda_min(m, symmetry_directions(problem.kind, y, quotient)))
    return lo


# --------------------------------------------------------------------------- classification


def classify_point(problem: Problem, x: ManifoldPoint, params: RidabilityParams,
                   convexity: bool | None = None, neighborhood_samples: int = 0,
                   rng: np.random.Generator | None = None) -> RegimeReport:
    """Report which of the three regimes hold at ``x`` under ``params``.

    Parameters
    ----------
    convexity : bool, optional
        Whether to test the convexity regime. Defaults to "when the problem
        knows its minimizers"; ``True`` without known minimizers is an error.
    neighborhood_samples : int
        If positive, the convexity regime also requires ``lambda_min >= gamma``
        at this many random points of the ``2 delta`` ball around the nearest
        minimizer (a sampled stand-in for the universal statement).
    """
    if not isinstance(params, RidabilityParams):
        params = RidabilityParams(*params)
    if x.kind != problem.kind:
        raise ValueError("point and problem live on different manifolds")
    sol = problem.solution_set
    if convexity is None:
        convexity = sol is not None
    if convexity and sol is None:
        raise ValueError(f"problem {problem.label!r} has no known minimizers for the convexity regime")

    m = local_model(problem, np.array(x.coords))
    regimes = set()
    margins = {"beta": m.grad_norm, "alpha": -m.lambda_min}
    if m.grad_norm >= params.beta:
        regimes.add(Regime.STRONG_GRADIENT)
    if m.lambda_min <= -params.alpha:
        regimes.add(Regime.NEGATIVE_CURVATURE)
    dist = None
    n_nbhd = 0
    if convexity:
        dist, idx = sol.nearest(problem.kind, m.x)
        gamma = horizontal_lambda_min(m, symmetry_directions(problem.kind, m.x, sol.quotient))
        if dist <= params.delta and neighborhood_samples > 0:
            rng = rng if rng is not None else np.random.default_rng(0)
            gamma = min(gamma, _neighborhood_gamma(problem, sol.points[idx], 2.0 * params.delta,
                                                   neighborhood_samples, rng))
            n_nbhd = neighborhood_samples
        margins["gamma"] = gamma
        if dist <= params.delta and gamma >= params.gamma:
            regimes.add(Regime.STRONG_CONVEXITY)
    return RegimeReport(m.x, m.grad_norm, m.lambda_min, dist, frozenset(regimes), margins, n_nbhd)


# --------------------------------------------------------------------------- parameter sweep


@dataclass(frozen=True, eq=False)
class _Sample:
    grad_norm: np.ndarray
    lambda_min: np.ndarray
    gamma: np.ndarray
    dist: np.ndarray | None


def _representatives(problem: Problem, cfg: TRConfig) -> list[np.ndarray]:
    """Known minimizers; approximate ones are polished by the solver first."""
    sol = problem.solution_set
    if sol is None:
        return []
    reps = []
    for p in sol.points:
        if p.size != problem.kind.ambient_dim:
            continue  # e.g. a larger reference for signed-permutation matching
        if not sol.exact:
            x, _ = minimize(problem, ManifoldPoint(problem.kind, p), cfg)
            p = np.array(x.coords)
        reps.append(p)
    return reps


def _separation(kind: ManifoldKind, reps: list[np.ndarray], quotient: str, fallback: float) -> float:
    seps = [quotient_distance(kind, a, b, quotient) for i, a in enumerate(reps) for b in reps[i + 1:]]
    seps = [s for s in seps if s > 0]
    return min(seps) if seps else fallback


def _sample_points(problem: Problem, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([problem.kind.random_point(rng) for _ in range(n_samples)])


def _measure(problem: Problem, X: np.ndarray, reps: list[np.ndarray], quotient: str) -> _Sample:
    g = np.empty(len(X))
    lam = np.empty(len(X))
    gam = np.empty(len(X))
    dist = np.empty(len(X)) if reps else None
    for i, x in enumerate(X):
        m = local_model(problem, x)
        g[i], lam[i] = m.grad_norm, m.lambda_min
        gam[i] = horizontal_lambda_min(m, symmetry_directions(problem.kind, x, quotient))
        if reps:
            dist[i] = min(quotient_distance(problem.kind, x, r, quotient) for r in reps)
    return _Sample(g, lam, gam, dist)


def _best_threshold_box(g: np.ndarray, lam: np.ndarray) -> tuple[int, float, float]:
    """For the points in ``g``/``lam`` choose (alpha, beta) from the log grid.

    Lexicographic: fewest points covered by neither threshold, then largest
    ``alpha * beta``. Only curvature thresholds met by at least one point are
    candidates, so the negative-curvature regime is never vacuous when it can
    be populated.
    """
    best = None
    alphas = THRESHOLD_GRID[THRESHOLD_GRID <= -lam.min()] if lam.size else THRESHOLD_GRID[:0]
    if alphas.size == 0:
        alphas = THRESHOLD_GRID
    for a in alphas:
        curved = lam <= -a
        rest = g[~curved]
        if rest.size == 0:
            cand = (0, -(a * THRESHOLD_GRID[-1]), a, THRESHOLD_GRID[-1])
        else:
            ok = THRESHOLD_GRID[THRESHOLD_GRID <= rest.min()]
            b = ok[-1] if ok.size else THRESHOLD_GRID[0]
            cand = (int(np.sum(rest < b)), -(a * b), a, b)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return best[0], float(best[2]), float(best[3])


def estimate_parameters(problem: Problem, n_samples: int, seed: int,
                        neighborhood_samples: int = NEIGHBORHOOD_SAMPLES,
                        cfg: TRConfig | None = None) -> RidabilityEstimate:
    """Largest sampled parameter box under which every sample is classified.

    Samples are drawn from the invariant measure of the manifold (normalized
    Gaussians per sphere factor, standard Gaussians on Euclidean kinds).

    The sweep: ``delta`` runs over a quarter of the minimizer separation times
    a log grid on [1e-3, 1]; for each ``delta``, ``gamma`` is the smallest
    orbit-orthogonal curvature among samples within ``2 delta`` of a minimizer
    and at ``neighborhood_samples`` random points of each minimizer's
    ``2 delta`` ball. Points within ``delta`` count as convex when that
    ``gamma`` is positive; ``alpha`` and ``beta`` then come from a log grid on
    [1e-6, 1e2] for the remaining points. Boxes are ranked by fewest
    unclassified samples, then by the product of the parameters.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = cfg or TRConfig(delta0=0.05)
    rng = np.random.default_rng(seed)
    quotient = _solution_quotient(problem)
    reps = _representatives(problem, cfg)
    X = _sample_points(problem, n_samples, rng)
    S = _measure(problem, X, reps, quotient)

    options = []
    unc, a, b = _best_threshold_box(S.grad_norm, S.lambda_min)
    options.append((unc, -(a * b), a, b, None, None))
    qualitative = False
    if reps:
        sep = _separation(problem.kind, reps, quotient, fallback=float(np.max(S.dist)) or 1.0)
        nb_rng = np.random.default_rng([seed, 1])
        for frac in DELTA_FRACTIONS:
            delta = float(0.25 * sep * frac)
            near2 = S.dist <= 2.0 * delta
            gamma = float(np.min(S.gamma[near2])) if np.any(near2) else np.inf
            for r in reps:
                gamma = min(gamma, _neighborhood_gamma(problem, r, 2.0 * delta, neighborhood_samples, nb_rng))
            if not gamma > 0:
                qualitative = qualitative or gamma >= -1e-9
                break  # shrinking balls only raise gamma; larger delta can only lower it
            convex = S.dist <= delta
            unc, a, b = _best_threshold_box(S.grad_norm[~convex], S.lambda_min[~convex])
            options.append((unc, -(a * b * gamma * delta), a, b, gamma, delta))
    # with no convexity box the product omits gamma and delta; prefer any valid convex box
    best = min(options, key=lambda o: (o[0], o[4] is None, o[1]))
    _, _, a, b, gamma, delta = best

    curved = S.lambda_min <= -a
    steep = S.grad_norm >= b
    convex = np.zeros(n_samples, dtype=bool) if delta is None else (S.dist <= delta)
    unclassified = ~(curved | steep | convex)
    coverage = {
        Regime.STRONG_GRADIENT.value: float(np.mean(steep)),
        Regime.NEGATIVE_CURVATURE.value: float(np.mean(curved)),
        Regime.STRONG_CONVEXITY.value: float(np.mean(convex)),
    }
    params = None
    if gamma is not None:
        params = RidabilityParams(a, b, gamma, delta)
    return RidabilityEstimate(
        n_samples=n_samples,
        params=params,
        coverage=coverage,
        alpha_hat=float(np.min(-S.lambda_min[curved])) if np.any(curved) else None,
        beta_hat=float(np.min(S.grad_norm[steep])) if np.any(steep) else None,
        gamma_hat=gamma,
        delta_hat=delta,
        unclassified=[X[i] for i in np.flatnonzero(unclassified)],
        qualitative=qualitative,
        neighborhood_samples=neighborhood_samples if delta is not None else 0,
        representatives=len(reps),
    )


# --------------------------------------------------------------------------- brute force


@dataclass(frozen=True, eq=False)
class LocalMinimum:
    coords: np.ndarray
    f: float
    lambda_min: float
    grid_coords: np.ndarray


def sphere_grid(n: int, resolution: float) -> tuple[np.ndarray, tuple[int, ...]]:
    """Angular grid on S^1 (``n = 2``) or S^2 (``n = 3``); returns points and grid shape.

    On S^2 the rows are inclinations ``(i + 1/2) pi / N_theta`` (avoiding the
    poles) and the columns an even number of azimuths.
    """
    if n == 2:
        N = int(np.ceil(2.0 * np.pi / resolution))
        t = 2.0 * np.pi * np.arange(N) / N
        return np.column_stack([np.cos(t), np.sin(t)]), (N,)
    if n == 3:
        n_theta = int(np.ceil(np.pi / resolution))
        n_phi = 2 * int(np.ceil(np.pi / resolution))
        return spherical_points(n_phi, n_theta), (n_theta, n_phi)
    raise ValueError(f"angular grids exist for S^1 and S^2 only (ambient n = 2 or 3), got n = {n}")


def spherical_angles(n_phi: int, n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    theta = np.pi * (np.arange(n_theta) + 0.5) / n_theta
    return phi, theta


def spherical_points(n_phi: int, n_theta: int) -> np.ndarray:
    """Row-major over (inclination, azimuth)."""
    phi, theta = spherical_angles(n_phi, n_theta)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return np.column_stack([(np.sin(T) * np.cos(P)).ravel(), (np.sin(T) * np.sin(P)).ravel(), np.cos(T).ravel()])


def grid_local_minima(F: np.ndarray) -> np.ndarray:
    """Indices of grid values no larger than any neighbor.

    1-D grids are cyclic. 2-D grids are (inclination, azimuth) on S^2: azimuth
    wraps, and the neighbor across a pole of column ``j`` is column
    ``j + N_phi / 2`` in the same row.
    """
    if F.ndim == 1:
        mask = (F <= np.roll(F, 1)) & (F <= np.roll(F, -1))
        return np.flatnonzero(mask)
    n_theta, n_phi = F.shape
    if n_phi % 2:
        raise ValueError("the azimuth count must be even for pole wrapping")
    flipped = np.roll(F, n_phi // 2, axis=1)
    padded = np.vstack([flipped[:1], F, flipped[-1:]])
    mask = np.ones_like(F, dtype=bool)
    for di in (-1, 0, 1):
        rows = padded[1 + di:1 + di + n_theta]
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= F <= np.roll(rows, -dj, axis=1)
    return np.argwhere(mask)


def brute_force_minimizers(problem: Problem, resolution: float, quotient: str = "none",
                           dedup_tol: float = 1e-4, cfg: TRConfig | None = None) -> list[LocalMinimum]:
    """Local minimizers of a problem on S^1 or S^2 by dense grid search.

    Grid points that are no larger than all their neighbors are polished by the
    trust-region solver; second-order stationary results are kept and
    deduplicated under ``quotient`` at ``dedup_tol``.
    """
    kind = problem.kind
    if not isinstance(kind, Sphere) or kind.n not in (2, 3):
        raise ValueError(f"brute force needs Sphere(2) or Sphere(3), got {kind}")
    limit = 0.005 if kind.n == 2 else 0.02
    if not 0 < resolution <= limit:
        raise ValueError(f"resolution must lie in (0, {limit}] rad for {kind}")
    X, shape = sphere_grid(kind.n, resolution)
    F = problem.values(X).reshape(shape)
    idx = grid_local_minima(F)
    cfg = cfg or TRConfig(delta0=resolution)
    found: list[LocalMinimum] = []
    for ij in np.atleast_2d(idx.reshape(len(idx), -1)):
        flat = int(np.ravel_multi_index(tuple(ij), shape))
        x, trace = minimize(problem, ManifoldPoint(kind, X[flat]), cfg)
        if trace.status is None or trace.status.value != "stationary":
            continue
        c = np.array(x.coords)
        if any(quotient_distance(kind, c, m.coords, quotient) < dedup_tol for m in found):
            continue
        found.append(LocalMinimum(c, trace.final.f, trace.final.lambda_min, np.array(ij)))
    found.sort(key=lambda m: tuple(np.round(m.coords, 8)))
    return found


# --------------------------------------------------------------------------- finite differences


@dataclass(frozen=True, eq=False)
class FDReport:
    grad_error: float
    hess_error: float
    grad_tol: float
    hess_tol: float
    n_directions: int
    steps: tuple

    @property
    def passed(self) -> bool:
        return self.grad_error < self.grad_tol and self.hess_error < self.hess_tol

    def as_dict(self) -> dict:
        return {"grad_error": self.grad_error, "hess_error": self.hess_error, "grad_tol": self.grad_tol,
                "hess_tol": self.hess_tol, "n_directions": self.n_directions, "steps": list(self.steps),
                "passed": self.passed}


def _curve_differences(problem: Problem, kind: ManifoldKind, x: np.ndarray, u: np.ndarray, f0: float,
                       t: float) -> tuple[float, float]:
    """Central first and second differences of ``t -> f(retract(x, t u))`` at 0
    at steps ``t, t/2, t/4`` combined by two Richardson levels (truncation O(t^6))."""

    def central(h):
        if h * h < np.finfo(float).tiny:
            raise ValueError(f"finite-difference step {h:g} underflows")
        xp, xm = kind.retract(x, h * u), kind.retract(x, -h * u)
        if np.array_equal(xp, x) or np.array_equal(xm, x):
            raise ValueError(f"finite-difference step {h:g} underflows at this point")
        fp, fm = problem.value(xp), problem.value(xm)
        return np.array([(fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)])

    D = [central(t), central(0.5 * t), central(0.25 * t)]
    R1 = [(4.0 * D[1] - D[0]) / 3.0, (4.0 * D[2] - D[1]) / 3.0]
    d1, d2 = (16.0 * R1[1] - R1[0]) / 15.0
    return float(d1), float(d2)


def fd_check(problem: Problem, x: ManifoldPoint, directions=3, steps=(1e-2, 1e-3, 1e-4),
             grad_tol: float = 1e-5, hess_tol: float = 1e-4, rng: np.random.Generator | None = None) -> FDReport:
    """Compare Riemannian derivatives with differences along retraction curves.

    Errors are relative to ``||grad f|| ||u||`` and ``||Hess f[u]|| ||u||``
    (floored at ``1e-6 max(1, |f|)``), minimized over ``steps`` and maximized
    over the directions. ``directions`` is a count of random unit tangent
    vectors or an array of ambient vectors (one per row), projected and
    normalized.
    """
    kind = problem.kind
    if x.kind != kind:
        raise ValueError("point and problem live on different manifolds")
    steps = tuple(float(s) for s in steps)
    if not steps or min(steps) <= 0:
        raise ValueError("steps must be positive")
    xc = np.array(x.coords)
    m = local_model(problem, xc)
    if np.isscalar(directions):
        rng = rng if rng is not None else np.random.default_rng(0)
        U = [kind.random_tangent(xc, rng) for _ in range(int(directions))]
    else:
        U = []
        for v in np.atleast_2d(np.asarray(directions, dtype=float)):
            u = kind.project(xc, v)
            nu = np.linalg.norm(u)
            if nu > 0:
                U.append(u / nu)
    rgrad = kind.project(xc, m.derivatives.grad)
    floor = 1e-6 * max(1.0, abs(m.f))
    g_err = h_err = 0.0
    for u in U:
        slope = float(rgrad @ u)
        hu = m.basis @ (m.H @ (m.basis.T @ u))
        curv = float(hu @ u)
        g_scale = max(np.linalg.norm(rgrad), floor)
        h_scale = max(np.linalg.norm(hu), floor)
        best_g = best_h = np.inf
        for t in steps:
            d1, d2 = _curve_differences(problem, kind, xc, u, m.f, t)
            best_g = min(best_g, abs(d1 - slope) / g_scale)
            best_h = min(best_h, abs(d2 - curv) / h_scale)
        g_err, h_err = max(g_err, best_g), max(h_err, best_h)
    return FDReport(float(g_err), float(h_err), grad_tol, hess_tol, len(U), steps)


def with_corrupted_gradient(problem: Problem, perturbation: float = 1e-3, seed: int = 0) -> Problem:
    """A copy whose gradient is shifted by a fixed random vector of entrywise size ``perturbation``."""
    shift = perturbation * np.random.default_rng(seed).choice([-1.0, 1.0], problem.kind.ambient_dim)

    def evaluate(x):
        eu = problem.evaluate(x)
        return EuclideanDerivatives(eu.value, eu.grad + shift, eu.hess_vec)

    return replace(problem, evaluate=evaluate, label=f"{problem.label}|corrupted")

"""Benchmark objectives with ridable-saddle landscapes.

Every constructor returns a :class:`Problem`: a manifold kind plus callables
giving the value and the ambient (Euclidean) derivatives at a coordinate
vector. Maximization problems are negated so everything is a minimization.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import kernels
from .manifolds import (
    ComplexEuclidean,
    ComplexTorus,
    EuclideanDerivatives,
    Euclidean,
    ManifoldKind,
    ManifoldPoint,
    Oblique,
    Sphere,
    from_complex,
    quotient_distance,
    signed_permutation_distance,
    to_complex,
)

SYMMETRY_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SolutionSet:
    """Known minimizers, as representatives of their symmetry orbits."""

    points: tuple[np.ndarray, ...]
    quotient: str = "none"
    exact: bool = True

    def nearest(self, kind: ManifoldKind, x: np.ndarray) -> tuple[float, int]:
        best, arg = np.inf, -1
        for i, ref in enumerate(self.points):
            if self.quotient == "signed_permutation" and ref.size != x.size:
                d = signed_permutation_distance(x.reshape(-1, kind.block_size).T, ref)
            else:
                d = quotient_distance(kind, x, ref, self.quotient)
            if d < best:
                best, arg = d, i
        return best, arg

    def distance(self, kind: ManifoldKind, x: np.ndarray) -> float:
        return self.nearest(kind, x)[0]


@dataclass(frozen=True)
class RidabilityClaim:
    """Published (alpha, beta, gamma, delta) as expressions; numbers only where the
    expression carries no unknown constant."""

    alpha: str
    beta: str
    gamma: str
    delta: str
    values: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Problem:
    kind: ManifoldKind
    label: str
    value: Callable[[np.ndarray], float]
    evaluate: Callable[[np.ndarray], EuclideanDerivatives]
    solution_set: SolutionSet | None = None
    ridability_params: RidabilityClaim | None = None
    data: dict[str, Any] = field(default_factory=dict)
    batch_value: Callable[[np.ndarray], np.ndarray] | None = None

    def values(self, X: np.ndarray) -> np.ndarray:
        """Objective at each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.batch_value is not None:
            return self.batch_value(X)
        return np.array([self.value(x) for x in X])

    @property
    def optimal_value(self) -> float | None:
        return self.data.get("optimal_value")

    def point(self, coords) -> ManifoldPoint:
        return ManifoldPoint(self.kind, coords)


def _check_symmetric(M: np.ndarray, name: str, hermitian: bool = False) -> np.ndarray:
    M = np.asarray(M, dtype=complex if hermitian else float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    other = M.conj().T if hermitian else M.T
    gap = np.max(np.abs(M - other)) if M.size else 0.0
    if gap > SYMMETRY_TOL * max(1.0, np.max(np.abs(M))):
        kind = "Hermitian" if hermitian else "symmetric"
        raise ValueError(f"{name} is not {kind} (max deviation {gap:.3e})")
    return 0.5 * (M + other)


def _quadratic(kind: ManifoldKind, M: np.ndarray):
    """value/evaluate for f(x) = -x^T M x with symmetric M."""
    twoM = 2.0 * M

    def value(x):
        return -float(x @ (M @ x))

    def evaluate(x):
        Mx = M @ x
        return EuclideanDerivatives(-float(x @ Mx), -2.0 * Mx, lambda u: -(twoM @ u))

    def batch(X):
        return -np.einsum("ij,ij->i", X @ M, X)

    return value, evaluate, batch


# --------------------------------------------------------------------------- eigenvector


def eigenvector_problem(A) -> Problem:
    """Minimize ``-x^T A x`` over the unit sphere (top eigenvector)."""
    A = _check_symmetric(A, "A")
    n = A.shape[0]
    w, V = np.linalg.eigh(A)
    value, evaluate, batch = _quadratic(Sphere(n), A)
    scale = max(1.0, float(np.max(np.abs(w))))
    simple_top = n == 1 or (w[-1] - w[-2]) > 1e-12 * scale
    sol = SolutionSet((V[:, -1].copy(),), "sign") if simple_top else None
    claim = RidabilityClaim(
        alpha="c*(lam_1 - lam_2)",
        beta="c*(lam_1 - lam_2)/lam_max",
        gamma="c*(lam_1 - lam_2)",
        delta="2*c*(lam_1 - lam_2)/lam_max",
    )
    return Problem(
        Sphere(n), "eigenvector", value, evaluate, sol, claim,
        {"A": A, "eigenvalues": w, "eigenvectors": V, "optimal_value": -float(w[-1])},
        batch,
    )


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return (G + G.T) / np.sqrt(2.0)


# --------------------------------------------------------------------------- dictionary


def logcosh(t, mu):
    """Smooth surrogate ``mu * log cosh(t / mu)`` of ``|t|``, overflow-free."""
    a = np.abs(np.asarray(t, dtype=float)) / mu
    return mu * (a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0))


def dictionary_problem(Ybar, mu: float, solution_points=None) -> Problem:
    """Minimize ``(1/p) sum_k h_mu(q^T ybar_k)`` over the sphere.

    ``solution_points`` (columns) are recorded as the sign-symmetric
    minimizer representatives, flagged approximate.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    Y = np.asarray(Ybar, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ValueError("Ybar must be an n x p matrix with p >= 1")
    n = Y.shape[0]
    Yt = np.ascontiguousarray(Y.T)

    def value(q):
        return float(kernels.logcosh_mean(np.ascontiguousarray(q, dtype=float)[None, :], Yt, mu)[0])

    def evaluate(q):
        v, g, H = kernels.logcosh_derivatives(np.ascontiguousarray(q, dtype=float), Yt, mu)
        return EuclideanDerivatives(v, g, lambda u: H @ u)

    def batch(Q):
        return kernels.logcosh_mean(np.ascontiguousarray(Q, dtype=float), Yt, mu)

    sol = None
    if solution_points is not None:
        S = np.asarray(solution_points, dtype=float)
        sol = SolutionSet(tuple(S[:, i].copy() for i in range(S.shape[1])), "sign", exact=False)
    claim = RidabilityClaim("c*theta", "c*theta", "c*theta/mu", "sqrt(2)*mu/7",
                            {"delta": float(np.sqrt(2.0) * mu / 7.0)})
    return Problem(Sphere(n), "dictionary", value, evaluate, sol, claim,
                   {"Ybar": Y, "mu": mu}, batch)


def bernoulli_gaussian(n: int, p: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random((n, p)) < theta) * rng.standard_normal((n, p))


def planted_dictionary(n: int, p: int, theta: float, mu: float, seed: int) -> Problem:
    """Dictionary instance with ``Ybar = X0`` Bernoulli(theta)-Gaussian; minimizers near the e_i."""
    rng = np.random.default_rng(seed)
    X0 = bernoulli_gaussian(n, p, theta, rng)
    prob = dictionary_problem(X0, mu, solution_points=np.eye(n))
    prob.data.update(theta=theta, seed=seed)
    return prob


# --------------------------------------------------------------------------- phase retrieval


def phase_retrieval_problem(x_true, m: int, seed: int, real: bool = False) -> Problem:
    """Minimize ``(1/4m) sum_k (y_k^2 - |a_k^* z|^2)^2`` with ``y_k = |a_k^* x_true|``.

    Complex measurement vectors are i.i.d. standard complex Gaussian; with
    ``real=True`` everything is real (the 2-D landscape case).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    if real:
        x = np.asarray(x_true, dtype=float).reshape(-1)
        n = x.size
        Amat = rng.standard_normal((m, n))
        B = Amat
        C = np.zeros_like(B)
        kind: ManifoldKind = Euclidean(n)
        xc = x
        quotient = "sign"
    else:
        z = np.asarray(x_true, dtype=complex).reshape(-1)
        n = z.size
        Amat = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)
        # Re(a^* z) = b . x and Im(a^* z) = c . x in interleaved real coordinates
        B = np.column_stack([Amat.real, Amat.imag]).reshape(m, 2, n).transpose(0, 2, 1).reshape(m, 2 * n)
        C = np.column_stack([-Amat.imag, Amat.real]).reshape(m, 2, n).transpose(0, 2, 1).reshape(m, 2 * n)
        kind = ComplexEuclidean(n)
        xc = from_complex(z)
        quotient = "phase"
    ysq = (B @ xc) ** 2 + (C @ xc) ** 2

    def value(x):
        r = ysq - (B @ x) ** 2 - (C @ x) ** 2
        return float(r @ r) / (4.0 * m)

    def evaluate(x):
        beta, gam = B @ x, C @ x
        r = ysq - beta ** 2 - gam ** 2
        Vk = B * beta[:, None] + C * gam[:, None]
        grad = -(Vk.T @ r) / m
        H = (2.0 * (Vk.T @ Vk) - (B.T * r) @ B - (C.T * r) @ C) / m
        H = 0.5 * (H + H.T)
        return EuclideanDerivatives(float(r @ r) / (4.0 * m), grad, lambda u: H @ u)

    def batch(X):
        R = ysq[None, :] - (X @ B.T) ** 2 - (X @ C.T) ** 2
        return np.einsum("ij,ij->i", R, R) / (4.0 * m)

    claim = RidabilityClaim("c", "c/(n*log(m))", "c", "c/(n*log(m))")
    return Problem(
        kind, "phase_retrieval", value, evaluate, SolutionSet((xc.copy(),), quotient), claim,
        {"x_true": xc, "measurements": Amat, "y": np.sqrt(ysq), "optimal_value": 0.0, "seed": seed},
        batch,
    )


# --------------------------------------------------------------------------- tensor decomposition


def _check_orthonormal(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("components must form a square n x n matrix (one per column)")
    err = np.max(np.abs(A.T @ A - np.eye(A.shape[1])))
    if err > ORTHONORMAL_TOL:
        raise ValueError(f"components are not orthonormal (max error {err:.3e})")
    return A


def random_orthonormal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def tensor_single_problem(components) -> Problem:
    """Minimize ``-sum_i (a_i^T u)^4`` over the sphere."""
    A = _check_orthonormal(components)
    n = A.shape[0]

    def value(u):
        return -float(np.sum((A.T @ u) ** 4))

    def evaluate(u):
        c = A.T @ u
        c2 = c * c
        twelve_c2 = 12.0 * c2

        def hv(w):
            cw = A.T @ w
            return -(A @ (twelve_c2[:, None] * cw if cw.ndim == 2 else twelve_c2 * cw))

        return EuclideanDerivatives(-float(np.sum(c2 * c2)), -4.0 * (A @ (c2 * c)), hv)

    def batch(U):
        return -np.sum((U @ A) ** 4, axis=1)

    claim = RidabilityClaim("7/n", "1/poly(n)", "3", "1/poly(n)", {"alpha": 7.0 / n, "gamma": 3.0})
    sol = SolutionSet(tuple(A[:, i].copy() for i in range(n)), "sign")
    return Problem(Sphere(n), "tensor_single", value, evaluate, sol, claim,
                   {"components": A, "optimal_value": -1.0}, batch)


def deflate(components_found: list[np.ndarray], n: int) -> np.ndarray:
    """Orthonormal basis of the complement of the recovered components."""
    if not components_found:
        return np.eye(n)
    F = np.column_stack(components_found)
    U, _, _ = np.linalg.svd(F, full_matrices=True)
    return U[:, F.shape[1]:]


def restrict_to_subspace(problem: Problem, B: np.ndarray) -> Problem:
    """The problem ``v -> f(B v)`` on the unit sphere of ``range(B)``.

    ``B`` has orthonormal columns and the parent must live on a sphere.
    """
    if not isinstance(problem.kind, Sphere):
        raise ValueError("subspace restriction needs a sphere problem")
    B = np.asarray(B, dtype=float)
    k = B.shape[1]

    def value(v):
        return problem.value(B @ v)

    def evaluate(v):
        eu = problem.evaluate(B @ v)
        return EuclideanDerivatives(eu.value, B.T @ eu.grad, lambda u: B.T @ eu.hess_vec(B @ u))

    def batch(V):
        return problem.values(V @ B.T)

    sol = None
    if problem.solution_set is not None:
        # keep the representatives that lie (numerically) inside range(B)
        kept = tuple(B.T @ p for p in problem.solution_set.points
                     if p.size == B.shape[0] and np.linalg.norm(B.T @ p) > 1.0 - 1e-6)
        if kept:
            sol = SolutionSet(tuple(p / np.linalg.norm(p) for p in kept), problem.solution_set.quotient,
                              problem.solution_set.exact)
    return Problem(Sphere(k), f"{problem.label}|restricted", value, evaluate, sol,
                   problem.ridability_params, {"basis": B, "parent": problem.label}, batch)


def tensor_joint_problem(components, r: int) -> Problem:
    """Minimize ``sum_{i != j} sum_k (a_k^T u_i)^2 (a_k^T u_j)^2`` over Oblique(n, r)."""
    A = _check_orthonormal(components)
    n = A.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    kind = Oblique(n, r)

    def unpack(x):
        return x.reshape(r, n).T

    def value(x):
        S = (A.T @ unpack(x)) ** 2
        s = S.sum(axis=1)
        return float(s @ s - np.sum(S * S))

    def evaluate(x):
        M = A.T @ unpack(x)
        S = M * M
        s = S.sum(axis=1)
        val = float(s @ s - np.sum(S * S))
        G = 4.0 * M * (s[:, None] - S)
        grad = (A @ G).T.reshape(-1)

        def hv_one(v):
            N = A.T @ unpack(v)
            MN = M * N
            dG = 4.0 * N * (s[:, None] - S) + 4.0 * M * (2.0 * MN.sum(axis=1)[:, None] - 2.0 * MN)
            return (A @ dG).T.reshape(-1)

        def hv(v):
            if v.ndim == 1:
                return hv_one(v)
            return np.column_stack([hv_one(v[:, k]) for k in range(v.shape[1])])

        return EuclideanDerivatives(val, grad, hv)

    sol = SolutionSet((A.copy(),), "signed_permutation")
    claim = RidabilityClaim("1/poly(n)", "1/poly(n)", "1", "1/poly(n)", {"gamma": 1.0})
    return Problem(kind, "tensor_joint", value, evaluate, sol, claim,
                   {"components": A, "r": r, "optimal_value": 0.0})


# --------------------------------------------------------------------------- synchronization


def hermitian_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with i.i.d. standard complex Gaussian upper triangle and real N(0,1) diagonal."""
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    D = np.triu(G, 1)
    return D + D.conj().T + np.diag(rng.standard_normal(n))


def _real_embedding(C: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix R with Re(x^* C x) = X^T R X for interleaved X."""
    n = C.shape[0]
    R = np.empty((2 * n, 2 * n))
    R[0::2, 0::2] = C.real
    R[1::2, 1::2] = C.real
    R[0::2, 1::2] = -C.imag
    R[1::2, 0::2] = C.imag
    return R


def phase_sync_problem(z_true, noise, sigma: float) -> Problem:
    """Minimize ``-x^* C x`` over unit-modulus vectors, ``C = z z^* + sigma * noise``."""
    z = np.asarray(z_true, dtype=complex).reshape(-1)
    if np.max(np.abs(np.abs(z) - 1.0)) > 1e-12:
        raise ValueError("z_true entries must have unit modulus")
    noise = _check_symmetric(noise, "noise", hermitian=True)
    n = z.size
    C = np.outer(z, z.conj()) + sigma * noise
    R = _real_embedding(C)
    kind = ComplexTorus(n)
    value, evaluate, batch = _quadratic(kind, R)
    sol = SolutionSet((from_complex(z),), "phase") if sigma == 0 else None
    data = {"C": C, "z_true": z, "sigma": sigma}
    if sigma == 0:
        data["optimal_value"] = -float(n * n)
    return Problem(kind, "phase_sync", value, evaluate, sol, None, data, batch)


def sync_correlation(z_true: np.ndarray, coords: np.ndarray) -> float:
    """|z^* x| / n for a ComplexTorus point."""
    return float(abs(np.vdot(z_true, to_complex(coords)))) / z_true.size


def z2_sync_problem(z_true, noise, sigma: float) -> Problem:
    """Minimize ``-trace(W^T C W)`` over W in R^{n x 2} with unit rows.

    The point is stored as Oblique(2, n), i.e. ``W^T`` with unit columns, so the
    coordinates are the rows of ``W`` concatenated.
    """
    z = np.asarray(z_true, dtype=float).reshape(-1)
    if not np.all(np.abs(z) == 1.0):
        raise ValueError("z_true entries must be +1 or -1")
    noise = _check_symmetric(noise, "noise")
    n = z.size
    C = np.outer(z, z) + sigma * noise
    kind = Oblique(2, n)

    def value(x):
        W = x.reshape(n, 2)
        return -float(np.sum(W * (C @ W)))

    def hv(u):
        if u.ndim == 1:
            return -2.0 * (C @ u.reshape(n, 2)).reshape(-1)
        k = u.shape[1]
        return -2.0 * np.einsum("ij,jak->iak", C, u.reshape(n, 2, k)).reshape(2 * n, k)

    def evaluate(x):
        W = x.reshape(n, 2)
        CW = C @ W
        return EuclideanDerivatives(-float(np.sum(W * CW)), -2.0 * CW.reshape(-1), hv)

    def batch(X):
        Ws = X.reshape(X.shape[0], n, 2)
        return -np.einsum("gia,ij,gja->g", Ws, C, Ws)

    sol = None
    data = {"C": C, "z_true": z, "sigma": sigma}
    if sigma == 0:
        sol = SolutionSet((np.column_stack([z, np.zeros(n)]).reshape(-1),), "rotation")
        data["optimal_value"] = -float(n * n)
    return Problem(kind, "z2_sync", value, evaluate, sol, None, data, batch)


def round_z2(coords: np.ndarray) -> np.ndarray:
    """Round unit rows w_i to signs along the dominant direction of W."""
    W = np.asarray(coords, dtype=float).reshape(-1, 2)
    _, _, Vt = np.linalg.svd(W, full_matrices=False)
    proj = W @ Vt[0]
    return np.where(proj >= 0.0, 1.0, -1.0)


# --------------------------------------------------------------------------- 2-D saddles


def fig1_fixtures() -> tuple[Problem, Problem]:
    """``x^2 - y^2`` (ridable saddle at 0) and ``x^3 - y^3`` (degenerate saddle at 0)."""
    D_quad = np.diag([2.0, -2.0])

    def quad_value(x):
        return float(x[0] ** 2 - x[1] ** 2)

    def quad_eval(x):
        return EuclideanDerivatives(quad_value(x), np.array([2.0 * x[0], -2.0 * x[1]]), lambda u: D_quad @ u)

    def cubic_value(x):
        return float(x[0] ** 3 - x[1] ** 3)

    def cubic_eval(x):
        H = np.diag([6.0 * x[0], -6.0 * x[1]])
        return EuclideanDerivatives(cubic_value(x), np.array([3.0 * x[0] ** 2, -3.0 * x[1] ** 2]), lambda u: H @ u)

    quad = Problem(Euclidean(2), "saddle_quadratic", quad_value, quad_eval,
                   batch_value=lambda X: X[:, 0] ** 2 - X[:, 1] ** 2)
    cubic = Problem(Euclidean(2), "saddle_cubic", cubic_value, cubic_eval,
                    batch_value=lambda X: X[:, 0] ** 3 - X[:, 1] ** 3)
    return quad, cubic


def random_unit_complex(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))

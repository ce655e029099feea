"""Embedded manifolds used by the trust-region solver.

All points and tangent vectors are flat real arrays of ambient coordinates.
Complex vectors are stored interleaved ``(re_0, im_0, re_1, im_1, ...)``.
An ``Oblique(n, p)`` point is an ``n x p`` matrix with unit columns stored
column-stacked (``vec(W)``), so every constrained kind is a product of unit
spheres occupying contiguous coordinate blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FEASIBILITY_TOL = 1e-10
TANGENCY_TOL = 1e-10

QUOTIENTS = ("none", "sign", "phase", "signed_permutation", "rotation")


class ManifoldKind:
    """Base class for the five supported manifold families."""

    #: number of unit-sphere factors (0 for unconstrained kinds)
    n_blocks: int = 0
    #: ambient size of each sphere factor
    block_size: int = 0

    @property
    def ambient_dim(self) -> int:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.ambient_dim - self.n_blocks

    @property
    def is_complex(self) -> bool:
        return False

    # array-level primitives; ``v`` may be (D,) or (D, k)

    def constraint_residual(self, x: np.ndarray) -> float:
        return 0.0

    def project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.array(v, dtype=float, copy=True)

    def retract(self, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        return x + d

    def weingarten(self, x: np.ndarray, egrad: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Curvature correction added to the projected ambient Hessian."""
        return np.zeros_like(u, dtype=float)

    def basis(self, x: np.ndarray) -> np.ndarray:
        return np.eye(self.ambient_dim)

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(self.ambient_dim)

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """A unit-norm tangent vector drawn from the isotropic measure on T_x M."""
        if self.dim == 0:
            raise ValueError(f"{self} has a zero-dimensional tangent space")
        while True:
            u = self.project(x, rng.standard_normal(self.ambient_dim))
            nu = np.linalg.norm(u)
            if nu > 1e-8:
                return u / nu


class _SphereProduct(ManifoldKind):
    """Product of ``n_blocks`` unit spheres living in R^block_size."""

    @property
    def ambient_dim(self) -> int:
        return self.n_blocks * self.block_size

    def _split(self, a: np.ndarray) -> np.ndarray:
        return a.reshape((self.n_blocks, self.block_size) + a.shape[1:])

    def constraint_residual(self, x):
        norms = np.linalg.norm(self._split(x), axis=1)
        return float(np.max(np.abs(norms - 1.0)))

    def project(self, x, v):
        v = np.asarray(v, dtype=float)
        xb = self._split(x)
        vb = self._split(v)
        if v.ndim == 1:
            coef = np.einsum("ij,ij->i", xb, vb)
            out = vb - xb * coef[:, None]
        else:
            coef = np.einsum("ij,ijk->ik", xb, vb)
            out = vb - xb[:, :, None] * coef[:, None, :]
        return out.reshape(v.shape)

    def retract(self, x, d):
        xb = self._split(x)
        db = self._split(d)
        moved = np.any(db != 0.0, axis=1)
        yb = xb.copy()
        # untouched blocks stay bit-identical
        if np.any(moved):
            z = xb[moved] + db[moved]
            yb[moved] = z / np.linalg.norm(z, axis=1, keepdims=True)
        return yb.reshape(-1)

    def weingarten(self, x, egrad, u):
        coef = np.einsum("ij,ij->i", self._split(x), self._split(egrad))
        ub = self._split(np.asarray(u, dtype=float))
        if u.ndim == 1:
            out = -coef[:, None] * ub
        else:
            out = -coef[:, None, None] * ub
        return out.reshape(u.shape)

    def basis(self, x):
        bs = self.block_size
        U = np.zeros((self.ambient_dim, self.n_blocks * (bs - 1)))
        for b, xb in enumerate(self._split(x)):
            U[b * bs:(b + 1) * bs, b * (bs - 1):(b + 1) * (bs - 1)] = _householder_complement(xb)
        return U

    def random_point(self, rng, scale=1.0):
        g = self._split(rng.standard_normal(self.ambient_dim))
        return (g / np.linalg.norm(g, axis=1, keepdims=True)).reshape(-1)


def _householder_complement(x: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of unit vector ``x``.

    Columns 2..n of the Householder reflector sending ``x`` to ``-sign(x_0) e_0``.
    """
    n = x.shape[0]
    v = x.copy()
    v[0] += 1.0 if x[0] >= 0.0 else -1.0
    H = np.eye(n) - (2.0 / (v @ v)) * np.outer(v, v)
    return H[:, 1:]


@dataclass(frozen=True)
class Sphere(_SphereProduct):
    """Unit sphere S^{n-1} in R^n."""

    n: int

    @property
    def n_blocks(self):
        return 1

    @property
    def block_size(self):
        return self.n


@dataclass(frozen=True)
class Oblique(_SphereProduct):
    """``n x p`` matrices with unit-norm columns, stored as ``vec(W)``."""

    n: int
    p: int

    @property
    def n_blocks(self):
        return self.p

    @property
    def block_size(self):
        return self.n

    def as_matrix(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(self.p, self.n).T

    def from_matrix(self, W: np.ndarray) -> np.ndarray:
        return np.asarray(W, dtype=float).T.reshape(-1).copy()


@dataclass(frozen=True)
class ComplexTorus(_SphereProduct):
    """Unit-modulus vectors in C^n, stored as 2n interleaved reals."""

    n: int

    @property
    def n_blocks(self):
        return self.n

    @property
    def block_size(self):
        return 2

    @property
    def is_complex(self):
        return True


@dataclass(frozen=True)
class Euclidean(ManifoldKind):
    """R^n."""

    n: int

    @property
    def ambient_dim(self):
        return self.n


@dataclass(frozen=True)
class ComplexEuclidean(ManifoldKind):
    """C^n stored as 2n interleaved reals."""

    n: int

    @property
    def ambient_dim(self):
        return 2 * self.n

    @property
    def is_complex(self):
        return True


def to_complex(coords: np.ndarray) -> np.ndarray:
    c = np.asarray(coords, dtype=float).reshape(-1, 2)
    return c[:, 0] + 1j * c[:, 1]


def from_complex(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.column_stack([z.real, z.imag]).reshape(-1)


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    kind: ManifoldKind
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape[0] != self.kind.ambient_dim:
            raise ValueError(
                f"expected {self.kind.ambient_dim} coordinates for {self.kind}, got {coords.shape[0]}"
            )
        if not np.all(np.isfinite(coords)):
            raise ValueError("point has non-finite coordinates")
        resid = self.kind.constraint_residual(coords)
        if resid > FEASIBILITY_TOL:
            raise ValueError(f"point is not on {self.kind} (constraint residual {resid:.3e})")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: ManifoldPoint
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape[0] != self.base.kind.ambient_dim:
            raise ValueError("tangent vector dimension does not match its base point")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True, eq=False)
class EuclideanDerivatives:
    """Value, ambient gradient and ambient Hessian-vector product at a point.

    ``hess_vec`` accepts either a single ambient vector or a ``(D, k)`` block of
    column vectors.
    """

    value: float
    grad: np.ndarray
    hess_vec: Callable[[np.ndarray], np.ndarray]


def _ambient(x: ManifoldPoint, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        v = v.coords
    v = np.asarray(v, dtype=float)
    if v.shape[0] != x.kind.ambient_dim:
        raise ValueError(f"vector has dimension {v.shape[0]}, expected {x.kind.ambient_dim}")
    return v


def project_tangent(x: ManifoldPoint, v) -> TangentVector:
    """Orthogonal projection of an ambient vector onto T_x M."""
    return TangentVector(x, x.kind.project(x.coords, _ambient(x, v).reshape(-1)))


def retract(x: ManifoldPoint, d) -> ManifoldPoint:
    """Metric-projection retraction R_x(d)."""
    if isinstance(d, TangentVector) and d.base is not x and not np.array_equal(d.base.coords, x.coords):
        raise ValueError("tangent vector is based at a different point")
    return ManifoldPoint(x.kind, x.kind.retract(x.coords, _ambient(x, d)))


def riemannian_grad(x: ManifoldPoint, eu: EuclideanDerivatives) -> TangentVector:
    return TangentVector(x, x.kind.project(x.coords, _ambient(x, eu.grad)))


def riemannian_hess_vec(x: ManifoldPoint, eu: EuclideanDerivatives, u) -> TangentVector:
    """Riemannian Hessian applied to a tangent vector ``u``.

    Projected ambient Hessian plus the Weingarten correction
    ``-<x_b, egrad_b> u_b`` on each sphere factor.
    """
    u = _ambient(x, u).reshape(-1)
    resid = np.linalg.norm(x.kind.project(x.coords, u) - u)
    if resid > TANGENCY_TOL * max(1.0, np.linalg.norm(u)):
        raise ValueError(f"vector is not tangent at x (normal component {resid:.3e})")
    return TangentVector(x, hess_apply(x.kind, x.coords, eu, u))


def hess_apply(kind: ManifoldKind, x: np.ndarray, eu: EuclideanDerivatives, u: np.ndarray) -> np.ndarray:
    """Array-level Riemannian Hessian on tangent vector(s) ``u`` (no checks)."""
    return kind.project(x, eu.hess_vec(u)) + kind.weingarten(x, eu.grad, u)


def tangent_basis(x: ManifoldPoint) -> np.ndarray:
    """Orthonormal basis of T_x M as the columns of an ambient x dim matrix."""
    return x.kind.basis(x.coords)


def distance(x: ManifoldPoint, y: ManifoldPoint, quotient: str = "none") -> float:
    """Ambient distance between ``x`` and ``y``, optionally modulo a symmetry.

    ``quotient`` is one of ``none``, ``sign``, ``phase`` (global unit complex
    factor), ``signed_permutation`` (columns of an oblique point) or
    ``rotation`` (global orthogonal transform acting on the columns' space).
    """
    if x.kind != y.kind:
        raise ValueError(f"kind mismatch: {x.kind} vs {y.kind}")
    return quotient_distance(x.kind, x.coords, y.coords, quotient)


def quotient_distance(kind: ManifoldKind, x: np.ndarray, y: np.ndarray, quotient: str) -> float:
    if quotient == "none":
        return float(np.linalg.norm(x - y))
    if quotient == "sign":
        return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))
    if quotient == "phase":
        if not kind.is_complex:
            return quotient_distance(kind, x, y, "sign")
        zx, zy = to_complex(x), to_complex(y)
        inner = np.vdot(zy, zx)
        phase = inner / abs(inner) if inner != 0 else 1.0
        return float(np.linalg.norm(zx - zy * phase))
    if quotient == "signed_permutation":
        X = x.reshape(-1, kind.block_size).T
        Y = y.reshape(-1, kind.block_size).T
        return signed_permutation_distance(X, Y)
    if quotient == "rotation":
        X = x.reshape(-1, kind.block_size).T
        Y = y.reshape(-1, kind.block_size).T
        return orthogonal_procrustes_distance(X, Y)
    raise ValueError(f"unknown quotient {quotient!r}; expected one of {QUOTIENTS}")


def signed_permutation_distance(X: np.ndarray, Y: np.ndarray) -> float:
    """min over signed column selections of ||X - Y P S||_F, by greedy matching.

    ``Y`` may have more columns than ``X``; each column of ``X`` is matched to a
    distinct column of ``Y``.
    """
    p, q = X.shape[1], Y.shape[1]
    if q < p:
        raise ValueError("reference has fewer columns than the point")
    corr = np.abs(X.T @ Y)
    match = np.empty(p, dtype=int)
    free_rows = np.ones(p, dtype=bool)
    free_cols = np.ones(q, dtype=bool)
    for _ in range(p):
        masked = np.where(free_rows[:, None] & free_cols[None, :], corr, -np.inf)
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        match[i] = j
        free_rows[i] = False
        free_cols[j] = False
    Ym = Y[:, match]
    signs = np.where(np.einsum("ij,ij->j", X, Ym) < 0.0, -1.0, 1.0)
    return float(np.linalg.norm(X - Ym * signs))


def orthogonal_procrustes_distance(X: np.ndarray, Y: np.ndarray) -> float:
    """min over orthogonal Q of ||X - Q Y||_F."""
    U, _, Vt = np.linalg.svd(X @ Y.T)
    return float(np.linalg.norm(X - (U @ Vt) @ Y))

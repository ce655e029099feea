"""Exact solver for the Euclidean trust-region subproblem

    min  <xi, g> + 1/2 <H xi, xi>   subject to  ||xi|| <= radius

via a dense eigendecomposition of ``H`` and a safeguarded Newton iteration on
the secular equation ``1/||xi(lam)|| - 1/radius = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12
HARD_CASE_TOL = 1e-10
SECULAR_TOL = 1e-10
_MAX_SECULAR_ITERS = 200


@dataclass(frozen=True, eq=False)
class TRSubproblem:
    g: np.ndarray
    H: np.ndarray
    radius: float

    def __post_init__(self):
        g = np.array(self.g, dtype=float).reshape(-1)
        H = np.array(self.H, dtype=float)
        if H.shape != (g.size, g.size):
            raise ValueError(f"H has shape {H.shape}, expected {(g.size, g.size)}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise ValueError("subproblem data contain non-finite entries")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        asym = np.max(np.abs(H - H.T)) if H.size else 0.0
        if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(H)) if H.size else 0.0):
            raise ValueError(f"H is not symmetric (max asymmetry {asym:.3e})")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True, eq=False)
class TRSolution:
    xi: np.ndarray
    model_decrease: float
    on_boundary: bool
    multiplier: float
    hard_case: bool


def model_value(p: TRSubproblem, xi) -> float:
    """Model change relative to the base value: <xi, g> + 1/2 xi^T H xi."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != p.g.shape:
        raise ValueError(f"xi has dimension {xi.size}, expected {p.g.size}")
    return float(xi @ p.g + 0.5 * xi @ (p.H @ xi))


def solve_exact(p: TRSubproblem, eig: tuple[np.ndarray, np.ndarray] | None = None) -> TRSolution:
    """Global minimizer of the quadratic model over the ball.

    Parameters
    ----------
    p : TRSubproblem
    eig : (eigenvalues, eigenvectors), optional
        A precomputed ``numpy.linalg.eigh(p.H)``.

    Notes
    -----
    In the hard case (gradient orthogonal to the leftmost eigenspace) the
    boundary is reached by adding a multiple of a leftmost eigenvector; the
    sign is chosen so that ``<xi, g> <= 0``, ties going to the
    lexicographically smaller vector.
    """
    d = p.g.size
    if d == 0:
        return TRSolution(np.zeros(0), 0.0, False, 0.0, False)
    sigma, V = eig if eig is not None else np.linalg.eigh(p.H)
    gamma = V.T @ p.g
    radius = p.radius
    gnorm = float(np.linalg.norm(p.g))
    scale = float(np.max(np.abs(sigma)))
    eps = 10.0 * d * np.finfo(float).eps * scale

    smin = float(sigma[0])
    leftmost = sigma <= smin + eps
    # also degenerate when the secular shift |gamma_1| / radius is below the
    # resolution of the spectrum: the root would not be representable
    degenerate_g = float(np.linalg.norm(gamma[leftmost])) <= max(HARD_CASE_TOL * gnorm, eps * radius)
    # gradient with its (numerically zero) leftmost-eigenspace part removed
    gamma_eff = np.where(leftmost, 0.0, gamma) if degenerate_g else gamma

    def coefficients(lam, gam):
        coef = np.zeros_like(gam)
        nz = gam != 0.0
        coef[nz] = -gam[nz] / (sigma[nz] + lam)
        return coef

    if smin > eps:
        coef = coefficients(0.0, gamma)
        if np.linalg.norm(coef) <= radius:
            return _finish(coef, V, sigma, gamma, radius, 0.0, False, False)
    elif smin >= -eps and degenerate_g:
        # singular PSD with g in the range of H: minimum-norm Newton step
        coef = coefficients(0.0, np.where(sigma <= eps, 0.0, gamma))
        if np.linalg.norm(coef) <= radius:
            return _finish(coef, V, sigma, gamma, radius, 0.0, False, False)

    if smin <= eps and degenerate_g:
        lam = max(0.0, -smin)
        coef = coefficients(lam, gamma_eff)
        pn = float(np.linalg.norm(coef))
        if pn < radius:
            tau = np.sqrt(max(radius * radius - pn * pn, 0.0))
            plus, minus = coef.copy(), coef.copy()
            plus[0] += tau
            minus[0] -= tau
            coef = _tie_break(plus, minus, V, p.g, tau * gnorm)
            return _finish(coef, V, sigma, gamma, radius, lam, True, True)

    lam = _secular_root(sigma, gamma_eff, radius, smin, gnorm, eps)
    coef = coefficients(lam, gamma_eff)
    return _finish(coef, V, sigma, gamma, radius, lam, True, False)


def _tie_break(a, b, V, g, slope_scale):
    xa, xb = V @ a, V @ b
    ga, gb = xa @ g, xb @ g
    if abs(ga - gb) > 4.0 * HARD_CASE_TOL * slope_scale:
        return a if ga < gb else b
    tol = 1e-12 * max(np.max(np.abs(xa)), np.max(np.abs(xb)))
    for u, v in zip(xa, xb):
        if abs(u - v) > tol:
            return a if u < v else b
    return a


def _secular_root(sigma, gamma, radius, smin, gnorm, eps):
    """Root in lam of 1/||xi(lam)|| = 1/radius on (max(0, -smin), inf)."""
    nz = gamma != 0.0
    g2 = gamma[nz] ** 2
    sig = sigma[nz]
    lo = max(0.0, -smin)
    hi = max(lo, gnorm / radius - smin) + eps + 1e-300

    def norm_and_slope(lam):
        denom = sig + lam
        with np.errstate(divide="ignore", invalid="ignore"):
            q = g2 / (denom * denom)
            n2 = float(np.sum(q))
            d2 = float(np.sum(q / denom))
        return np.sqrt(n2), d2

    # ||xi(0)|| > radius is known when smin > 0, so start there; otherwise inside the bracket
    lam = 0.0 if smin > eps else lo + max(1e-12 * max(abs(lo), 1.0), (hi - lo) * 1e-6)
    for _ in range(_MAX_SECULAR_ITERS):
        nrm, d2 = norm_and_slope(lam)
        if not np.isfinite(nrm) or nrm > radius:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        if np.isfinite(nrm) and abs(nrm - radius) <= SECULAR_TOL * radius:
            return lam
        if np.isfinite(nrm) and nrm > 0 and d2 > 0:
            phi = 1.0 / nrm - 1.0 / radius
            dphi = d2 / nrm ** 3
            nxt = lam - phi / dphi
        else:
            nxt = np.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if nxt == lam:
            return lam
        lam = nxt
    return lam


def _finish(coef, V, sigma, gamma, radius, lam, on_boundary, hard_case):
    xi = V @ coef
    nrm = float(np.linalg.norm(xi))
    if nrm > radius:
        # secular termination tolerance can leave us a hair outside
        coef = coef * (radius / nrm)
        xi = V @ coef
    decrease = -(float(gamma @ coef) + 0.5 * float(np.sum(sigma * coef * coef)))
    return TRSolution(
        xi=xi,
        model_decrease=max(decrease, 0.0),
        on_boundary=on_boundary,
        multiplier=float(lam),
        hard_case=hard_case,
    )

"""Objective values tabulated over 2-D charts, for landscape figures.

Two charts are supported: spherical angles on S^2 (azimuth in [0, 2 pi),
inclination sampled at cell centres of [0, pi]) and a square patch of the
real plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifolds import Euclidean, ManifoldPoint, Sphere
from .problems import Problem
from .ridability import grid_local_minima, spherical_angles, spherical_points
from .solver import TRConfig, minimize

CHARTS = ("sphere_angles", "plane")
BASIN_TOL = 1e-6


@dataclass(eq=False)
class LandscapeGrid:
    """``values[i, j]`` is f at ``(param1[j], param2[i])``."""

    chart: str
    param1: np.ndarray
    param2: np.ndarray
    values: np.ndarray
    critical_points: list = field(default_factory=list)

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        if self.values.shape != (self.param2.size, self.param1.size):
            raise ValueError(f"values have shape {self.values.shape}, expected {(self.param2.size, self.param1.size)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("landscape values must be finite")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.param1.size, self.param2.size

    def point(self, i: int, j: int) -> np.ndarray:
        """Ambient coordinates of grid node (row ``i``, column ``j``)."""
        return chart_point(self.chart, self.param1[j], self.param2[i])

    def local_minima(self) -> np.ndarray:
        if self.chart == "sphere_angles":
            return grid_local_minima(self.values)
        return plane_local_minima(self.values)


def chart_point(chart: str, p1: float, p2: float) -> np.ndarray:
    if chart == "sphere_angles":
        return np.array([np.sin(p2) * np.cos(p1), np.sin(p2) * np.sin(p1), np.cos(p2)])
    return np.array([p1, p2], dtype=float)


def plane_local_minima(F: np.ndarray) -> np.ndarray:
    """Indices of values no larger than any of their (up to 8) neighbors."""
    padded = np.pad(F, 1, constant_values=np.inf)
    mask = np.ones_like(F, dtype=bool)
    rows, cols = F.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                mask &= F <= padded[1 + di:1 + di + rows, 1 + dj:1 + dj + cols]
    return np.argwhere(mask)


def sphere_landscape(problem: Problem, n_azimuth: int, n_inclination: int) -> LandscapeGrid:
    if problem.kind != Sphere(3):
        raise ValueError(f"the spherical chart needs a problem on Sphere(3), got {problem.kind}")
    if n_azimuth < 2 or n_azimuth % 2 or n_inclination < 1:
        raise ValueError("need an even azimuth count >= 2 and at least one inclination")
    phi, theta = spherical_angles(n_azimuth, n_inclination)
    F = problem.values(spherical_points(n_azimuth, n_inclination)).reshape(n_inclination, n_azimuth)
    return LandscapeGrid("sphere_angles", phi, theta, F)


def plane_landscape(problem: Problem, extent: float, n1: int, n2: int | None = None) -> LandscapeGrid:
    if problem.kind != Euclidean(2):
        raise ValueError(f"the plane chart needs a problem on Euclidean(2), got {problem.kind}")
    n2 = n1 if n2 is None else n2
    if extent <= 0 or n1 < 1 or n2 < 1:
        raise ValueError("need a positive extent and positive grid sizes")
    a = np.linspace(-extent, extent, n1)
    b = np.linspace(-extent, extent, n2)
    P1, P2 = np.meshgrid(a, b)
    F = problem.values(np.column_stack([P1.ravel(), P2.ravel()])).reshape(n2, n1)
    return LandscapeGrid("plane", a, b, F)


def mark_critical_points(problem: Problem, grid: LandscapeGrid, cfg: TRConfig | None = None) -> list[dict]:
    """Polish each grid local minimum with the solver and record what it reached.

    Grid minima whose polished points agree to ``BASIN_TOL`` share a ``basin``
    index (several grid cells near a pole can drain into one minimizer).
    """
    step = float(np.max(np.diff(grid.param1))) if grid.param1.size > 1 else 0.1
    cfg = cfg or TRConfig(delta0=step)
    marks = []
    basins: list[np.ndarray] = []
    for i, j in grid.local_minima():
        x0 = grid.point(int(i), int(j))
        x, trace = minimize(problem, ManifoldPoint(problem.kind, x0), cfg)
        final = trace.final
        c = np.asarray(x.coords)
        basin = next((b for b, y in enumerate(basins) if np.linalg.norm(c - y) < BASIN_TOL), None)
        if basin is None:
            basins.append(c)
            basin = len(basins) - 1
        marks.append({
            "row": int(i),
            "col": int(j),
            "param1": float(grid.param1[j]),
            "param2": float(grid.param2[i]),
            "f_grid": float(grid.values[i, j]),
            "grid_coords": x0.tolist(),
            "polished_coords": np.asarray(x.coords).tolist(),
            "f": final.f,
            "grad_norm": final.grad_norm,
            "lambda_min": final.lambda_min,
            "status": trace.status.value,
            "basin": basin,
        })
    grid.critical_points = marks
    return marks

"""Closed-form initial-data generators.

Each generator takes the grid, its keyword parameters and a seeded RNG and
returns a ``(ny, nx)`` array.  Every generator also accepts ``mass``, which
rescales the result to that integral.
"""
from __future__ import annotations

import numpy as np

from ..mesh import Grid
from .snapshot import read_snapshot

# name -> (required keys, optional keys with defaults)
SCHEMAS: dict[str, tuple[tuple[str, ...], dict]] = {
    "constant": (("value",), {}),
    "cosine-bump": (("amplitude",), {"base": 0.0, "center": None, "radius": 0.25}),
    "gaussian-bump": ((), {"amplitude": 1.0, "base": 0.0, "center": None, "width": 0.1}),
    "random-cosine": (("base",), {"amplitude": 1.0, "modes": 8}),
    "from-snapshot": (("path",), {"amplitude": None}),
}
COMMON = {"mass": None}


def _center(grid: Grid, center):
    if center is None:
        return 0.5 * grid.lx, 0.5 * grid.ly
    return float(center[0]), float(center[1])


def _radius2(grid: Grid, center):
    X, Y = grid.centers()
    cx, cy = _center(grid, center)
    return (X - cx) ** 2 + (Y - cy) ** 2


def constant(grid, rng, value):
    return np.full(grid.shape, float(value))


def cosine_bump(grid, rng, amplitude, base, center, radius):
    r = np.sqrt(_radius2(grid, center))
    bump = np.where(r < radius, 0.5 * (1.0 + np.cos(np.pi * r / radius)), 0.0)
    return base + amplitude * bump


def gaussian_bump(grid, rng, amplitude, base, center, width):
    return base + amplitude * np.exp(-_radius2(grid, center) / (2.0 * width**2))


def random_cosine(grid, rng, base, amplitude, modes):
    """``base + amplitude·φ/max|φ|`` with φ a random cosine series of up to ``modes`` modes per axis."""
    k = np.arange(1, modes + 1)
    X, Y = grid.centers()
    cx = np.cos(np.pi * np.outer(k, X[0]) / grid.lx)
    cy = np.cos(np.pi * np.outer(k, Y[:, 0]) / grid.ly)
    coef = rng.standard_normal((modes, modes)) / (k[:, None] + k[None, :])
    phi = cy.T @ coef @ cx
    return base + amplitude * phi / np.max(np.abs(phi))


def from_snapshot(grid, rng, path, amplitude):
    f = read_snapshot(path)
    if f.grid != grid:
        raise ValueError(f"snapshot grid {f.grid} does not match configured grid {grid}")
    vals = f.values.copy()
    if amplitude is not None:
        vals *= amplitude / np.max(np.abs(vals))
    return vals


_FUNCS = {
    "constant": constant,
    "cosine-bump": cosine_bump,
    "gaussian-bump": gaussian_bump,
    "random-cosine": random_cosine,
    "from-snapshot": from_snapshot,
}


def materialize(spec: dict, grid: Grid, seed: int) -> np.ndarray:
    """Evaluate a validated generator spec (``kind`` plus its keys) on ``grid``."""
    kind = spec["kind"]
    kwargs = {k: v for k, v in spec.items() if k not in ("kind", "mass")}
    vals = _FUNCS[kind](grid, np.random.default_rng(seed), **kwargs)
    if spec.get("mass") is not None:
        total = grid.cell_area * float(np.sum(vals))
        if total == 0:
            raise ValueError("cannot rescale a zero-mass field")
        vals = vals * (spec["mass"] / total)
    return vals

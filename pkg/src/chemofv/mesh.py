"""Cell-centered rectangular grids and zero-flux finite-volume operators.

Arrays are stored with shape ``(ny, nx)``: row index ``j`` runs along y and
column index ``i`` along x, so ``values.ravel()`` is row-major with x fastest.
Face arrays follow the same convention: x-faces have shape ``(ny, nx + 1)``
and y-faces ``(ny + 1, nx)``.  Boundary faces always carry zero flux.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FieldError(ValueError):
    """Raised for malformed or non-finite fields."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx, ny must be integers")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 cells per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("side lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates ``(X, Y)`` as ``(ny, nx)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def constant(self, c: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(c)))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.nx * factor, self.ny * factor, self.lx, self.ly)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per cell of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1 and vals.size == self.grid.nx * self.grid.ny:
            vals = vals.reshape(self.grid.shape)
        if vals.shape != self.grid.shape:
            raise FieldError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def map(self, fn) -> "ScalarField":
        return ScalarField(self.grid, fn(self.values))


@dataclass(frozen=True, eq=False)
class FaceFlux:
    grid: Grid
    fx: np.ndarray
    fy: np.ndarray

    def __post_init__(self):
        ny, nx = self.grid.shape
        if self.fx.shape != (ny, nx + 1) or self.fy.shape != (ny + 1, nx):
            raise FieldError("face array shapes do not match grid")

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.fx)), np.max(np.abs(self.fy))))

    def boundary_is_zero(self) -> bool:
        return (not self.fx[:, 0].any() and not self.fx[:, -1].any()
                and not self.fy[0, :].any() and not self.fy[-1, :].any())


def _values(phi) -> np.ndarray:
    return phi.values if isinstance(phi, ScalarField) else np.asarray(phi, dtype=float)


def _check_finite(vals: np.ndarray):
    if not np.all(np.isfinite(vals)):
        raise FieldError("non-finite field")


def integrate(phi: ScalarField) -> float:
    """Midpoint quadrature of ``phi`` over the grid."""
    vals = phi.values
    _check_finite(vals)
    return float(phi.grid.cell_area * np.sum(vals))


def laplacian_neumann(phi: ScalarField) -> ScalarField:
    """Five-point Laplacian with mirrored ghost cells (zero normal gradient)."""
    g = phi.grid
    p = np.pad(phi.values, 1, mode="edge")
    c = p[1:-1, 1:-1]
    lap = ((p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]) / g.hx**2
           + (p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]) / g.hy**2)
    return ScalarField(g, lap)


def gradient_faces(phi: ScalarField) -> FaceFlux:
    g = phi.grid
    v = phi.values
    fx = np.zeros((g.ny, g.nx + 1))
    fy = np.zeros((g.ny + 1, g.nx))
    fx[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.hx
    fy[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.hy
    return FaceFlux(g, fx, fy)


def divergence(F: FaceFlux) -> ScalarField:
    g = F.grid
    div = (F.fx[:, 1:] - F.fx[:, :-1]) / g.hx + (F.fy[1:, :] - F.fy[:-1, :]) / g.hy
    return ScalarField(g, div)


def center_gradient(phi: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Face gradients averaged to cell centers, per axis."""
    F = gradient_faces(phi)
    gx = 0.5 * (F.fx[:, 1:] + F.fx[:, :-1])
    gy = 0.5 * (F.fy[1:, :] + F.fy[:-1, :])
    return gx, gy


def grad_sq(phi: ScalarField) -> np.ndarray:
    gx, gy = center_gradient(phi)
    return gx * gx + gy * gy


def norm(phi: ScalarField, kind: str = "Linf", p: float | None = None) -> float:
    """Discrete norms: ``"Lp"`` (needs ``p >= 1``), ``"Linf"``, ``"W1r"`` (needs ``p = r > 2``)."""
    vals = phi.values
    _check_finite(vals)
    dA = phi.grid.cell_area
    kind = kind.lower()
    if kind == "linf":
        return float(np.max(np.abs(vals)))
    if kind == "lp":
        if p is None or not p >= 1:
            raise ValueError(f"Lp norm requires p >= 1, got {p}")
        if np.isinf(p):
            return float(np.max(np.abs(vals)))
        return float((dA * np.sum(np.abs(vals) ** p)) ** (1.0 / p))
    if kind == "w1r":
        if p is None or not p > 2:
            raise ValueError(f"W1r norm requires r > 2, got {p}")
        gmag = np.sqrt(grad_sq(phi))
        return float((dA * np.sum(np.abs(vals) ** p) + dA * np.sum(gmag**p)) ** (1.0 / p))
    raise ValueError(f"unknown norm kind {kind!r}")

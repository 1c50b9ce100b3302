"""Parameters, constitutive laws and right-hand sides of the chemotaxis model.

Two equivalent formulations are supported:

* ``original``: u_t = Δu − χ∇·(u v^{-γ} ∇v),  v_t = Δv − f(u) v
* ``transformed``: with w = −log(v / ‖v₀‖∞),
  u_t = Δu + χ‖v₀‖∞^{1−γ} ∇·(u e^{−(1−γ)w} ∇w),  w_t = Δw − |∇w|² + f(u)

The chemotactic flux upwinds u on the sign of the face velocity and uses
arithmetic face averages of v (resp. w); everything else is central.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numba import cfunc, njit
from numba.core.ccallback import CFunc
from numba.core.registry import CPUDispatcher as Dispatcher

from . import _kernels
from .mesh import FieldError, ScalarField

_CONSUMPTION_LAWS: dict[str, Callable[[float, float], float]] = {}


@njit(cache=True)
def _apply_law(f, s, beta):
    out = np.empty(s.size)
    flat = s.ravel()
    for k in range(s.size):
        out[k] = f(flat[k], beta)
    return out.reshape(s.shape)


def register_consumption(name: str, fn: Callable[[float, float], float],
                         betas=(0.1, 0.5, 1.0), n_samples: int = 10_000):
    """Register a scalar law ``fn(s, beta)`` under ``name``.

    ``fn`` is compiled to a numba cfunc (a plain function, an ``njit``
    dispatcher or a ready cfunc are accepted).  It is sampled on ``n_samples``
    points of [0, 100] for each ``beta`` and rejected unless ``0 <= f(s) <= s**beta``.
    """
    if isinstance(fn, CFunc):
        jitted = fn
    else:
        jitted = cfunc(_kernels.LAW_SIG)(fn.py_func if isinstance(fn, Dispatcher) else fn)
    s = np.linspace(0.0, 100.0, n_samples)
    for beta in betas:
        vals = _apply_law(jitted, s, float(beta))
        if np.any(vals < 0) or np.any(vals > s**beta * (1 + 1e-14)):
            raise ValueError(f"consumption law {name!r} violates 0 <= f(s) <= s^beta (beta={beta})")
    _CONSUMPTION_LAWS[name] = jitted


register_consumption("power", _kernels.power_law)
register_consumption("zero", _kernels.zero_law)


@dataclass(frozen=True)
class ModelParams:
    chi: float
    gamma: float
    beta: float
    v_floor: float = 1e-12
    v0_max: float | None = None
    consumption: str = "power"

    def __post_init__(self):
        if not self.chi >= 0:
            # chi = 0 is allowed for pure-diffusion reference runs
            raise ValueError("chi must be >= 0")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0,1)")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0,1]")
        if not 0 < self.v_floor <= 1e-8:
            raise ValueError("v_floor must lie in (0, 1e-8]")
        if self.v0_max is not None and not self.v0_max > 0:
            raise ValueError("v0_max must be positive")
        if self.consumption not in _CONSUMPTION_LAWS:
            raise ValueError(f"unknown consumption law {self.consumption!r}")

    def with_v0(self, v0: ScalarField | np.ndarray) -> "ModelParams":
        vals = v0.values if isinstance(v0, ScalarField) else np.asarray(v0)
        return replace(self, v0_max=float(np.max(vals)))

    @property
    def law(self):
        return _CONSUMPTION_LAWS[self.consumption]

    @property
    def law_code(self) -> int:
        return {"power": _kernels.LAW_POWER, "zero": _kernels.LAW_ZERO}.get(
            self.consumption, _kernels.LAW_CUSTOM)

    @property
    def coef(self) -> float:
        """Transformed-system drift coefficient ``chi * v0_max**(1 - gamma)``."""
        if self.v0_max is None:
            raise ValueError("transformed formulation needs params.v0_max")
        return self.chi * self.v0_max ** (1.0 - self.gamma)

    def packed(self, grid) -> np.ndarray:
        coef = self.coef if self.v0_max is not None else 0.0
        return np.array([grid.hx, grid.hy, self.chi, coef, self.gamma, self.beta, self.v_floor])

    def consume(self, s):
        return _apply_law(self.law, np.asarray(s, dtype=float), self.beta)


@dataclass
class ClampCounter:
    count: int = 0


@dataclass(frozen=True, eq=False)
class Rhs:
    du: ScalarField
    second: ScalarField
    max_speed: float = 0.0
    clamp_events: int = 0


def f_consumption(s, beta: float):
    """Default consumption law ``max(s, 0)**beta``."""
    out = _apply_law(_kernels.power_law, np.asarray(s, dtype=float), float(beta))
    return float(out) if out.ndim == 0 else out


def sensitivity(v, params: ModelParams, counter: ClampCounter | None = None):
    """``chi / max(v, v_floor)**gamma``; clamped evaluations are added to ``counter``."""
    v = np.asarray(v, dtype=float)
    clamped = v < params.v_floor
    if counter is not None:
        counter.count += int(np.count_nonzero(clamped))
    out = params.chi / np.where(clamped, params.v_floor, v) ** params.gamma
    return float(out) if out.ndim == 0 else out


def _check_pair(a: ScalarField, b: ScalarField):
    if a.grid != b.grid or a.values.shape != b.values.shape:
        raise FieldError("shape mismatch between fields")


def rhs_original_arrays(u, v, params: ModelParams, hx, hy):
    du = np.empty_like(u)
    dv = np.empty_like(u)
    speed, clamps = _kernels.rhs_original(
        u, v, params.law_code, params.law, hx, hy, params.chi, params.gamma, params.beta, params.v_floor, du, dv)
    return du, dv, speed, clamps


def rhs_transformed_arrays(u, w, params: ModelParams, hx, hy):
    du = np.empty_like(u)
    dw = np.empty_like(u)
    speed, clamps = _kernels.rhs_transformed(
        u, w, params.law_code, params.law, hx, hy, params.coef, params.gamma, params.beta, du, dw)
    return du, dw, speed, clamps


def rhs_original(u: ScalarField, v: ScalarField, params: ModelParams) -> Rhs:
    _check_pair(u, v)
    g = u.grid
    du, dv, speed, clamps = rhs_original_arrays(u.values, v.values, params, g.hx, g.hy)
    return Rhs(ScalarField(g, du), ScalarField(g, dv), speed, clamps)


def rhs_transformed(u: ScalarField, w: ScalarField, params: ModelParams) -> Rhs:
    _check_pair(u, w)
    g = u.grid
    du, dw, speed, clamps = rhs_transformed_arrays(u.values, w.values, params, g.hx, g.hy)
    return Rhs(ScalarField(g, du), ScalarField(g, dw), speed, clamps)


def v_to_w(v: ScalarField, v0_max: float, v_floor: float = 1e-12) -> ScalarField:
    if not v0_max > 0:
        raise ValueError("v0_max must be positive")
    return v.map(lambda a: -np.log(np.maximum(a, v_floor) / v0_max))


def w_to_v(w: ScalarField, v0_max: float, v_floor: float = 1e-12,
           counter: ClampCounter | None = None) -> ScalarField:
    if not v0_max > 0:
        raise ValueError("v0_max must be positive")
    v = v0_max * np.exp(-w.values)
    low = v < v_floor
    if counter is not None:
        counter.count += int(np.count_nonzero(low))
    return ScalarField(w.grid, np.where(low, v_floor, v))

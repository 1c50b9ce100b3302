"""Explicit adaptive time integration and the blow-up monitor.

The inner loop (stable step, two-stage update, rejection with dt halving,
cumulative space-time integrals) runs compiled between sample times; the
Python layer handles sampling, monitoring and status reporting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from . import _kernels as K
from .mesh import Grid, ScalarField, norm
from .model import ModelParams, w_to_v

ORIGINAL = "original"
TRANSFORMED = "transformed"
FORMULATIONS = (ORIGINAL, TRANSFORMED)
FISHER_FLOOR = 1e-12


class StatusKind(str, Enum):
    COMPLETED = "Completed"
    BLOW_UP_SUSPECTED = "BlowUpSuspected"
    DT_UNDERFLOW = "DtUnderflow"


class DtUnderflow(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SimState:
    """Solution snapshot; ``companion`` is v (original) or w (transformed).

    ``fisher_cum`` and ``u2_cum`` are the running time integrals of
    ∫|∇u|²/u and ∫u², accumulated by the trapezoid rule over accepted steps.
    """

    t: float
    u: ScalarField
    companion: ScalarField
    formulation: str = ORIGINAL
    clamp_events: int = 0
    fisher_cum: float = 0.0
    u2_cum: float = 0.0

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.u.grid != self.companion.grid:
            raise ValueError("u and companion live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def form_code(self) -> int:
        return K.ORIGINAL if self.formulation == ORIGINAL else K.TRANSFORMED

    def v(self, params: ModelParams) -> ScalarField:
        if self.formulation == ORIGINAL:
            return self.companion
        return w_to_v(self.companion, params.v0_max, params.v_floor)


@dataclass(frozen=True)
class StepControl:
    sigma: float = 0.4
    dt_min: float = 1e-14
    dt_max: float = 1e-2
    retry_limit: int = 8

    def __post_init__(self):
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0,1]")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


@dataclass(frozen=True)
class RunStatus:
    kind: StatusKind
    t_stop: float
    detail: str = ""

    @property
    def completed(self) -> bool:
        return self.kind is StatusKind.COMPLETED


def _scheme_code(scheme: str) -> int:
    if scheme == "heun":
        return K.HEUN
    if scheme == "euler":
        return K.EULER
    raise ValueError(f"unknown scheme {scheme!r}")


def diffusive_dt(grid: Grid) -> float:
    return 0.25 / (1.0 / grid.hx**2 + 1.0 / grid.hy**2)


def max_face_speed(state: SimState, params: ModelParams) -> float:
    u = state.u.values
    du = np.empty_like(u)
    dc = np.empty_like(u)
    speed, _ = K.rhs(state.form_code, u, state.companion.values, params.law_code, params.law,
                     params.packed(state.grid), du, dc)
    return speed


def stable_dt(state: SimState, params: ModelParams, control: StepControl = StepControl()) -> float:
    """``sigma * min(dt_diff, min(h) / (eps + max face speed), dt_max)``."""
    g = state.grid
    dt_adv = min(g.hx, g.hy) / (K.SPEED_EPS + max_face_speed(state, params))
    return control.sigma * min(diffusive_dt(g), dt_adv, control.dt_max)


def step(state: SimState, dt: float, params: ModelParams, control: StepControl = StepControl(),
         scheme: str = "heun") -> SimState:
    """One accepted step of size ``dt`` or, after rejections, ``dt / 2**k``.

    Raises ``DtUnderflow`` once ``control.retry_limit`` halvings are exhausted.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = state.grid
    prm = params.packed(g)
    u = state.u.values
    c = state.companion.values
    du1, dc1, du2, dc2, un, cn = (np.empty_like(u) for _ in range(6))
    _, cl1 = K.rhs(state.form_code, u, c, params.law_code, params.law, prm, du1, dc1)
    dt_used, _, cl2, ok = K.step_with_retries(state.form_code, _scheme_code(scheme), u, c,
                                              params.law_code, params.law, prm, dt, control.retry_limit,
                                              du1, dc1, un, cn, du2, dc2, K.workspace(*u.shape))
    if not ok:
        raise DtUnderflow(f"step rejected {control.retry_limit + 1} times at t={state.t:.17g}")
    f0, q0, _ = K.fisher_and_u2(u, g.hx, g.hy, FISHER_FLOOR)
    f1, q1, _ = K.fisher_and_u2(un, g.hx, g.hy, FISHER_FLOOR)
    return SimState(state.t + dt_used, ScalarField(g, un), ScalarField(g, cn), state.formulation,
                    state.clamp_events + cl1 + cl2,
                    state.fisher_cum + 0.5 * dt_used * (f0 + f1),
                    state.u2_cum + 0.5 * dt_used * (q0 + q1))


def monitored_sum(state: SimState, params: ModelParams, r: float = 3.0) -> float:
    """‖u‖_{L∞} + ‖v‖_{W^{1,r}}, or inf if any value is non-finite."""
    if not (np.all(np.isfinite(state.u.values)) and np.all(np.isfinite(state.companion.values))):
        return math.inf
    return norm(state.u, "Linf") + norm(state.v(params), "W1r", r)


def blow_up_monitor(state: SimState, params: ModelParams, cap: float, r: float = 3.0) -> StatusKind | None:
    """``BLOW_UP_SUSPECTED`` when the monitored sum exceeds ``cap`` or is non-finite, else None."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    s = monitored_sum(state, params, r)
    if not math.isfinite(s) or s > cap:
        return StatusKind.BLOW_UP_SUSPECTED
    return None


def advance_to(state: SimState, horizon: float, params: ModelParams,
               control: StepControl = StepControl(),
               recorder: Callable[[SimState], None] | None = None, *,
               sample_interval: float | None = None, cap: float | None = None, r: float = 3.0,
               scheme: str = "heun") -> tuple[SimState, RunStatus]:
    """Integrate to ``horizon``, calling ``recorder(state)`` at t0 and every sample time.

    Sample times are hit exactly.  The monitor runs at every sample; between
    samples the compiled loop stops early if max u exceeds ``cap``.  ``cap``
    defaults to 1e6 times the initial monitored sum.
    """
    if horizon < state.t:
        raise ValueError("horizon lies before the current time")
    if recorder is not None:
        recorder(state)
    if horizon == state.t:
        return state, RunStatus(StatusKind.COMPLETED, state.t, "horizon reached")
    if cap is None:
        cap = 1e6 * monitored_sum(state, params, r)
    if sample_interval is None:
        sample_interval = (horizon - state.t) / 200.0
    g = state.grid
    prm = params.packed(g)
    u = state.u.values.copy()
    c = state.companion.values.copy()
    f0, q0, _ = K.fisher_and_u2(u, g.hx, g.hy, FISHER_FLOOR)
    acc = np.array([f0, state.fisher_cum, q0, state.u2_cum, float(state.clamp_events), 0.0])
    t0 = state.t
    t = t0
    n_sample = 0
    total_steps = 0
    while t < horizon:
        n_sample += 1
        t_next = min(t0 + n_sample * sample_interval, horizon)
        t, code, steps, dt = K.advance_block(
            state.form_code, _scheme_code(scheme), u, c, params.law_code, params.law, prm,
            control.sigma, control.dt_min, control.dt_max, control.retry_limit,
            t, t_next, cap, FISHER_FLOOR, acc)
        total_steps += steps
        state = SimState(t, ScalarField(g, u.copy()), ScalarField(g, c.copy()), state.formulation,
                         int(acc[4]), float(acc[1]), float(acc[3]))
        if code == K.DT_TOO_SMALL:
            return state, RunStatus(StatusKind.DT_UNDERFLOW, t, f"stable dt {dt:.3e} below dt_min at t={t:.6g}")
        if code == K.RETRIES_EXHAUSTED:
            return state, RunStatus(StatusKind.DT_UNDERFLOW, t,
                                    f"step rejected {control.retry_limit + 1} times at t={t:.6g}")
        suspected = code == K.CAP_EXCEEDED or blow_up_monitor(state, params, cap, r) is not None
        if recorder is not None:
            recorder(state)
        if suspected:
            return state, RunStatus(StatusKind.BLOW_UP_SUSPECTED, t,
                                    f"monitored norm exceeded {cap:.3e} or became non-finite at t={t:.6g}")
    return state, RunStatus(StatusKind.COMPLETED, t, f"{total_steps} steps")

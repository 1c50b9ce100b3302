import math

import numpy as np
import pytest

from chemofv.mesh import Grid, integrate
from chemofv.model import ModelParams, v_to_w
from chemofv.stepper import (DtUnderflow, SimState, StatusKind, StepControl, advance_to, blow_up_monitor,
                             monitored_sum, stable_dt, step)

P = ModelParams(chi=2.0, gamma=0.5, beta=0.5, v0_max=0.2)
HEAT = ModelParams(chi=0.0, gamma=0.5, beta=1.0, consumption="zero", v0_max=1.0)


def bump_state(n=16, formulation="original"):
    g = Grid(n, n)
    X, Y = g.centers()
    u = np.exp(-((X - 0.35) ** 2 + (Y - 0.4) ** 2) / 0.02)
    u /= integrate(g.field(u))
    v = g.constant(0.2)
    c = v if formulation == "original" else v_to_w(v, 0.2)
    return SimState(0.0, g.field(u), c, formulation)


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(sigma=0.0)
    with pytest.raises(ValueError):
        StepControl(sigma=1.5)
    with pytest.raises(ValueError):
        StepControl(dt_min=1e-2, dt_max=1e-3)


def test_stable_dt_examples():
    g = Grid(10, 10)
    s = SimState(0.0, g.constant(1.0), g.constant(1.0))
    assert stable_dt(s, HEAT, StepControl(sigma=0.4)) == pytest.approx(5e-4, rel=1e-14)
    # constant v: no chemotactic velocity, diffusion limit only
    assert stable_dt(s, P, StepControl(sigma=0.4)) == pytest.approx(5e-4, rel=1e-14)
    fine = SimState(0.0, Grid(20, 20).constant(1.0), Grid(20, 20).constant(1.0))
    assert stable_dt(fine, HEAT) == pytest.approx(stable_dt(s, HEAT) / 4, rel=1e-14)


def test_euler_hand_step():
    g = Grid(5, 5)
    s = SimState(0.0, g.constant(1.0), g.constant(1.0))
    out = step(s, 0.1, ModelParams(3.0, 0.5, 0.5), scheme="euler")
    np.testing.assert_allclose(out.companion.values, 0.9, rtol=1e-15)
    np.testing.assert_allclose(out.u.values, 1.0, rtol=1e-15)
    assert out.t == pytest.approx(0.1)


def test_zero_u_is_absorbing():
    g = Grid(6, 6)
    X, _ = g.centers()
    s = SimState(0.0, g.constant(0.0), g.field(0.1 + 0.05 * np.cos(np.pi * X)))
    for _ in range(5):
        s = step(s, 1e-3, P)
    assert not s.u.values.any()


@pytest.mark.parametrize("form", ["original", "transformed"])
def test_step_conserves_mass(form):
    s = bump_state(16, form)
    m0 = integrate(s.u)
    dt = stable_dt(s, P)
    out = step(s, dt, P)
    assert abs(integrate(out.u) - m0) <= 1e-12 * m0


def test_step_rejects_then_underflows():
    g = Grid(8, 8)
    u = np.zeros(g.shape)
    u[3, 3] = 1.0
    s = SimState(0.0, g.field(u), g.constant(1.0))
    # a huge step makes u negative; one halving is not enough
    with pytest.raises(DtUnderflow):
        step(s, 10.0, HEAT, StepControl(retry_limit=1))
    out = step(s, 10.0, HEAT, StepControl(retry_limit=20))
    assert out.t < 10.0 and out.u.values.min() >= -1e-10 * out.u.values.max()


def test_advance_to_horizon_equal_returns_immediately():
    s = bump_state(8)
    seen = []
    out, status = advance_to(s, 0.0, P, recorder=seen.append)
    assert status.kind is StatusKind.COMPLETED and out is s and len(seen) == 1


def test_advance_to_samples_and_lands_exactly():
    s = bump_state(16)
    seen = []
    out, status = advance_to(s, 0.05, P, recorder=seen.append, sample_interval=0.01)
    assert status.completed and out.t == 0.05
    assert [round(x.t, 12) for x in seen] == [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
    assert out.fisher_cum > 0 and out.u2_cum > 0
    assert seen[-1].fisher_cum >= seen[1].fisher_cum


def test_advance_rejects_past_horizon():
    s = bump_state(8)
    with pytest.raises(ValueError):
        advance_to(s, -1.0, P)


def test_heat_decay_matches_manufactured_solution():
    errs = []
    T = 0.05
    for n in (16, 32):
        g = Grid(n, n)
        X, Y = g.centers()
        mode = np.cos(np.pi * X) * np.cos(np.pi * Y)
        s = SimState(0.0, g.field(1 + mode), g.constant(1.0))
        out, _ = advance_to(s, T, HEAT)
        errs.append(np.max(np.abs(out.u.values - 1 - mode * math.exp(-2 * math.pi**2 * T))))
    assert 1.8 < math.log2(errs[0] / errs[1]) < 2.2


def test_monitor_examples():
    g = Grid(8, 8)
    s = SimState(0.0, g.constant(1.0), g.constant(1.0))
    p = ModelParams(1.0, 0.5, 0.5)
    assert monitored_sum(s, p) == pytest.approx(2.0)
    assert blow_up_monitor(s, p, cap=100.0) is None
    assert blow_up_monitor(s, p, cap=1.0) is StatusKind.BLOW_UP_SUSPECTED
    u = np.ones(g.shape)
    u[0, 0] = np.inf
    assert blow_up_monitor(SimState(0.0, g.field(u), g.constant(1.0)), p, 100.0) is StatusKind.BLOW_UP_SUSPECTED
    with pytest.raises(ValueError):
        blow_up_monitor(s, p, cap=0.0)


def test_advance_flags_blow_up_when_cap_is_tiny():
    s = bump_state(8)
    out, status = advance_to(s, 0.1, P, cap=1e-3)
    assert status.kind is StatusKind.BLOW_UP_SUSPECTED and out.t <= 0.1


def test_dt_underflow_status():
    s = bump_state(8)
    out, status = advance_to(s, 0.1, P, StepControl(dt_min=1e-3, dt_max=1e-2))
    assert status.kind is StatusKind.DT_UNDERFLOW and out.t == 0.0


@pytest.mark.parametrize("form", ["original", "transformed"])
def test_short_run_invariants(form):
    s = bump_state(16, form)
    vmax = []
    out, status = advance_to(s, 0.1, P, recorder=lambda st: vmax.append(st.v(P).values.max()),
                             sample_interval=0.005)
    assert status.completed
    assert abs(integrate(out.u) - 1.0) < 1e-12
    assert out.u.values.min() >= -1e-10 * out.u.values.max()
    assert out.clamp_events == 0
    if form == "original":
        assert all(b <= a + 1e-12 for a, b in zip(vmax, vmax[1:]))
    else:
        assert out.companion.values.min() >= -1e-10 * (1 + out.companion.values.max())

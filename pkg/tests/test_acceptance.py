"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from chemofv.functionals import calibrate_cgn, compute_constants, gn_check, heat_decay_audit, random_cosine_field
from chemofv.harness.config import parse_config
from chemofv.harness.generators import materialize
from chemofv.harness.runner import (SWEEP_COLUMNS, diagnostics_csv, formulation_discrepancy, mms_error,
                                    run_scenario, run_sweep)
from chemofv.harness.snapshot import parse_snapshot, read_snapshot, snapshot_bytes, write_snapshot
from chemofv.mesh import Grid
from constants_oracle import oracle

SCENARIO = """
grid: {nx: 64, ny: 64}
params: {chi: 2.0, gamma: 0.5, beta: 0.5}
u0: {kind: gaussian-bump, center: [0.35, 0.4], width: 0.1, mass: 1.0}
v0: {kind: constant, value: 0.2}
horizon: 10.0
control: {sigma: 1.0}
seed: 0
"""


@pytest.fixture
def verdict(capsys):
    def say(n, name, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return say


@pytest.fixture(scope="module")
def main_run():
    # compile outside the timed region
    run_scenario(parse_config(SCENARIO, {"grid.nx": 8, "grid.ny": 8, "horizon": 0.01}), write=False)
    cfg = parse_config(SCENARIO)
    t0 = time.perf_counter()
    res = run_scenario(cfg, write=False)
    return res, time.perf_counter() - t0


def test_1_mass_conservation(main_run, verdict):
    res, elapsed = main_run
    ok = res.status.completed and res.mass_drift <= 1e-10 and elapsed <= 60.0
    assert verdict(1, "mass conservation", ok, f"drift {res.mass_drift:.3g}, runtime {elapsed:.1f} s")


def test_2_maximum_principle_and_positivity(main_run, verdict):
    res, _ = main_run
    r = res.records
    vmax = [x.v_max for x in r]
    mono = all(b <= a + 1e-12 for a, b in zip(vmax, vmax[1:]))
    umin = float(res.final.u.values.min())
    ok = (mono and min(x.v_min for x in r) > 0 and umin >= -1e-10
          and all(math.isfinite(x.w_inf) for x in r) and r[-1].clamp_events == 0)
    assert verdict(2, "maximum principle and positivity", ok,
                   f"v_max monotone {mono}, v_min {min(x.v_min for x in r):.3g}, min u {umin:.3g}, "
                   f"clamps {r[-1].clamp_events}")


def test_3_theorem_regime_no_blow_up(main_run, verdict):
    res, _ = main_run
    rep = res.report
    growth = {k: a.ratio for k, a in res.growth.items()}
    ent = res.entropy_audit
    ok = (rep.hypothesis and rep.threshold == 0.25 and res.status.completed
          and all(a.passed for a in res.growth.values()) and ent is not None and ent.passed)
    assert verdict(3, "theorem regime", ok,
                   f"status {res.status.kind.value}, growth ratios {growth}, "
                   f"entropy band ratio {ent.ratio if ent else None}, C_GN {res.C_GN:.4g}")


def test_4_formulation_equivalence(verdict):
    cfg = parse_config(SCENARIO, {"horizon": 1.0})
    d32 = formulation_discrepancy(cfg, 32)
    d64 = formulation_discrepancy(cfg, 64)
    factor = d32 / d64
    ok = 1.4 <= factor <= 3.0
    assert verdict(4, "formulation equivalence", ok, f"‖Δu‖∞ {d32:.3g} -> {d64:.3g}, factor {factor:.3g}")


def test_5_spatial_convergence(verdict):
    errs = [mms_error(n, 0.1) for n in (16, 32, 64)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = all(1.7 <= o <= 2.3 for o in orders)
    assert verdict(5, "spatial convergence", ok, f"errors {errs}, orders {orders}")


def test_6_constants_oracle(verdict):
    r = compute_constants(1.0, 0.5, 0.5, 1.0, 0.25, C_GN=1.0, area=1.0, F0=0.0, gradv0_sq=0.0)
    want = oracle(1, 0.5, 0.25, 0.5, 1, 1, 1, 0, 0)
    diffs = {k: abs(getattr(r, k) - v) for k, v in want.items()}
    ok = r.c0 == 0.25 and max(diffs.values()) <= 1e-12
    assert verdict(6, "constants oracle", ok, f"max |diff| {max(diffs.values()):.3g}")


def test_7_threshold_surface(verdict):
    cfg = parse_config(SCENARIO + "sweep: {axes: {v0_amplitude: [0.20, 0.24, 0.25, 0.26]}}\n",
                       {"grid.nx": 8, "grid.ny": 8, "horizon": 0.01, "constants.c_gn": 1.0})
    rows, _ = run_sweep(cfg, write=False)
    got = [r[SWEEP_COLUMNS.index("hypothesis")] for r in rows]
    ok = got == [True, True, False, False]
    assert verdict(7, "threshold surface", ok, f"verdicts {got}")


def test_8_inequality_audits(verdict):
    g = Grid(32, 32)
    c = calibrate_cgn(100, rng_seed=0, grid=g)
    rng = np.random.default_rng(12345)
    p_grid = (2.0, 2.5, 3.0, 3.5, 4.0)
    ratios = [gn_check(g.field(random_cosine_field(rng, g)), p, c) for _ in range(100) for p in p_grid]
    cs = []
    for n in (32, 64):
        grid = Grid(n, n)
        spec = {"kind": "gaussian-bump", "amplitude": 1.0, "base": 0.0, "center": None, "width": 0.1,
                "mass": None}
        cs.append(heat_decay_audit(grid.field(materialize(spec, grid, 0)), 1.0, [0.01, 0.05, 0.1, 0.5, 1.0]))
    change = abs(cs[1] - cs[0]) / cs[0]
    ok = max(ratios) <= 1.0 and change <= 0.2
    assert verdict(8, "inequality audits", ok,
                   f"C_GN {c:.4g}, max fresh ratio {max(ratios):.4g}, C_S {cs[0]:.6g} -> {cs[1]:.6g}")


def test_9_determinism_and_formats(tmp_path, verdict):
    over = {"grid.nx": 16, "grid.ny": 16, "horizon": 0.5}
    a = run_scenario(parse_config(SCENARIO, over), write=False)
    b = run_scenario(parse_config(SCENARIO, over), write=False)
    same_csv = diagnostics_csv(a.records) == diagnostics_csv(b.records)
    u = a.final.u
    back = read_snapshot(write_snapshot(u, tmp_path / "u.snap"))
    exact = back.grid == u.grid and back.values.tobytes() == u.values.tobytes()
    g3 = Grid(3, 3)
    size = len(snapshot_bytes(g3.field(np.arange(9.0))))
    again = parse_snapshot(snapshot_bytes(g3.field(np.arange(9.0))))
    ok = same_csv and exact and size == 110 and np.array_equal(again.values, np.arange(9.0).reshape(3, 3))
    assert verdict(9, "determinism and formats", ok, f"csv identical {same_csv}, snapshot exact {exact}, "
                   f"3x3 size {size}")

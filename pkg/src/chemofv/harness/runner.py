"""Scenario runs, sweeps, convergence studies and CSV output."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..functionals import (COLUMNS, AuditReport, ConstantsReport, DiagnosticsRecord, EntropyAudit,
                           Recorder, calibrate_cgn, constants_report, entropy_bound_audit,
                           linear_growth_audit, run_constant)
from ..mesh import Grid, ScalarField
from ..model import ModelParams, v_to_w
from ..stepper import ORIGINAL, TRANSFORMED, RunStatus, SimState, StepControl, advance_to
from .config import ConfigError, ScenarioConfig, SweepConfig, build_scenario, point_tree
from .snapshot import write_snapshot

MASS_TOL = 1e-10
TRACKED = ("fisher_cum", "entropy", "w_inf")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def diagnostics_csv(records: list[DiagnosticsRecord]) -> str:
    return csv_text(COLUMNS, [[getattr(r, c) for c in COLUMNS] for r in records])


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV written by this module."""
    lines = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = lines[0]
    rows = [r for r in lines[1:] if r]
    for k, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{k}: expected {len(header)} fields, got {len(row)}")
    return {h: np.array([float(r[i]) for r in rows]) for i, h in enumerate(header)}


@dataclass
class ScenarioResult:
    status: RunStatus
    records: list[DiagnosticsRecord]
    report: ConstantsReport
    final: SimState
    params: ModelParams
    C_GN: float
    mass_drift: float
    growth: dict[str, AuditReport]
    entropy_audit: EntropyAudit | None
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def audits_pass(self) -> bool:
        ok = self.mass_drift <= MASS_TOL and all(a.passed for a in self.growth.values())
        if self.entropy_audit is not None:
            ok = ok and self.entropy_audit.passed
        return ok

    def summary(self) -> str:
        lines = [f"status = {self.status.kind.value}", f"t_stop = {fmt(self.status.t_stop)}",
                 f"detail = {self.status.detail}",
                 f"hypothesis = {fmt(self.report.hypothesis)} (threshold {fmt(self.report.threshold)})",
                 f"C_GN = {fmt(self.C_GN)}", f"mass_drift = {fmt(self.mass_drift)}"]
        for k, a in self.growth.items():
            lines.append(f"linear_growth[{k}] = ratio {fmt(a.ratio)} {'pass' if a.passed else 'FAIL'}")
        if self.entropy_audit is not None:
            e = self.entropy_audit
            lines.append(f"entropy_bound = ratio {fmt(e.ratio)} {'pass' if e.passed else 'FAIL'}")
        else:
            lines.append("entropy_bound = skipped (constants chain not available)")
        return "\n".join(lines)


def initial_state(u0: ScalarField, v0: ScalarField, params: ModelParams, formulation: str) -> SimState:
    if formulation == ORIGINAL:
        return SimState(0.0, u0, v0, ORIGINAL)
    return SimState(0.0, u0, v_to_w(v0, params.v0_max, params.v_floor), TRANSFORMED)


def growth_audits(records: list[DiagnosticsRecord]) -> dict[str, AuditReport]:
    """linear_growth_audit of each tracked quantity against its run-reported constant."""
    out = {}
    for name in TRACKED:
        series = [(r.t, getattr(r, name)) for r in records]
        if not all(math.isfinite(q) for _, q in series):
            out[name] = AuditReport(math.inf, False, math.nan)
            continue
        C = run_constant(series)
        out[name] = linear_growth_audit(series, C) if C > 0 else AuditReport(0.0, True, 0.0)
    return out


def run_scenario(cfg: ScenarioConfig, write: bool = True) -> ScenarioResult:
    """Run one scenario; with ``write`` the CSV, constants report and final snapshots are saved."""
    u0, v0 = cfg.initial_fields()
    params = cfg.params.with_v0(v0)
    consts = cfg.tree["constants"]
    c_gn = consts["c_gn"]
    if c_gn is None:
        c_gn = calibrate_cgn(consts["calibration_samples"], rng_seed=cfg.seed, grid=cfg.grid)
    report = constants_report(params, u0, v0, C_GN=c_gn, C_S=consts["c_s"])
    rec = Recorder(params)
    final, status = advance_to(initial_state(u0, v0, params, cfg.formulation), cfg.horizon, params,
                               cfg.control, rec, sample_interval=cfg.sample_interval, cap=cfg.cap, r=cfg.r)
    m = np.array([r.mass for r in rec.records])
    m0 = m[0]
    mass_drift = float(np.max(np.abs(m - m0)) / m0) if m0 > 0 else float(np.max(np.abs(m)))
    if not math.isfinite(mass_drift):
        mass_drift = math.inf
    ent = None
    if report.regime == "theorem":
        ent = entropy_bound_audit([(r.t, r.F) for r in rec.records], report.F0, report.c2, cfg.grid.area)
    res = ScenarioResult(status, rec.records, report, final, params, c_gn, mass_drift,
                         growth_audits(rec.records), ent)
    if write:
        paths = {k: cfg.output_path(k) for k in ("csv", "constants", "snapshot_u", "snapshot_v")}
        paths["csv"].parent.mkdir(parents=True, exist_ok=True)
        paths["csv"].write_text(diagnostics_csv(rec.records))
        paths["constants"].write_text(report.to_text())
        write_snapshot(final.u, paths["snapshot_u"])
        write_snapshot(final.v(params), paths["snapshot_v"])
        res.paths = paths
    return res


SWEEP_COLUMNS = ("index", "chi", "gamma", "beta", "v0_amplitude", "u0_mass", "threshold", "hypothesis",
                 "corollary", "status", "t_stop", "mass", "entropy", "F", "fisher_cum", "u2_cum", "w_inf",
                 "clamp_events", "mass_drift", "entropy_band_ratio", "error")


def _sweep_row(args) -> list:
    index, base, point = args
    row = {"index": index, **{k: point.get(k) for k in ("chi", "gamma", "beta")}}
    try:
        cfg = build_scenario(point_tree(base, point), base.base_dir)
        p = cfg.params
        row.update(chi=p.chi, gamma=p.gamma, beta=p.beta)
        res = run_scenario(cfg, write=False)
        last = res.records[-1]
        rep = res.report
        row.update(v0_amplitude=rep.v0_max, u0_mass=rep.m, threshold=rep.threshold, hypothesis=rep.hypothesis,
                   corollary=rep.corollary, status=res.status.kind.value, t_stop=res.status.t_stop,
                   mass=last.mass, entropy=last.entropy, F=last.F, fisher_cum=last.fisher_cum,
                   u2_cum=last.u2_cum, w_inf=last.w_inf, clamp_events=last.clamp_events,
                   mass_drift=res.mass_drift,
                   entropy_band_ratio=None if res.entropy_audit is None else res.entropy_audit.ratio)
    except (ConfigError, ValueError, RuntimeError, FloatingPointError) as e:
        row.update(status="Error", error=str(e).replace("\n", " "))
    return [row.get(c) for c in SWEEP_COLUMNS]


def run_sweep(cfg: SweepConfig, write: bool = True) -> tuple[list[list], Path | None]:
    """One row per grid point in product order; failed points get status ``Error``."""
    jobs = [(i, cfg.base, p) for i, p in enumerate(cfg.points())]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    path = None
    if write:
        path = cfg.base.output_path("sweep_csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text(SWEEP_COLUMNS, rows))
    return rows, path


# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceReport:
    levels: tuple[int, ...]
    mms_errors: tuple[float, ...]
    mms_orders: tuple[float, ...]  # pairwise log2 ratios
    discrepancies: tuple[float, ...]  # ‖u_orig − u_transf‖∞ per level
    discrepancy_factors: tuple[float, ...]

    @property
    def mms_order(self) -> float:
        """Least-squares slope of log error against log h."""
        h = np.log(1.0 / np.array(self.levels, dtype=float))
        return float(np.polyfit(h, np.log(self.mms_errors), 1)[0])

    def text(self) -> str:
        lines = ["level,mms_error,mms_order,discrepancy,discrepancy_factor"]
        for k, n in enumerate(self.levels):
            o = self.mms_orders[k - 1] if k else None
            f = self.discrepancy_factors[k - 1] if k and self.discrepancy_factors else None
            d = self.discrepancies[k] if self.discrepancies else None
            lines.append(",".join(fmt(x) for x in (n, self.mms_errors[k], o, d, f)))
        return "\n".join(lines) + "\n"


def check_levels(levels) -> tuple[int, ...]:
    levels = tuple(int(n) for n in levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    if any(b != 2 * a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be nested: each twice the previous")
    return levels


def mms_error(n: int, horizon: float, lx: float = 1.0, ly: float = 1.0,
              control: StepControl = StepControl()) -> float:
    """L∞ error of the discrete heat flow against u = 1 + cos(πx/lx)cos(πy/ly)e^{−λt}."""
    g = Grid(n, n, lx, ly)
    X, Y = g.centers()
    mode = np.cos(np.pi * X / lx) * np.cos(np.pi * Y / ly)
    lam = np.pi**2 * (1.0 / lx**2 + 1.0 / ly**2)
    params = ModelParams(chi=0.0, gamma=0.5, beta=1.0, consumption="zero", v0_max=1.0)
    state = SimState(0.0, g.field(1.0 + mode), g.constant(1.0))
    final, status = advance_to(state, horizon, params, control, sample_interval=horizon)
    if not status.completed:
        raise RuntimeError(f"heat flow stopped: {status.detail}")
    return float(np.max(np.abs(final.u.values - (1.0 + mode * math.exp(-lam * horizon)))))


def _on_grid(cfg: ScenarioConfig, n: int) -> ScenarioConfig:
    tree = {**cfg.tree, "grid": {**cfg.tree["grid"], "nx": n, "ny": n}}
    return build_scenario(tree, cfg.base_dir)


def formulation_discrepancy(cfg: ScenarioConfig, n: int, pair=(ORIGINAL, TRANSFORMED)) -> float:
    """‖u_a − u_b‖∞ at ``cfg.horizon`` for the scenario on an n×n grid."""
    c = _on_grid(cfg, n)
    u0, v0 = c.initial_fields()
    params = c.params.with_v0(v0)
    finals = []
    for form in pair:
        final, status = advance_to(initial_state(u0, v0, params, form), c.horizon, params, c.control,
                                   sample_interval=c.horizon, cap=c.cap, r=c.r)
        if not status.completed:
            raise RuntimeError(f"{form} run stopped: {status.detail}")
        finals.append(final.u.values)
    return float(np.max(np.abs(finals[0] - finals[1])))


def convergence_study(cfg: ScenarioConfig, levels=(16, 32, 64), mms_horizon: float = 0.1,
                      discrepancy: bool = True) -> ConvergenceReport:
    """Manufactured-solution order and formulation discrepancy over nested n×n grids."""
    levels = check_levels(levels)
    g = cfg.grid
    errs = [mms_error(n, mms_horizon, g.lx, g.ly, cfg.control) for n in levels]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    disc = [formulation_discrepancy(cfg, n) for n in levels] if discrepancy else []
    factors = [a / b if b > 0 else math.inf for a, b in zip(disc, disc[1:])]
    return ConvergenceReport(levels, tuple(errs), tuple(orders), tuple(disc), tuple(factors))

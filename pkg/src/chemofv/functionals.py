"""Diagnostics, the constants chain and the inequality audits.

Quadrature is the midpoint rule of :func:`chemofv.mesh.integrate`; gradients
are face differences averaged to cell centers, as in ``mesh.grad_sq``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .mesh import FieldError, Grid, ScalarField, grad_sq, integrate, norm
from .model import ModelParams, v_to_w, w_to_v
from .stepper import FISHER_FLOOR, SimState, StepControl, advance_to, ORIGINAL

NEG_TOL = 1e-10
ROUNDOFF = 4 * np.finfo(float).eps
BAND = 0.1


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    entropy: float
    F: float
    fisher: float
    fisher_cum: float
    u2_cum: float
    gradv2: float
    u_inf: float
    v_min: float
    v_max: float
    w_inf: float
    clamp_events: int
    fisher_floor_hits: int = 0


# frozen CSV header; fisher_floor_hits is kept in memory only
COLUMNS = ("t", "mass", "entropy", "F", "fisher", "fisher_cum", "u2_cum", "gradv2",
           "u_inf", "v_min", "v_max", "w_inf", "clamp_events")


# ---------------------------------------------------------------------------
# functionals of a single state


def _check_nonneg(u: np.ndarray):
    umax = np.max(np.abs(u))
    if np.min(u) < -NEG_TOL * umax:
        raise FieldError(f"u has negative values beyond tolerance (min {np.min(u):.3e})")


def mass(u: ScalarField) -> float:
    return integrate(u)


def _xlogx(u: np.ndarray) -> np.ndarray:
    pos = np.maximum(u, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos > 0, pos * np.log(pos), 0.0)


def entropy(u: ScalarField) -> float:
    """∫ u log u with 0 log 0 = 0; tiny negative round-off is treated as 0."""
    integrate(u)
    _check_nonneg(u.values)
    return float(u.grid.cell_area * np.sum(_xlogx(u.values)))


def functional_F(u: ScalarField, w: ScalarField) -> float:
    """𝔉(u, w) = ∫ u log u + ½ ∫ u w."""
    if u.grid != w.grid:
        raise FieldError("shape mismatch between fields")
    return entropy(u) + 0.5 * integrate(ScalarField(u.grid, u.values * w.values))


def fisher(u: ScalarField, floor: float = FISHER_FLOOR) -> float:
    """∫ |∇u|² / max(u, floor); zero for constant u."""
    g = u.grid
    return float(K.fisher_and_u2(u.values, g.hx, g.hy, floor)[0])


def fisher_floor_hits(u: ScalarField, floor: float = FISHER_FLOOR) -> int:
    g = u.grid
    return int(K.fisher_and_u2(u.values, g.hx, g.hy, floor)[2])


def diagnostics(state: SimState, params: ModelParams) -> DiagnosticsRecord:
    """One record for ``state``; every float is NaN once the state is non-finite."""
    if params.v0_max is None:
        raise ValueError("diagnostics need params.v0_max")
    g = state.grid
    u = state.u.values
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(state.companion.values))):
        nan = math.nan
        return DiagnosticsRecord(state.t, nan, nan, nan, nan, state.fisher_cum, state.u2_cum,
                                 nan, nan, nan, nan, nan, state.clamp_events)
    if state.formulation == ORIGINAL:
        v = state.companion
        w = v_to_w(v, params.v0_max, params.v_floor)
    else:
        w = state.companion
        v = w_to_v(w, params.v0_max, params.v_floor)
    fis, _, hits = K.fisher_and_u2(u, g.hx, g.hy, FISHER_FLOOR)
    return DiagnosticsRecord(
        t=state.t,
        mass=mass(state.u),
        entropy=entropy(state.u),
        F=functional_F(state.u, w),
        fisher=float(fis),
        fisher_cum=state.fisher_cum,
        u2_cum=state.u2_cum,
        gradv2=float(g.cell_area * np.sum(grad_sq(v))),
        u_inf=float(np.max(np.abs(u))),
        v_min=float(np.min(v.values)),
        v_max=float(np.max(v.values)),
        w_inf=float(np.max(np.abs(w.values))),
        clamp_events=state.clamp_events,
        fisher_floor_hits=int(hits),
    )


class Recorder:
    """Recorder callback for ``advance_to`` collecting :class:`DiagnosticsRecord` rows."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, state: SimState):
        self.records.append(diagnostics(state, self.params))

    def series(self, name: str) -> list[tuple[float, float]]:
        return [(r.t, getattr(r, name)) for r in self.records]


# ---------------------------------------------------------------------------
# hypothesis and constants


def hypothesis_check(chi: float, gamma: float, v0_max: float) -> tuple[bool, float]:
    """(‖v₀‖∞ < χ^{1/(γ−1)}, threshold)."""
    if not chi > 0:
        raise ValueError("chi must be > 0")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0,1)")
    if not v0_max > 0:
        raise ValueError("v0_max must be positive")
    threshold = chi ** (1.0 / (gamma - 1.0))
    return bool(v0_max < threshold), threshold


@dataclass(frozen=True)
class ConstantsReport:
    chi: float
    gamma: float
    beta: float
    m: float
    v0_max: float
    w0_inf: float
    gradv0_sq: float
    area: float
    C_GN: float
    C_S: float | None
    F0: float
    threshold: float
    hypothesis: bool
    c0: float
    mass_bound_beta1: float
    regime: str  # "theorem", "corollary" or "invalid"
    c1: float | None = None
    c2: float | None = None
    L1: float | None = None
    L2: float | None = None
    K: float | None = None
    C2: float | None = None
    L3: float | None = None

    @property
    def valid(self) -> bool:
        return self.regime != "invalid"

    @property
    def corollary(self) -> bool | None:
        """Small-mass verdict, only meaningful for β = 1."""
        if self.beta != 1.0:
            return None
        return bool(self.m < self.mass_bound_beta1)

    def to_text(self) -> str:
        """``key = value`` lines, floats with 17 significant digits."""
        lines = []
        missing = "corollary regime" if self.regime == "corollary" else "invalid"
        for k, v in asdict(self).items():
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif v is None:
                s = "none" if k == "C_S" or (k == "L3" and self.regime == "theorem") else missing
            elif isinstance(v, float):
                s = "%.17g" % v
            else:
                s = str(v)
            lines.append(f"{k} = {s}")
        cor = self.corollary
        lines.append(f"corollary = {'n/a' if cor is None else str(cor).lower()}")
        return "\n".join(lines) + "\n"


def parse_constants_text(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def compute_constants(chi: float, gamma: float, beta: float, m: float, v0_max: float, *,
                      C_GN: float, area: float, F0: float, gradv0_sq: float,
                      w0_inf: float = 0.0, C_S: float | None = None) -> ConstantsReport:
    """Evaluate c₀ → c₁ → c₂ → L₁, L₂ → 𝒦 → C₂ → L₃ in dependency order.

    c₀ ≤ 0 marks the report invalid; β = 1 stops after c₀ (corollary regime).
    """
    if not C_GN > 0:
        raise ValueError("C_GN must be positive")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0,1]")
    ok, threshold = hypothesis_check(chi, gamma, v0_max)
    s = chi * v0_max ** (1.0 - gamma)
    c0 = 0.5 - 0.5 * s
    base = dict(chi=chi, gamma=gamma, beta=beta, m=m, v0_max=v0_max, w0_inf=w0_inf,
                gradv0_sq=gradv0_sq, area=area, C_GN=C_GN, C_S=C_S, F0=F0,
                threshold=threshold, hypothesis=ok, c0=c0,
                mass_bound_beta1=(1.0 - s) / (2.0 * C_GN**4))
    if not c0 > 0:
        return ConstantsReport(**base, regime="invalid")
    if beta == 1.0:
        return ConstantsReport(**base, regime="corollary")
    c1 = (2.0 * (1.0 - beta) * C_GN ** (2.0 * (beta + 1.0) ** 2 / (1.0 - beta))
          * (c0 / (2.0 * beta)) ** (beta / (beta - 1.0)))
    c2 = 0.5 * c1 + 4.0**beta * C_GN ** (2.0 * (beta + 1.0)) * m ** (beta + 1.0)
    L1 = (2.0 / c0) * max(F0 + area / math.e, c2)
    L2 = max(c2, F0)
    Kc = 2.0 * m * C_GN**4 * (L1 + 4.0 * m)
    C2 = v0_max**2 * beta * Kc + max(gradv0_sq, v0_max**2 * (1.0 - beta) * area)
    L3 = None
    if C_S is not None:
        L3 = (C_S / (2.0 * (1.0 - beta)) + 0.5 * C_S * Kc * beta + 2.0 * C_S / (2.0 - beta)
              + max(w0_inf, 0.5 * C_S + 0.5 * C_S * (1.0 - beta)))
    return ConstantsReport(**base, regime="theorem", c1=c1, c2=c2, L1=L1, L2=L2, K=Kc, C2=C2, L3=L3)


def constants_report(params: ModelParams, u0: ScalarField, v0: ScalarField, w0: ScalarField | None = None,
                     C_GN: float = 1.0, C_S: float | None = None) -> ConstantsReport:
    """Constants for initial data ``(u0, v0)``; ``w0`` defaults to the transform of ``v0``."""
    v0_max = float(np.max(v0.values))
    if w0 is None:
        w0 = v_to_w(v0, v0_max, params.v_floor)
    g = u0.grid
    return compute_constants(
        params.chi, params.gamma, params.beta, mass(u0), v0_max, C_GN=C_GN, area=g.area,
        F0=functional_F(u0, w0), gradv0_sq=float(g.cell_area * np.sum(grad_sq(v0))),
        w0_inf=float(np.max(np.abs(w0.values))), C_S=C_S)


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class AuditReport:
    ratio: float  # worst normalized value; passes at <= 1
    passed: bool
    t_worst: float

    @property
    def margin(self) -> float:
        return 1.0 - self.ratio


def run_constant(series: Sequence[tuple[float, float]]) -> float:
    """Smallest C with q(t) <= C(1+t) on the samples."""
    return max(q / (1.0 + t) for t, q in series)


def linear_growth_audit(series: Sequence[tuple[float, float]], C: float) -> AuditReport:
    """Worst q(t)/(C(1+t)); non-finite samples fail."""
    if len(series) == 0:
        raise ValueError("empty series")
    if not C > 0:
        raise ValueError("C must be positive")
    t = np.array([s[0] for s in series], dtype=float)
    q = np.array([s[1] for s in series], dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
        return AuditReport(math.inf, False, float(t[~np.isfinite(q)][0]) if np.any(~np.isfinite(q)) else math.nan)
    r = q / (1.0 + t) / C
    k = int(np.argmax(r))
    return AuditReport(float(r[k]), bool(r[k] <= 1.0 + ROUNDOFF), float(t[k]))


@dataclass(frozen=True)
class EntropyAudit:
    ratio: float  # worst (violation / band); passes at <= 1
    passed: bool
    worst_lower: float  # max of −area/e − F(t), positive means below the bound
    worst_upper: float  # max of F(t) − (F0 + c2 t)

    @property
    def margin(self) -> float:
        return 1.0 - self.ratio


def entropy_bound_audit(F_series: Sequence[tuple[float, float]], F0: float, c2: float,
                        area: float = 1.0) -> EntropyAudit:
    """Check −area/e <= F(t) <= F0 + c2·t with band 10% of (|F0| + c2·t + area/e)."""
    if len(F_series) == 0:
        raise ValueError("empty series")
    t = np.array([s[0] for s in F_series], dtype=float)
    F = np.array([s[1] for s in F_series], dtype=float)
    if not np.all(np.isfinite(F)):
        return EntropyAudit(math.inf, False, math.inf, math.inf)
    lower = -area / math.e - F
    upper = F - (F0 + c2 * t)
    band = BAND * (abs(F0) + c2 * t + area / math.e)
    ratio = float(np.max(np.maximum(lower, upper) / band))
    return EntropyAudit(ratio, ratio <= 1.0, float(np.max(lower)), float(np.max(upper)))


def _l2_grad(phi: ScalarField) -> float:
    return math.sqrt(phi.grid.cell_area * float(np.sum(grad_sq(phi))))


def _gn_ratio(phi: ScalarField, p: float) -> float:
    """‖φ‖_p / (‖∇φ‖₂^θ‖φ‖₂^{1−θ} + ‖φ‖₂) with θ = 1 − 2/p."""
    theta = 1.0 - 2.0 / p
    lp = norm(phi, "Lp", p)
    l2 = norm(phi, "Lp", 2)
    if l2 == 0:
        raise ValueError("degenerate zero field")
    return lp / (_l2_grad(phi) ** theta * l2 ** (1.0 - theta) + l2)


def gn_check(phi: ScalarField, p: float, C_GN: float) -> float:
    """LHS/RHS of the Gagliardo–Nirenberg inequality; <= 1 means it holds with ``C_GN``."""
    if not 2 <= p <= 4:
        raise ValueError(f"p must lie in [2,4], got {p}")
    if not C_GN > 0:
        raise ValueError("C_GN must be positive")
    return _gn_ratio(phi, p) / C_GN


def random_cosine_field(rng: np.random.Generator, grid: Grid, max_modes: int = 8) -> np.ndarray:
    """Offset ±1 plus ε·ψ, ψ a random cosine series normalized to max |ψ| = 1.

    ψ uses up to ``max_modes`` modes cos(kπx/lx)·cos(lπy/ly) per axis, which
    satisfy the zero-flux condition.  ε is log-uniform on [1e-6, 10], so the
    samples run from nearly constant (GN ratio close to 1) to pure oscillation.
    """
    kx = int(rng.integers(1, max_modes + 1))
    ky = int(rng.integers(1, max_modes + 1))
    X, Y = grid.centers()
    cx = np.cos(np.pi * np.outer(np.arange(kx + 1), X[0]) / grid.lx)  # (kx+1, nx)
    cy = np.cos(np.pi * np.outer(np.arange(ky + 1), Y[:, 0]) / grid.ly)  # (ky+1, ny)
    k = np.arange(kx + 1)[None, :]
    l = np.arange(ky + 1)[:, None]
    coef = rng.standard_normal((ky + 1, kx + 1)) / (1.0 + k + l)
    coef[0, 0] = 0.0
    psi = cy.T @ coef @ cx
    eps = 10.0 ** rng.uniform(-6.0, 1.0)
    return rng.choice([-1.0, 1.0]) + eps * psi / np.max(np.abs(psi))


def calibrate_cgn(sample_count: int = 100, p_grid: Iterable[float] = (2.0, 2.5, 3.0, 3.5, 4.0),
                  rng_seed: int = 0, grid: Grid = Grid(32, 32), safety: float = 1.05,
                  sampler: Callable[[np.random.Generator, Grid], np.ndarray] = random_cosine_field) -> float:
    """Empirical C_GN: ``safety`` times the largest GN ratio over random smooth fields.

    Zero samples are skipped.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    ps = [float(p) for p in p_grid]
    if not ps or any(not 2 <= p <= 4 for p in ps):
        raise ValueError("p_grid must be non-empty within [2,4]")
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(sample_count):
        phi = ScalarField(grid, sampler(rng, grid))
        if not np.any(phi.values):
            continue
        worst = max(worst, max(_gn_ratio(phi, p) for p in ps))
    if worst == 0.0:
        raise ValueError("all samples were zero")
    return safety * worst


def heat_decay_audit(u0: ScalarField, beta: float, times: Iterable[float],
                     control: StepControl = StepControl()) -> float:
    """Empirical C_S = max_t ‖u(t)‖∞ / ((1 + t^{−β/2}) ‖u₀‖_{2/β}) for the discrete heat flow."""
    ts = sorted(float(t) for t in times)
    if not ts:
        raise ValueError("empty times list")
    if ts[0] <= 0:
        raise ValueError("times must be positive")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0,1]")
    params = ModelParams(chi=0.0, gamma=0.5, beta=beta, consumption="zero", v0_max=1.0)
    g = u0.grid
    state = SimState(0.0, u0, g.constant(1.0))
    denom0 = norm(u0, "Lp", 2.0 / beta)
    if denom0 == 0:
        raise ValueError("degenerate zero field")
    worst = 0.0
    for t in ts:
        state, status = advance_to(state, t, params, control, sample_interval=t - state.t)
        if not status.completed:
            raise RuntimeError(f"heat flow stopped: {status.detail}")
        worst = max(worst, norm(state.u, "Linf") / ((1.0 + t ** (-beta / 2.0)) * denom0))
    return worst

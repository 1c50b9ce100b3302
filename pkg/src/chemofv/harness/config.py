"""YAML scenario and sweep configuration.

A document has the sections below; keys marked REQUIRED have no default.
Unknown keys are rejected and every diagnostic names its key path.

.. code-block:: yaml

    grid: {nx: 64, ny: 64, lx: 1.0, ly: 1.0}            # nx, ny REQUIRED
    params: {chi: 2.0, gamma: 0.5, beta: 0.5,          # chi, gamma, beta REQUIRED
             v_floor: 1.0e-12, consumption: power}
    u0: {kind: gaussian-bump, mass: 1.0}               # REQUIRED, see generators
    v0: {kind: constant, value: 0.2}                   # REQUIRED
    formulation: original                              # or transformed
    horizon: 1.0
    control: {sigma: 0.4, dt_min: 1.0e-14, dt_max: 0.01, retry_limit: 8}
    monitor: {cap: null, r: 3.0}                       # cap null: 1e6 x initial sum
    sample_interval: null                              # null: horizon / 200
    seed: 0
    constants: {c_gn: null, c_s: null, calibration_samples: 100}
    output: {dir: out, csv: diagnostics.csv, constants: constants.txt,
             snapshot_u: final_u.snap, snapshot_v: final_v.snap, sweep_csv: sweep.csv}
    sweep:                                             # present only for sweeps
      axes: {v0_amplitude: [0.2, 0.24, 0.25, 0.26]}    # chi, gamma, beta, v0_amplitude, u0_mass
      limit: 1000
      workers: 1
"""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ..mesh import Grid, ScalarField
from ..model import _CONSUMPTION_LAWS, ModelParams
from ..stepper import FORMULATIONS, StepControl
from . import generators

REQUIRED = object()
SWEEP_AXES = ("chi", "gamma", "beta", "v0_amplitude", "u0_mass")

# leaf -> (type tag, default)
SCHEMA = {
    "grid": {"nx": ("int", REQUIRED), "ny": ("int", REQUIRED), "lx": ("float", 1.0), "ly": ("float", 1.0)},
    "params": {"chi": ("float", REQUIRED), "gamma": ("float", REQUIRED), "beta": ("float", REQUIRED),
               "v_floor": ("float", 1e-12), "consumption": ("str", "power")},
    "u0": ("generator", REQUIRED),
    "v0": ("generator", REQUIRED),
    "formulation": ("str", "original"),
    "horizon": ("float", 1.0),
    "control": {"sigma": ("float", 0.4), "dt_min": ("float", 1e-14), "dt_max": ("float", 1e-2),
                "retry_limit": ("int", 8)},
    "monitor": {"cap": ("float?", None), "r": ("float", 3.0)},
    "sample_interval": ("float?", None),
    "seed": ("int", 0),
    "constants": {"c_gn": ("float?", None), "c_s": ("float?", None), "calibration_samples": ("int", 100)},
    "output": {"dir": ("str", "out"), "csv": ("str", "diagnostics.csv"), "constants": ("str", "constants.txt"),
               "snapshot_u": ("str", "final_u.snap"), "snapshot_v": ("str", "final_v.snap"),
               "sweep_csv": ("str", "sweep.csv")},
}
SWEEP_SCHEMA = {"axes": ("axes", None), "limit": ("int", 1000), "workers": ("int", 1)}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _coerce(tag: str, value, path: str):
    if tag.endswith("?"):
        if value is None:
            return None
        tag = tag[:-1]
    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected integer, got {type(value).__name__}")
        return value
    if tag == "float":
        if isinstance(value, str):
            # YAML 1.1 reads 1e-6 (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(path, f"expected number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected number, got {type(value).__name__}")
        return float(value)
    if tag == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected string, got {type(value).__name__}")
        return value
    raise AssertionError(tag)


def _check_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected mapping, got {type(node).__name__}")


def _fill(schema: dict, node, path: str) -> dict:
    _check_mapping(node, path or "<root>")
    for k in node:
        if k not in schema:
            raise ConfigError(f"{path}.{k}" if path else str(k), "unknown key")
    out = {}
    for k, spec in schema.items():
        p = f"{path}.{k}" if path else k
        if isinstance(spec, dict):
            out[k] = _fill(spec, node.get(k, {}) if node.get(k) is not None else {}, p)
            continue
        tag, default = spec
        if k not in node:
            if default is REQUIRED:
                raise ConfigError(p, "missing required key")
            out[k] = copy.deepcopy(default)
        elif tag == "generator":
            out[k] = _generator(node[k], p)
        elif tag == "axes":
            out[k] = node[k]
        else:
            out[k] = _coerce(tag, node[k], p)
    return out


def _generator(node, path) -> dict:
    _check_mapping(node, path)
    kind = node.get("kind")
    if kind not in generators.SCHEMAS:
        raise ConfigError(f"{path}.kind", f"unknown generator {kind!r}; expected one of {sorted(generators.SCHEMAS)}")
    required, optional = generators.SCHEMAS[kind]
    allowed = set(required) | set(optional) | set(generators.COMMON) | {"kind"}
    for k in node:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", f"unknown key for generator {kind!r}")
    out = {"kind": kind}
    for k in required:
        if k not in node:
            raise ConfigError(f"{path}.{k}", "missing required key")
    for k, default in itertools.chain(((k, REQUIRED) for k in required), optional.items(),
                                      generators.COMMON.items()):
        p = f"{path}.{k}"
        v = node.get(k, default)
        if k == "center":
            if v is not None:
                if not (isinstance(v, (list, tuple)) and len(v) == 2):
                    raise ConfigError(p, "expected [x, y]")
                v = [_coerce("float", c, p) for c in v]
        elif k == "path":
            v = _coerce("str", v, p)
        elif k == "modes":
            v = _coerce("int", v, p)
            if v < 1:
                raise ConfigError(p, "modes must be >= 1")
        else:
            v = _coerce("float?", v, p)
        out[k] = v
    return out


def _axes(node, path) -> dict:
    if node is None:
        return {}
    _check_mapping(node, path)
    out = {}
    for k, vals in node.items():
        p = f"{path}.{k}"
        if k not in SWEEP_AXES:
            raise ConfigError(p, f"unknown sweep axis; expected one of {list(SWEEP_AXES)}")
        if not isinstance(vals, list) or not vals:
            raise ConfigError(p, "expected a non-empty list")
        out[k] = [_coerce("float", v, p) for v in vals]
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    tree: dict  # fully normalized document, defaults applied
    grid: Grid
    params: ModelParams  # v0_max is filled in at run time
    formulation: str
    horizon: float
    control: StepControl
    cap: float | None
    r: float
    sample_interval: float | None
    seed: int
    base_dir: Path

    def initial_fields(self) -> tuple[ScalarField, ScalarField]:
        u0 = generators.materialize(self.tree["u0"], self.grid, self.seed)
        v0 = generators.materialize(self.tree["v0"], self.grid, self.seed + 1)
        return ScalarField(self.grid, u0), ScalarField(self.grid, v0)

    def output_path(self, key: str) -> Path:
        out = self.tree["output"]
        return self.base_dir / out["dir"] / out[key]


@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    axes: dict
    limit: int
    workers: int

    def points(self) -> list[dict]:
        """Axis assignments in row-major order of the cartesian product."""
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]


def _resolve_paths(tree: dict, base_dir: Path):
    for key in ("u0", "v0"):
        spec = tree[key]
        if spec["kind"] == "from-snapshot":
            spec["path"] = str((base_dir / spec["path"]).resolve())


def build_scenario(tree: dict, base_dir: Path | str = ".") -> ScenarioConfig:
    """Validate a (possibly partial) scenario tree and apply defaults."""
    base_dir = Path(base_dir)
    tree = _fill(SCHEMA, tree, "")
    _resolve_paths(tree, base_dir)
    g, p = tree["grid"], tree["params"]
    if g["nx"] < 3 or g["ny"] < 3:
        raise ConfigError("grid", "grid needs at least 3 cells per axis")
    for k in ("lx", "ly"):
        if not g[k] > 0:
            raise ConfigError(f"grid.{k}", "side lengths must be positive")
    if not p["chi"] > 0:
        raise ConfigError("params.chi", "chi must be > 0")
    if not 0 < p["gamma"] < 1:
        raise ConfigError("params.gamma", "gamma must lie in (0,1)")
    if not 0 < p["beta"] <= 1:
        raise ConfigError("params.beta", "beta must lie in (0,1]")
    if not 0 < p["v_floor"] <= 1e-8:
        raise ConfigError("params.v_floor", "v_floor must lie in (0, 1e-8]")
    if p["consumption"] not in _CONSUMPTION_LAWS:
        raise ConfigError("params.consumption", f"unknown consumption law {p['consumption']!r}")
    if tree["formulation"] not in FORMULATIONS:
        raise ConfigError("formulation", f"expected one of {list(FORMULATIONS)}")
    if not tree["horizon"] > 0:
        raise ConfigError("horizon", "horizon must be positive")
    try:
        control = StepControl(**tree["control"])
    except ValueError as e:
        raise ConfigError("control", str(e)) from None
    mon = tree["monitor"]
    if not mon["r"] > 2:
        raise ConfigError("monitor.r", "r must be > 2")
    if mon["cap"] is not None and not mon["cap"] > 0:
        raise ConfigError("monitor.cap", "cap must be positive")
    si = tree["sample_interval"]
    if si is not None and not si > 0:
        raise ConfigError("sample_interval", "sample interval must be positive")
    c = tree["constants"]
    if c["c_gn"] is not None and not c["c_gn"] > 0:
        raise ConfigError("constants.c_gn", "C_GN must be positive")
    if c["c_s"] is not None and not c["c_s"] > 0:
        raise ConfigError("constants.c_s", "C_S must be positive")
    if c["calibration_samples"] < 100:
        raise ConfigError("constants.calibration_samples", "at least 100 samples required")
    grid = Grid(g["nx"], g["ny"], g["lx"], g["ly"])
    cfg = ScenarioConfig(
        tree=tree, grid=grid,
        params=ModelParams(p["chi"], p["gamma"], p["beta"], p["v_floor"], consumption=p["consumption"]),
        formulation=tree["formulation"], horizon=tree["horizon"], control=control,
        cap=mon["cap"], r=mon["r"], sample_interval=si, seed=tree["seed"], base_dir=base_dir)
    try:
        u0, v0 = cfg.initial_fields()
    except (OSError, ValueError) as e:
        raise ConfigError("u0/v0", f"cannot materialize initial data: {e}") from None
    if not (np.all(np.isfinite(u0.values)) and np.all(np.isfinite(v0.values))):
        raise ConfigError("u0/v0", "initial data must be finite")
    if np.min(u0.values) < 0:
        raise ConfigError("u0", "u₀ ≥ 0 required")
    if not np.min(v0.values) > 0:
        raise ConfigError("v0", "v₀ > 0 required")
    return cfg


def set_path(tree: dict, path: str, value):
    """Set ``a.b.c`` in a nested dict, creating intermediate mappings."""
    keys = path.split(".")
    node = tree
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(path, f"{k} is not a mapping")
        node = nxt
    node[keys[-1]] = value


def load_tree(text: str) -> dict:
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("", f"malformed config: {e}") from None
    if tree is None:
        tree = {}
    _check_mapping(tree, "<root>")
    return tree


def parse_config(text: str, overrides: dict | None = None,
                 base_dir: Path | str = ".") -> ScenarioConfig | SweepConfig:
    """Parse a YAML document; ``overrides`` maps key paths to values applied first."""
    tree = load_tree(text)
    for path, value in (overrides or {}).items():
        set_path(tree, path, value)
    sweep = tree.pop("sweep", None)
    base = build_scenario(tree, base_dir)
    if sweep is None:
        return base
    s = _fill(SWEEP_SCHEMA, sweep, "sweep")
    axes = _axes(s["axes"], "sweep.axes")
    if s["workers"] < 1:
        raise ConfigError("sweep.workers", "workers must be >= 1")
    size = int(np.prod([len(v) for v in axes.values()])) if axes else 1
    if size > s["limit"]:
        raise ConfigError("sweep.axes", f"{size} points exceed the limit of {s['limit']}")
    return SweepConfig(base, axes, s["limit"], s["workers"])


def point_tree(base: ScenarioConfig, point: dict) -> dict:
    """Scenario tree for one sweep point."""
    tree = copy.deepcopy(base.tree)
    for k, v in point.items():
        if k in ("chi", "gamma", "beta"):
            tree["params"][k] = v
        elif k == "v0_amplitude":
            spec = tree["v0"]
            if spec["kind"] == "constant":
                spec["value"] = v
            else:
                spec["amplitude"] = v
        elif k == "u0_mass":
            tree["u0"]["mass"] = v
    return tree


def load_config(path, overrides: dict | None = None) -> ScenarioConfig | SweepConfig:
    path = Path(path)
    return parse_config(path.read_text(), overrides, base_dir=path.parent)

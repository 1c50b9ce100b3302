"""Finite-volume chemotaxis-consumption simulator with singular sensitivity.

Submodules: ``mesh`` (grid, operators, norms), ``model`` (parameters and
right-hand sides), ``stepper`` (time integration and blow-up monitor),
``functionals`` (diagnostics, constants, audits) and ``harness``
(configuration, runs, sweeps, file formats, CLI).
"""
from .mesh import FaceFlux, FieldError, Grid, ScalarField, integrate, norm
from .model import ModelParams, register_consumption, rhs_original, rhs_transformed, v_to_w, w_to_v
from .stepper import RunStatus, SimState, StatusKind, StepControl, advance_to, step

__all__ = [
    "FaceFlux", "FieldError", "Grid", "ScalarField", "integrate", "norm",
    "ModelParams", "register_consumption", "rhs_original", "rhs_transformed", "v_to_w", "w_to_v",
    "RunStatus", "SimState", "StatusKind", "StepControl", "advance_to", "step",
]

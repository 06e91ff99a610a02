"""Spectral simulation of the fractional stochastic heat system."""

from .coefficients import PRESETS, CoefficientSet, check_preset, preset
from .grid import SolverGrid
from .noise import NoiseRealization, generate_noise, noise_row, standard_normals
from .solver import (
    COUPLINGS,
    FieldSample,
    ModelSpec,
    Recording,
    batch_solve,
    default_workers,
    final_time,
    iter_batch_solve,
    mode_variance,
    solve,
    solve_additive_exact,
    stack_values,
)

__all__ = [
    "PRESETS", "COUPLINGS", "CoefficientSet", "check_preset", "preset", "SolverGrid", "NoiseRealization",
    "generate_noise", "noise_row", "standard_normals", "FieldSample", "ModelSpec", "Recording", "batch_solve",
    "default_workers", "final_time", "iter_batch_solve", "mode_variance", "solve", "solve_additive_exact", "stack_values",
]

"""Monotonic optimal control of molecular alignment with spectral filters.

The package optimizes a nonresonant control envelope E(t) driving a
linear rigid rotor toward a maximal-alignment target, with a guaranteed
cost increase at every iteration even when the field is projected onto
an experimentally realizable spectral shape after each update.
"""

from .config import ExperimentConfig, parse_config, parse_config_text, \
    preset_config, PRESETS
from .errors import BasisTooSmallError, ConfigError, DegenerateTargetError, \
    FileFormatError, InvalidFieldError, MonotonicityError, OctalignError
from .filters import FilterSpec, apply_filter, band_pass_filter, \
    identity_filter, out_of_band_energy, pixelation_filter, spectrum_of
from .optimize import CostParams, IterationRecord, OptimizationResult, \
    OptimizeOptions, cost, optimize_experiment, run_loop
from .propagate import FieldGrid, TimeGrid, expectation_cos2, \
    gaussian_pulse, propagate_backward, propagate_forward, zero_field
from .rotor import CO, MoleculeParams, RotorBasis, TargetSpec, \
    build_operators, hamiltonian, target_alignment, target_pure
from .runner import build_problem, constants_report, filter_field_file, \
    final_filter_report, run
from .thermal import BoltzmannPopulations, ThermalTarget, boltzmann_init, \
    thermal_plan, thermal_projection, thermal_target

__version__ = "0.1.0"

__all__ = [
    "BasisTooSmallError", "BoltzmannPopulations", "CO", "ConfigError",
    "CostParams", "DegenerateTargetError", "ExperimentConfig", "FieldGrid",
    "FileFormatError", "FilterSpec", "InvalidFieldError", "IterationRecord",
    "MoleculeParams", "MonotonicityError", "OctalignError",
    "OptimizationResult", "OptimizeOptions", "PRESETS", "RotorBasis",
    "TargetSpec", "ThermalTarget", "TimeGrid", "apply_filter",
    "band_pass_filter", "boltzmann_init", "build_operators",
    "build_problem", "constants_report", "cost", "expectation_cos2",
    "filter_field_file", "final_filter_report", "gaussian_pulse",
    "hamiltonian", "identity_filter", "optimize_experiment",
    "out_of_band_energy", "parse_config", "parse_config_text",
    "pixelation_filter", "preset_config", "propagate_backward",
    "propagate_forward", "run", "run_loop", "spectrum_of",
    "target_alignment", "target_pure", "thermal_plan",
    "thermal_projection", "thermal_target", "zero_field",
]

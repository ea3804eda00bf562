"""Experiment orchestration: problem assembly, runs, reports, file output."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig
from .engine import build_pure_plan, cos2_trace, propagate_projection
from .errors import BasisTooSmallError, ConfigError, OctalignError
from .filters import apply_filter, out_of_band_energy, spectrum_of
from .optimize import OptimizationResult, run_loop
from .propagate import gaussian_pulse
from .rotor import CO, RotorBasis, TargetSpec, build_operators, target_pure
from .thermal import thermal_plan
from .units import angular_au_to_thz, au_to_ps, energy_to_wavenumber, \
    AU_TIME_SECONDS

# largest tolerated thermal population outside the retained basis
DROPPED_MASS_LIMIT = 1e-6


def build_problem(config: ExperimentConfig):
    """Resolve a config into (plan, trial, filter_spec, cost, opts)."""
    params = config.params
    spec = TargetSpec(j_opt=config.j_opt, m=config.target_m)
    if config.temperature == 0.0:
        if config.target_m != 0:
            raise ConfigError(
                "target.m must be 0: the zero-temperature initial state "
                "is |j=0, m=0> and m is conserved")
        ops = build_operators(RotorBasis(j_max=config.j_max, m=0))
        psi0 = np.zeros(ops.dim, dtype=complex)
        psi0[0] = 1.0
        chi = target_pure(ops, spec)
        plan = build_pure_plan(ops, params, psi0, chi)
    else:
        plan, _ = thermal_plan(params, config.j_max, spec,
                               config.temperature)
    if plan.dropped_mass >= DROPPED_MASS_LIMIT:
        raise BasisTooSmallError(
            f"thermal population {plan.dropped_mass:.3e} outside the "
            f"retained basis exceeds {DROPPED_MASS_LIMIT:.0e}; "
            "increase basis.j_max")
    trial = gaussian_pulse(config.grid, amplitude=config.trial_amplitude,
                           fwhm=config.trial_fwhm,
                           center=config.trial_center)
    return plan, trial, config.filter_spec, config.cost, config.opts


def _mu_summary(history):
    mus = [r.mu for r in history if r.k > 0]
    if not mus:
        return "no iterations"
    zero_run = 0
    for m in mus:
        if m != 0.0:
            break
        zero_run += 1
    return (f"mu zero for first {zero_run}/{len(mus)} iterations, "
            f"final mu {mus[-1]:.6g}")


def final_filter_report(plan, result: OptimizationResult, filter_spec):
    """Apply the filter once to the final field; report both sides."""
    filtered = apply_filter(result.field, filter_spec)
    post_proj, _ = propagate_projection(plan, filtered)
    return filtered, {
        "projection_pre": result.projection,
        "projection_post": float(post_proj),
        "out_of_band_pre": out_of_band_energy(result.field, filter_spec),
        "out_of_band_post": out_of_band_energy(filtered, filter_spec),
    }


def _summary_text(config, result, report):
    final = result.history[-1]
    lines = [
        f"iterations: {result.iterations}",
        f"converged: {result.converged}",
        f"final cost J: {final.cost:.6g}",
        f"final projection: {final.projection:.6g}",
        f"mu trajectory: {_mu_summary(result.history)}",
        f"projection after final filtering: "
        f"{report['projection_post']:.6g}",
        f"out-of-band energy before/after final filtering: "
        f"{report['out_of_band_pre']:.6g} / "
        f"{report['out_of_band_post']:.6g}",
        f"dropped thermal population: {result.dropped_mass:.3e}",
        f"max population in the two highest j levels: "
        f"{result.max_top_population:.3e}",
        f"max cubic residual: {result.max_cubic_residual:.3e}",
    ]
    return "\n".join(lines) + "\n"


def run(config: ExperimentConfig, out_dir) -> tuple:
    """Execute the optimization and emit the full file set.

    Returns (result, report).  On an optimization error the iterations
    completed so far are still written before the error propagates.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan, trial, filter_spec, cost_params, opts = build_problem(config)
    try:
        result = run_loop(plan, trial, filter_spec, cost_params, opts)
    except OctalignError as err:
        history = getattr(err, "history", ())
        if history:
            io.write_history(out / "iterations.csv", history)
        (out / "summary.txt").write_text(f"error: {err}\n")
        raise
    filtered, report = final_filter_report(plan, result, filter_spec)
    io.write_history(out / "iterations.csv", result.history)
    io.write_field(out / "field_final.csv", result.field)
    io.write_field(out / "field_final_filtered.csv", filtered)
    io.write_trace(out / "cos2_trace.csv", config.grid,
                   cos2_trace(plan, result.field))
    io.write_spectrum(out / "spectrum_final.csv", spectrum_of(result.field))
    io.write_spectrum(out / "spectrum_final_filtered.csv",
                      spectrum_of(filtered))
    (out / "summary.txt").write_text(_summary_text(config, result, report))
    return result, report


def filter_field_file(in_path, filter_spec, out_path):
    """Apply a filter once to a stored field; returns the energy report."""
    field = io.read_field(in_path)
    filtered = apply_filter(field, filter_spec)
    io.write_field(out_path, filtered)
    return {
        "out_of_band_before": out_of_band_energy(field, filter_spec),
        "out_of_band_after": out_of_band_energy(filtered, filter_spec),
    }


def spectrum_file(in_path, out_path):
    field = io.read_field(in_path)
    io.write_spectrum(out_path, spectrum_of(field))


def constants_report(params=CO) -> str:
    """Derived molecular constants, each given along two unit paths."""
    b = params.b
    t_per = math.pi / b
    t_per_ps = au_to_ps(t_per)
    t_per_s = t_per * AU_TIME_SECONDS
    lines = [
        f"rotational constant B: {b:.9e} au "
        f"({energy_to_wavenumber(b):.6g} cm-1)",
        f"rotational period t_per = pi/B: {t_per:.9e} au",
        f"  = {t_per_ps:.9g} ps (via ps conversion)",
        f"  = {t_per_s * 1e12:.9g} ps (via seconds)",
        "Raman transition frequencies w(j -> j+2) = (4j+6)B:",
    ]
    for j in range(0, 9, 2):
        w = (4 * j + 6) * b
        lines.append(f"  j={j}: {angular_au_to_thz(w):.6g} THz "
                     f"({energy_to_wavenumber(w):.6g} cm-1)")
    lines.append("filter band centers (units of B):")
    for mult in (4, 10, 26):
        w = mult * b
        lines.append(f"  {mult}B: {angular_au_to_thz(w):.6g} THz "
                     f"({energy_to_wavenumber(w):.6g} cm-1)")
    return "\n".join(lines) + "\n"

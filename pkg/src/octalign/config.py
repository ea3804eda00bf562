"""Experiment configuration: INI parsing, validation, bundled presets.

A configuration is a flat INI document.  Dimensional values may carry a
unit suffix ("10 t_per", "3 ps", "7.28 THz", "37.5 TW/cm2"); bare numbers
are atomic units (kelvin for temperatures).  Frequencies given in units
of "B" are resolved against the molecule's rotational constant.
"""

from __future__ import annotations

import math
from configparser import ConfigParser, Error as IniError
from dataclasses import dataclass

from .errors import ConfigError
from .filters import FilterSpec, band_pass_filter, identity_filter, \
    pixelation_filter
from .optimize import CostParams, OptimizeOptions
from .propagate import TimeGrid
from .rotor import CO, MoleculeParams
from .units import intensity_to_field, ps_to_au, fs_to_au, \
    thz_to_angular_au, wavenumber_to_energy


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved, validated experiment description (atomic units)."""

    params: MoleculeParams
    j_max: int
    grid: TimeGrid
    temperature: float
    j_opt: int
    target_m: int
    trial_amplitude: float
    trial_fwhm: float
    trial_center: float
    filter_spec: FilterSpec
    cost: CostParams
    opts: OptimizeOptions

    @property
    def t_per(self) -> float:
        return math.pi / self.params.b


def _split_unit(text):
    parts = text.split()
    if len(parts) == 1:
        return parts[0], ""
    if len(parts) == 2:
        return parts[0], parts[1]
    return None, None


def _number(text, where):
    value, unit = _split_unit(text)
    if value is None or unit:
        raise ConfigError(f"{where}: expected a bare number, got {text!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{where}: not a number: {text!r}")


def _value_unit(text, where, units):
    value, unit = _split_unit(text)
    if value is None:
        raise ConfigError(f"{where}: cannot parse {text!r}")
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{where}: not a number: {value!r}")
    if unit not in units:
        allowed = ", ".join(u or "<none>" for u in units)
        raise ConfigError(f"{where}: unit must be one of [{allowed}], "
                          f"got {text!r}")
    return v, unit


def _time(text, where, t_per, t_f=None):
    units = ("", "au", "ps", "fs", "t_per") + (("t_f",) if t_f else ())
    v, unit = _value_unit(text, where, units)
    if unit == "ps":
        return ps_to_au(v)
    if unit == "fs":
        return fs_to_au(v)
    if unit == "t_per":
        return v * t_per
    if unit == "t_f":
        return v * t_f
    return v


def _frequency(text, where, b):
    v, unit = _value_unit(text, where, ("", "au", "THz", "B"))
    if unit == "THz":
        return thz_to_angular_au(v)
    if unit == "B":
        return v * b
    return v


class _Ini:
    """ConfigParser wrapper that reports errors as section.key."""

    def __init__(self, text, origin):
        self.origin = origin
        self.cp = ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=origin)
        except IniError as err:
            raise ConfigError(f"{origin}: {err}")
        self.seen = set()

    def get(self, section, key, default=None):
        self.seen.add((section, key))
        if not self.cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"{self.origin}: missing {section}.{key}")
            return default
        return self.cp.get(section, key).strip()

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def check_unknown(self):
        for section in self.cp.sections():
            for key in self.cp.options(section):
                if (section, key) not in self.seen:
                    raise ConfigError(
                        f"{self.origin}: unknown key {section}.{key}")


def _parse_molecule(ini):
    name = ini.get("molecule", "name", default="")
    if name:
        if name != "CO":
            raise ConfigError(f"{ini.origin}: molecule.name: unknown "
                              f"molecule {name!r}; only CO is bundled")
        return CO
    b_text = ini.get("molecule", "b")
    v, unit = _value_unit(b_text, "molecule.b", ("", "au", "cm-1"))
    b = wavenumber_to_energy(v) if unit == "cm-1" else v
    a_par = _number(ini.get("molecule", "alpha_par"), "molecule.alpha_par")
    a_perp = _number(ini.get("molecule", "alpha_perp"), "molecule.alpha_perp")
    try:
        return MoleculeParams(b=b, alpha_par=a_par, alpha_perp=a_perp)
    except ValueError as err:
        raise ConfigError(f"{ini.origin}: molecule: {err}")


def _parse_filter(ini, b):
    kind = ini.get("filter", "type", default="identity")
    try:
        if kind == "identity":
            return identity_filter()
        if kind == "band_pass":
            text = ini.get("filter", "bands")
            bands = []
            for part in text.split(","):
                part = part.strip()
                if not part:
                    continue
                pieces = part.split(":")
                if len(pieces) != 2:
                    raise ConfigError(
                        f"{ini.origin}: filter.bands: expected "
                        f"center:width pairs in units of B, got {part!r}")
                bands.append((float(pieces[0]) * b, float(pieces[1]) * b))
            return band_pass_filter(bands)
        if kind == "pixelation":
            n_pixels = int(_number(ini.get("filter", "pixels"),
                                   "filter.pixels"))
            bw = _frequency(ini.get("filter", "bandwidth"),
                            "filter.bandwidth", b)
            return pixelation_filter(n_pixels, bw)
    except ValueError as err:
        raise ConfigError(f"{ini.origin}: filter: {err}")
    raise ConfigError(f"{ini.origin}: filter.type: unknown type {kind!r}")


def _parse_trial(ini, t_per, t_f):
    has_amp = ini.has("trial", "amplitude")
    has_int = ini.has("trial", "intensity")
    if has_amp == has_int:
        raise ConfigError(f"{ini.origin}: trial: give exactly one of "
                          "trial.amplitude or trial.intensity")
    if has_amp:
        amp = _number(ini.get("trial", "amplitude"), "trial.amplitude")
    else:
        v, unit = _value_unit(ini.get("trial", "intensity"),
                              "trial.intensity", ("W/cm2", "TW/cm2"))
        amp = intensity_to_field(v * (1e12 if unit == "TW/cm2" else 1.0))
    fwhm = _time(ini.get("trial", "fwhm"), "trial.fwhm", t_per)
    center_text = ini.get("trial", "center", default="0.5 t_f")
    center = _time(center_text, "trial.center", t_per, t_f=t_f)
    if amp <= 0.0:
        raise ConfigError(f"{ini.origin}: trial.amplitude must be positive")
    if fwhm <= 0.0:
        raise ConfigError(f"{ini.origin}: trial.fwhm must be positive")
    if not 0.0 < center < t_f:
        raise ConfigError(f"{ini.origin}: trial.center must lie inside "
                          "the control window")
    return amp, fwhm, center


def parse_config_text(text, origin="<config>") -> ExperimentConfig:
    ini = _Ini(text, origin)
    params = _parse_molecule(ini)
    t_per = math.pi / params.b

    j_max = int(_number(ini.get("basis", "j_max"), "basis.j_max"))
    t_f = _time(ini.get("grid", "t_f"), "grid.t_f", t_per)
    n_steps = int(_number(ini.get("grid", "n_steps"), "grid.n_steps"))
    if t_f <= 0.0:
        raise ConfigError(f"{origin}: grid.t_f must be positive")
    if n_steps < 2:
        raise ConfigError(f"{origin}: grid.n_steps must be at least 2")
    grid = TimeGrid(t_f=t_f, n_steps=n_steps)

    temp_text = ini.get("initial", "temperature", default="0")
    temperature, _ = _value_unit(temp_text, "initial.temperature",
                                 ("", "K"))
    if temperature < 0.0:
        raise ConfigError(f"{origin}: initial.temperature must be >= 0")

    j_opt = int(_number(ini.get("target", "j_opt"), "target.j_opt"))
    target_m = int(_number(ini.get("target", "m", default="0"), "target.m"))
    if j_opt < 2:
        raise ConfigError(f"{origin}: target.j_opt must be at least 2 "
                          "(two rotational levels per parity)")
    if j_opt > j_max:
        raise ConfigError(f"{origin}: target.j_opt exceeds basis.j_max")
    if abs(target_m) > j_opt:
        raise ConfigError(f"{origin}: target.m exceeds target.j_opt")

    amp, fwhm, center = _parse_trial(ini, t_per, t_f)
    filter_spec = _parse_filter(ini, params.b)

    lambda0 = _number(ini.get("cost", "lambda0", default="1"),
                      "cost.lambda0")
    eta = _number(ini.get("cost", "eta", default="1"), "cost.eta")
    try:
        cost = CostParams(lambda0=lambda0, eta=eta)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"{origin}: cost: {err}")

    kw = {}
    kw["max_iters"] = int(_number(ini.get("optimize", "max_iters"),
                                  "optimize.max_iters"))
    kw["mu_strategy"] = ini.get("optimize", "mu_strategy",
                                default="dichotomy")
    for key in ("stop_tol", "stop_count", "mu_slack", "fp_tol", "fp_max",
                "poly_degree", "poly_samples", "poly_frac"):
        if ini.has("optimize", key):
            raw = _number(ini.get("optimize", key), f"optimize.{key}")
            if key in ("stop_count", "fp_max", "poly_degree",
                       "poly_samples"):
                raw = int(raw)
            kw[key] = raw
    opts = OptimizeOptions(**kw)
    if opts.mu_strategy == "none" and filter_spec.kind != "identity":
        raise ConfigError(f"{origin}: optimize.mu_strategy = none requires "
                          "filter.type = identity")

    ini.check_unknown()
    return ExperimentConfig(
        params=params, j_max=j_max, grid=grid, temperature=temperature,
        j_opt=j_opt, target_m=target_m, trial_amplitude=amp,
        trial_fwhm=fwhm, trial_center=center, filter_spec=filter_spec,
        cost=cost, opts=opts)


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}")
    return parse_config_text(text, origin=str(path))


_BASE_31 = """\
[molecule]
name = CO
[basis]
j_max = 16
[grid]
t_f = 10 t_per
n_steps = 16384
[initial]
temperature = 0
[target]
j_opt = 2
m = 0
[trial]
amplitude = 0.012
fwhm = 3 ps
[cost]
lambda0 = 1
eta = 1
"""

_BASE_32 = """\
[molecule]
name = CO
[basis]
j_max = 22
[grid]
t_f = 1 t_per
n_steps = 512
[target]
j_opt = 8
[trial]
intensity = 37.5 TW/cm2
fwhm = {fwhm}
[cost]
lambda0 = 1
eta = 1
[filter]
type = pixelation
bandwidth = 7.28 THz
pixels = {pixels}
[optimize]
mu_strategy = polyfit
max_iters = 500
[initial]
temperature = {temperature}
"""

PRESETS = {
    "paper-3.1": _BASE_31 + """\
[filter]
type = band_pass
bands = 4:0.5, 10:0.5, 26:0.5
[optimize]
mu_strategy = dichotomy
max_iters = 400
""",
    "paper-3.1-standard": _BASE_31 + """\
[filter]
type = identity
[optimize]
mu_strategy = none
max_iters = 200
""",
    "paper-3.2-5K-64px": _BASE_32.format(
        temperature=5, pixels=64, fwhm="1 ps"),
    "paper-3.2-5K-128px": _BASE_32.format(
        temperature=5, pixels=128, fwhm="1 ps"),
    "paper-3.2-5K-256px": _BASE_32.format(
        temperature=5, pixels=256, fwhm="1 ps"),
    "paper-3.2-7K-128px": _BASE_32.format(
        temperature=7, pixels=128, fwhm="0.475 ps"),
    "paper-3.2-10K-128px": _BASE_32.format(
        temperature=10, pixels=128, fwhm="1 ps"),
}


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; available: {known}")
    return parse_config_text(PRESETS[name], origin=f"<preset {name}>")

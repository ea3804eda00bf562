"""Unit conversions between atomic units and laboratory units.

All internal computation uses Hartree atomic units (hbar = m_e = e = a0 = 1).
Frequencies handled as *angular* frequencies unless a name says otherwise.
"""

from __future__ import annotations

import math

# CODATA-derived conversion factors.
CM1_PER_HARTREE = 219474.6313632       # wavenumbers per Hartree
AU_TIME_SECONDS = 2.4188843265857e-17  # one atomic time unit in seconds
BOLTZMANN_EH_PER_K = 3.166811563e-6    # Boltzmann constant, Hartree per kelvin
SPEED_OF_LIGHT_CM_S = 2.99792458e10
# Intensity of a plane wave whose peak electric field is 1 au,
# I = (1/2) eps0 c E^2, expressed in W/cm^2.
ATOMIC_INTENSITY_W_CM2 = 3.50944758e16

PS_TO_AU = 1e-12 / AU_TIME_SECONDS
FS_TO_AU = 1e-15 / AU_TIME_SECONDS


def wavenumber_to_energy(cm1: float) -> float:
    """Convert a spectroscopic constant in cm^-1 to Hartree."""
    return cm1 / CM1_PER_HARTREE


def energy_to_wavenumber(hartree: float) -> float:
    return hartree * CM1_PER_HARTREE


def ps_to_au(t_ps: float) -> float:
    return t_ps * PS_TO_AU


def au_to_ps(t_au: float) -> float:
    return t_au / PS_TO_AU


def fs_to_au(t_fs: float) -> float:
    return t_fs * FS_TO_AU


def intensity_to_field(i_w_cm2: float) -> float:
    """Peak electric field amplitude (au) of a pulse with peak intensity I.

    Uses the cycle-averaged relation I = (1/2) eps0 c E^2, i.e. the
    amplitude convention E = sqrt(I / I_atomic).
    """
    if i_w_cm2 < 0.0:
        raise ValueError("intensity must be non-negative")
    return math.sqrt(i_w_cm2 / ATOMIC_INTENSITY_W_CM2)


def field_to_intensity(e_au: float) -> float:
    return e_au * e_au * ATOMIC_INTENSITY_W_CM2


def thz_to_angular_au(f_thz: float) -> float:
    """Ordinary frequency in THz -> angular frequency in au (rad per au time)."""
    return 2.0 * math.pi * f_thz * 1e12 * AU_TIME_SECONDS


def angular_au_to_thz(w_au: float) -> float:
    return w_au / (2.0 * math.pi * 1e12 * AU_TIME_SECONDS)


def kelvin_to_energy(t_kelvin: float) -> float:
    """Thermal energy k_B * T in Hartree."""
    if t_kelvin < 0.0:
        raise ValueError("temperature must be non-negative")
    return t_kelvin * BOLTZMANN_EH_PER_K

"""Spectral analysis and the two field-filter families.

Filters act on the envelope itself, not on its square.  The transform
pair is the plain DFT over the first n_steps samples (the last grid
sample is the periodic image of the first): forward unscaled, inverse
carrying the 1/n factor.  Frequencies are angular, in atomic units, on
the grid k * 2*pi/t_f.

Both filter kinds are linear projections in the frequency domain:
band-pass keeps a fixed set of bins, pixelation replaces every bin of a
pixel by the pixel's complex mean.  The zero-frequency bin is never
averaged (its mirror image is itself, so mixing it into a pixel would
break the reality of the output); the Nyquist bin, when present, is
kept only when the bandwidth reaches it and is never averaged, for the
same reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .propagate import FieldGrid, TimeGrid


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    bands: tuple = ()            # (center, width) pairs, angular au
    n_pixels: int = 0
    bandwidth: float = 0.0       # angular au

    def __post_init__(self):
        if self.kind not in ("band_pass", "pixelation", "identity"):
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        if self.kind == "band_pass":
            if not self.bands:
                raise ConfigError("band_pass filter needs at least one band")
            if self.n_pixels or self.bandwidth:
                raise ConfigError("pixel parameters are not valid for band_pass")
            for c, w in self.bands:
                if c <= 0.0 or w <= 0.0:
                    raise ConfigError("band centers and widths must be positive")
        elif self.kind == "pixelation":
            if self.bands:
                raise ConfigError("bands are not valid for pixelation")
            if self.n_pixels < 1:
                raise ConfigError("pixelation needs n_pixels >= 1")
            if self.bandwidth <= 0.0:
                raise ConfigError("pixelation needs a positive bandwidth")
        elif self.bands or self.n_pixels or self.bandwidth:
            raise ConfigError("identity filter takes no parameters")


def band_pass_filter(bands) -> FilterSpec:
    return FilterSpec(kind="band_pass", bands=tuple((float(c), float(w))
                                                    for c, w in bands))


def pixelation_filter(n_pixels: int, bandwidth: float) -> FilterSpec:
    return FilterSpec(kind="pixelation", n_pixels=int(n_pixels),
                      bandwidth=float(bandwidth))


def identity_filter() -> FilterSpec:
    return FilterSpec(kind="identity")


@dataclass(frozen=True)
class Spectrum:
    """One-sided DFT of a sampled envelope.

    amplitudes[k] is the unscaled forward coefficient at frequencies[k];
    the inverse transform divides by n_samples.  Conjugate symmetry of
    the implied two-sided spectrum is automatic for real input.
    """

    frequencies: np.ndarray      # angular au, k * 2*pi/t_f
    amplitudes: np.ndarray       # complex
    n_samples: int
    dt: float


def spectrum_of(field: FieldGrid) -> Spectrum:
    n = field.grid.n_steps
    amp = np.fft.rfft(field.values[:n])
    freq = np.arange(amp.size) * (2.0 * np.pi / field.grid.t_f)
    return Spectrum(frequencies=freq, amplitudes=amp, n_samples=n,
                    dt=field.grid.dt)


def inverse_spectrum(spec: Spectrum, grid: TimeGrid) -> FieldGrid:
    if grid.n_steps != spec.n_samples:
        raise ConfigError("spectrum length does not match the time grid")
    v = np.fft.irfft(spec.amplitudes, n=spec.n_samples)
    out = np.empty(spec.n_samples + 1)
    out[:-1] = v
    out[-1] = v[0]
    return FieldGrid(grid, out)


def _bandpass_mask(n_bins: int, d_omega: float, omega_nyq: float,
                   bands) -> np.ndarray:
    """Bin keep-mask with band edges snapped to the nearest bin, inclusive."""
    mask = np.zeros(n_bins, dtype=bool)
    for center, width in bands:
        lo = center - 0.5 * width
        hi = center + 0.5 * width
        if lo > omega_nyq:
            raise ConfigError(
                f"band at {center:g} au lies entirely above the Nyquist "
                f"frequency {omega_nyq:g} au")
        i_lo = max(int(round(lo / d_omega)), 0)
        i_hi = min(int(round(hi / d_omega)), n_bins - 1)
        mask[i_lo:i_hi + 1] = True
    return mask


def _pixel_average(amp: np.ndarray, n: int, n_pixels: int,
                   bandwidth: float, omega_nyq: float,
                   d_omega: float) -> np.ndarray:
    if bandwidth > omega_nyq * (1.0 + 1e-12):
        raise ConfigError(
            f"pixelation bandwidth {bandwidth:g} au exceeds the Nyquist "
            f"frequency {omega_nyq:g} au")
    out = amp.copy()
    top = (n - 1) // 2                       # last plain positive bin
    sums = np.zeros(n_pixels, dtype=complex)
    counts = np.zeros(n_pixels, dtype=int)
    pix = np.empty(top + 1, dtype=int)
    for i in range(1, top + 1):
        w = i * d_omega
        if w > bandwidth * (1.0 + 1e-12):
            out[i] = 0.0
            pix[i] = -1
            continue
        p = min(int(w * n_pixels / bandwidth), n_pixels - 1)
        pix[i] = p
        sums[p] += amp[i]
        counts[p] += 1
    for i in range(1, top + 1):
        if pix[i] >= 0:
            out[i] = sums[pix[i]] / counts[pix[i]]
    if n % 2 == 0:                           # Nyquist bin exists
        if bandwidth < omega_nyq * (1.0 - 1e-12):
            out[n // 2] = 0.0
    return out


def apply_filter(field: FieldGrid, spec: FilterSpec) -> FieldGrid:
    """F(E).  The identity kind copies the samples without a transform."""
    if spec.kind == "identity":
        return FieldGrid(field.grid, field.values.copy())
    n = field.grid.n_steps
    d_omega = 2.0 * np.pi / field.grid.t_f
    omega_nyq = np.pi / field.grid.dt
    amp = np.fft.rfft(field.values[:n])
    if spec.kind == "band_pass":
        mask = _bandpass_mask(amp.size, d_omega, omega_nyq, spec.bands)
        amp = np.where(mask, amp, 0.0)
    else:
        amp = _pixel_average(amp, n, spec.n_pixels, spec.bandwidth,
                             omega_nyq, d_omega)
    v = np.fft.irfft(amp, n=n)
    out = np.empty(n + 1)
    out[:-1] = v
    out[-1] = v[0]
    return FieldGrid(field.grid, out)


def apply_bandpass(field: FieldGrid, spec: FilterSpec) -> FieldGrid:
    if spec.kind != "band_pass":
        raise ConfigError("apply_bandpass needs a band_pass filter spec")
    return apply_filter(field, spec)


def apply_pixelation(field: FieldGrid, spec: FilterSpec) -> FieldGrid:
    if spec.kind != "pixelation":
        raise ConfigError("apply_pixelation needs a pixelation filter spec")
    return apply_filter(field, spec)


def out_of_band_energy(field: FieldGrid, spec: FilterSpec) -> float:
    """||E - F(E)||^2 / ||E||^2 over one period of samples; 0 for E = 0."""
    n = field.grid.n_steps
    e = field.values[:n]
    den = float(np.dot(e, e))
    if den == 0.0:
        return 0.0
    d = e - apply_filter(field, spec).values[:n]
    return float(np.dot(d, d)) / den

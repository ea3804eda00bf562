"""Reference time propagation on a uniform grid.

The field envelope is held constant over each step at its left grid
value and every step applies the exact exponential of the instantaneous
Hamiltonian, computed by dense eigendecomposition.  This route is the
readable ground truth; the optimization loop runs a numerically
identical compiled path (see engine/kernels) that is checked against
this one in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidFieldError
from .rotor import MoleculeParams, RotorOperators, hamiltonian


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_n = n*dt, n = 0 .. n_steps, with t_f = n_steps*dt."""

    t_f: float
    n_steps: int

    def __post_init__(self):
        if self.t_f <= 0.0:
            raise ValueError("t_f must be positive")
        if self.n_steps < 2:
            raise ValueError("need at least two steps")

    @property
    def dt(self) -> float:
        return self.t_f / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class FieldGrid:
    """Real control envelope sampled on a TimeGrid (atomic units)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_steps + 1,):
            raise InvalidFieldError(
                f"field length {v.shape} does not match grid "
                f"({self.grid.n_steps + 1} samples)")
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("field contains non-finite values")
        object.__setattr__(self, "values", v)


def zero_field(grid: TimeGrid) -> FieldGrid:
    return FieldGrid(grid, np.zeros(grid.n_steps + 1))


def gaussian_pulse(grid: TimeGrid, amplitude: float, fwhm: float,
                   center: float | None = None) -> FieldGrid:
    """Gaussian envelope amplitude*exp(-4 ln2 (t-center)^2 / fwhm^2).

    The two boundary samples are forced to exactly zero; for the pulse
    parameters used here they underflow anyway and the cost functional
    treats the endpoints as pinned.
    """
    if center is None:
        center = 0.5 * grid.t_f
    t = grid.times
    v = amplitude * np.exp(-4.0 * np.log(2.0) * (t - center) ** 2 / fwhm ** 2)
    v[0] = 0.0
    v[-1] = 0.0
    return FieldGrid(grid, v)


@dataclass(frozen=True)
class Trajectory:
    """State snapshots at every grid point; states[n] belongs to t_n."""

    grid: TimeGrid
    states: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]


def step_pure(state: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) applied through the eigendecomposition of h."""
    w, v = np.linalg.eigh(h)
    return v @ (np.exp(-1j * w * dt) * (v.conj().T @ state))


def step_density(rho: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """Unitary conjugation U rho U^dag with U = exp(-i h dt)."""
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * w * dt)
    u = v * phase @ v.conj().T
    return u @ rho @ u.conj().T


def propagate_forward(psi0: np.ndarray, field: FieldGrid,
                      ops: RotorOperators,
                      params: MoleculeParams) -> Trajectory:
    """Forward propagation; step n uses the field value at t_n."""
    n = field.grid.n_steps
    dt = field.grid.dt
    states = np.empty((n + 1, ops.dim), dtype=complex)
    states[0] = psi0
    for i in range(n):
        h = hamiltonian(ops, params, field.values[i])
        states[i + 1] = step_pure(states[i], h, dt)
    return Trajectory(field.grid, states)


def propagate_backward(chi_f: np.ndarray, field: FieldGrid,
                       ops: RotorOperators,
                       params: MoleculeParams) -> Trajectory:
    """Backward propagation with the same per-step field convention.

    states[n] holds chi(t_n); the recursion inverts the forward step, so
    a forward pass over the result reproduces chi_f exactly.
    """
    n = field.grid.n_steps
    dt = field.grid.dt
    states = np.empty((n + 1, ops.dim), dtype=complex)
    states[n] = chi_f
    for i in range(n - 1, -1, -1):
        h = hamiltonian(ops, params, field.values[i])
        states[i] = step_pure(states[i + 1], h, -dt)
    return Trajectory(field.grid, states)


def expectation_cos2(state: np.ndarray, ops: RotorOperators) -> float:
    """<cos^2 theta> for a pure vector or a single density block."""
    if state.ndim == 1:
        return float(np.real(np.vdot(state, ops.cos2 @ state)))
    return float(np.real(np.trace(ops.cos2 @ state)))

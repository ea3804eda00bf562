"""Independent reference implementations used by several test modules.

Everything here is deliberately written against different primitives
than the package (quadrature instead of closed forms, dense matrices
instead of banded kernels, finite differences instead of analytic
derivatives) so agreement is meaningful.
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import lpmv

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(128)


def normalized_plm(j: int, m: int, x: np.ndarray) -> np.ndarray:
    """Theta part of the spherical harmonic, unit-normalized on [-1, 1]."""
    norm = math.sqrt((2 * j + 1) / 2.0
                     * math.factorial(j - m) / math.factorial(j + m))
    return norm * lpmv(m, j, x)


def cos2_element_quadrature(j1: int, j2: int, m: int) -> float:
    """<j1,m|cos^2(theta)|j2,m> by 128-node Gauss-Legendre quadrature.

    The integrand is a polynomial of degree j1 + j2 + 2, integrated
    exactly (up to rounding) for all j <= 60 or so.
    """
    x = _GAUSS_NODES
    f = normalized_plm(j1, m, x) * x * x * normalized_plm(j2, m, x)
    return float(np.dot(_GAUSS_WEIGHTS, f))


def dense_hamiltonian(ops, params, e_value: float) -> np.ndarray:
    w = 0.25 * (params.dalpha * ops.cos2
                + params.alpha_perp * np.eye(ops.dim))
    return params.b * ops.j_squared - (e_value * e_value) * w


def unitary_step(h: np.ndarray, dt: float) -> np.ndarray:
    wvals, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * wvals * dt)) @ v.conj().T


def fd_alpha_pure(psi, chi, ops, params, dt=0.01, h=0.01):
    """Finite-difference derivative of |<chi|psi(dt)>|^2 under an E^2
    perturbation; matches -dt * alpha_coupling up to O(dt^2)."""
    w = 0.25 * (params.dalpha * ops.cos2
                + params.alpha_perp * np.eye(ops.dim))
    h0 = params.b * ops.j_squared

    def proj(s):
        u = unitary_step(h0 - s * w, dt)
        a = np.vdot(chi, u @ psi)
        return float((a * a.conjugate()).real)

    return (proj(h) - proj(-h)) / (2.0 * h)


def fd_alpha_density(chi_block, rho_block, w_block, h0_block,
                     dt=0.01, h=0.01):
    """Same construction for density blocks: d/ds Tr(chi U rho U+)."""

    def trace(s):
        u = unitary_step(h0_block - s * w_block, dt)
        return float(np.trace(chi_block @ u @ rho_block
                              @ u.conj().T).real)

    return (trace(h) - trace(-h)) / (2.0 * h)


def boltzmann_level_weights(b: float, kt: float, j_max: int) -> np.ndarray:
    """Unnormalized (2j+1) exp(-B j(j+1)/kT) by direct summation."""
    j = np.arange(j_max + 1, dtype=float)
    if kt == 0.0:
        out = np.zeros(j_max + 1)
        out[0] = 1.0
        return out
    return (2 * j + 1) * np.exp(-b * j * (j + 1) / kt)

"""Truncated rigid-rotor basis, operators and the pure alignment target.

The molecule is a linear rotor driven through its polarizability
anisotropy by a linearly polarized, non-resonant field envelope.  Within
one magnetic quantum number m the relevant operators act on the ladder
|j,m>, j = |m| .. j_max, and cos^2(theta) couples only j' in {j, j+-2},
so everything here is small, real and banded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BasisTooSmallError, DegenerateTargetError
from .units import wavenumber_to_energy


@dataclass(frozen=True)
class MoleculeParams:
    """Rotational constant and static polarizability components.

    b: rotational constant in hartree.
    alpha_par, alpha_perp: polarizability along / across the axis, au.
    """

    b: float
    alpha_par: float
    alpha_perp: float

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError("rotational constant must be positive")
        if not self.alpha_par > self.alpha_perp:
            raise ValueError("alpha_par must exceed alpha_perp")

    @property
    def dalpha(self) -> float:
        return self.alpha_par - self.alpha_perp

    @classmethod
    def from_wavenumber(cls, b_cm1: float, alpha_par: float,
                        alpha_perp: float) -> "MoleculeParams":
        return cls(wavenumber_to_energy(b_cm1), alpha_par, alpha_perp)


# Carbon monoxide, the molecule used throughout the bundled presets.
CO = MoleculeParams.from_wavenumber(1.931, 15.65, 11.73)


@dataclass(frozen=True)
class RotorBasis:
    """Ladder of |j, m> states with fixed m and j = |m| .. j_max."""

    j_max: int
    m: int

    def __post_init__(self):
        if self.j_max < abs(self.m):
            raise BasisTooSmallError(
                f"j_max={self.j_max} cannot hold m={self.m}")

    @property
    def dim(self) -> int:
        return self.j_max - abs(self.m) + 1

    @property
    def j_values(self) -> np.ndarray:
        return np.arange(abs(self.m), self.j_max + 1)


@dataclass(frozen=True)
class TargetSpec:
    """Alignment target: maximal-alignment state of the j <= j_opt block.

    j_opt >= 0 is accepted here (the one-dimensional j_opt = 0 subspace is
    well defined); experiment configs additionally require j_opt >= 2.
    """

    j_opt: int
    m: int = 0

    def __post_init__(self):
        if self.j_opt < 0:
            raise ValueError("j_opt must be non-negative")
        if abs(self.m) > self.j_opt:
            raise BasisTooSmallError(
                f"target block m={self.m} empty for j_opt={self.j_opt}")


def cos2_diagonal(j: int, m: int) -> float:
    """<j,m|cos^2(theta)|j,m>."""
    if j == 0:
        return 1.0 / 3.0
    return 1.0 / 3.0 + (2.0 / 3.0) * (j * (j + 1) - 3 * m * m) / (
        (2 * j + 3) * (2 * j - 1))


def cos2_offdiagonal(j: int, m: int) -> float:
    """<j,m|cos^2(theta)|j+2,m>."""
    num = ((j + 1) ** 2 - m * m) * ((j + 2) ** 2 - m * m)
    den = (2 * j + 1) * (2 * j + 5)
    return math.sqrt(num / den) / (2 * j + 3)


@dataclass(frozen=True)
class RotorOperators:
    """j(j+1) diagonal and the cos^2(theta) matrix on one m-ladder."""

    basis: RotorBasis
    j_squared: np.ndarray
    cos2: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.dim


def build_operators(basis: RotorBasis) -> RotorOperators:
    jv = basis.j_values
    j_squared = np.diag(jv * (jv + 1.0))
    cos2 = np.zeros((basis.dim, basis.dim))
    for a, j in enumerate(jv):
        cos2[a, a] = cos2_diagonal(j, basis.m)
        if a + 2 < basis.dim:
            elem = cos2_offdiagonal(j, basis.m)
            cos2[a, a + 2] = elem
            cos2[a + 2, a] = elem
    j_squared.setflags(write=False)
    cos2.setflags(write=False)
    return RotorOperators(basis=basis, j_squared=j_squared, cos2=cos2)


def interaction_operator(ops: RotorOperators, params: MoleculeParams) -> np.ndarray:
    """(dalpha*cos2 + alpha_perp*I)/4, the operator multiplying -E(t)^2."""
    return 0.25 * (params.dalpha * ops.cos2
                   + params.alpha_perp * np.eye(ops.dim))


def hamiltonian(ops: RotorOperators, params: MoleculeParams,
                e_value: float) -> np.ndarray:
    """B*J^2 - (E^2/4)*(dalpha*cos2 + alpha_perp)."""
    if not math.isfinite(e_value):
        raise ValueError("field amplitude must be finite")
    return (params.b * ops.j_squared
            - (e_value * e_value) * interaction_operator(ops, params))


def target_pure(ops: RotorOperators, spec: TargetSpec,
                degeneracy_tol: float = 1e-10) -> np.ndarray:
    """Unit eigenvector of maximal eigenvalue of cos2 on the j <= j_opt block.

    Returned on the full ladder of `ops` with zeros outside the block.
    The global phase makes the largest-magnitude component real positive.
    """
    basis = ops.basis
    if spec.m != basis.m:
        raise ValueError("target m does not match the operator ladder")
    if spec.j_opt > basis.j_max:
        raise BasisTooSmallError(
            f"j_opt={spec.j_opt} exceeds basis j_max={basis.j_max}")
    nsub = spec.j_opt - abs(basis.m) + 1
    sub = ops.cos2[:nsub, :nsub]
    vals, vecs = np.linalg.eigh(sub)
    if nsub > 1 and vals[-1] - vals[-2] < degeneracy_tol:
        raise DegenerateTargetError(
            f"top alignment eigenvalue degenerate within {degeneracy_tol}")
    vec = vecs[:, -1]
    k = int(np.argmax(np.abs(vec)))
    if vec[k] < 0.0:
        vec = -vec
    out = np.zeros(basis.dim, dtype=complex)
    out[:nsub] = vec
    return out


def target_alignment(ops: RotorOperators, spec: TargetSpec) -> float:
    """Maximal eigenvalue of cos2 projected on the target block."""
    nsub = spec.j_opt - abs(ops.basis.m) + 1
    return float(np.linalg.eigvalsh(ops.cos2[:nsub, :nsub])[-1])

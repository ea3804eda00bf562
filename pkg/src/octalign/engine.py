"""Block-packed ensembles driving the compiled propagation kernels.

The Hamiltonian B*J^2 - E^2(t) * W conserves m and the parity of j, so
every computation splits into independent (m, j-parity) ladders in which
both the field-free part and the polarizability coupling are real
symmetric tridiagonal.  This module packs initial states, adjoint states
and operator bands for all participating ladders into padded rectangular
arrays, and wraps the compiled kernels that consume them.

Ensembles are incoherent mixtures of ladder-pure vectors.  Every state
vector must live inside a single (m, parity) block; coherent
superpositions across blocks are rejected.  Field-free eigenstates, the
only initial states used here, always satisfy this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .propagate import FieldGrid
from .rotor import (MoleculeParams, RotorBasis, RotorOperators,
                    build_operators, cos2_diagonal, cos2_offdiagonal)

PARITY_EVEN = 0
PARITY_ODD = 1


def block_j_values(j_max: int, m: int, parity: int) -> np.ndarray:
    """j quantum numbers of one ladder, lowest first."""
    lo = abs(m)
    if lo % 2 != parity:
        lo += 1
    return np.arange(lo, j_max + 1, 2, dtype=np.int64)


@dataclass
class EnsemblePlan:
    """Everything the kernels need, in padded block-major layout."""

    j_max: int
    dims: np.ndarray          # (nb,) int64 ladder sizes
    block_m: np.ndarray       # (nb,) int64
    block_parity: np.ndarray  # (nb,) int64
    wblk: np.ndarray          # (nb,) float64 block multiplicity (m degeneracy)
    h0: np.ndarray            # (nb, dmax) field-free diagonal, atomic units
    wd: np.ndarray            # (nb, dmax) coupling W diagonal
    ws: np.ndarray            # (nb, dmax) coupling W subdiagonal
    c2d: np.ndarray           # (nb, dmax) cos^2 theta diagonal
    c2s: np.ndarray           # (nb, dmax) cos^2 theta subdiagonal
    psi0: np.ndarray          # (nb, smax, dmax) complex initial vectors
    npsi: np.ndarray          # (nb,) int64 vectors per block
    pw: np.ndarray            # (nb, smax) float64 state weights
    chi_f: np.ndarray         # (nb, amax, dmax) complex adjoint seeds
    nchi: np.ndarray          # (nb,) int64
    qw: np.ndarray            # (nb, amax) float64 adjoint weights
    target_norm: float        # Tr(rho_opt^2) for mixed targets, 1 for pure
    dropped_mass: float       # initial population not carried by the plan

    @property
    def n_blocks(self) -> int:
        return int(self.dims.shape[0])

    def state_trace(self) -> float:
        """Total weight carried by the state ensemble."""
        total = 0.0
        for b in range(self.n_blocks):
            total += self.wblk[b] * float(np.sum(self.pw[b, :self.npsi[b]]))
        return total


@dataclass
class SweepResult:
    field: FieldGrid
    projection: float
    max_cubic_residual: float
    max_fixedpoint_gap: float
    top_level_population: float
    max_fixedpoint_iters: int


class _Block:
    __slots__ = ("m", "parity", "js", "weight", "psis", "pws", "chis", "qws")

    def __init__(self, m, parity, js, weight):
        self.m = m
        self.parity = parity
        self.js = js
        self.weight = weight
        self.psis = []
        self.pws = []
        self.chis = []
        self.qws = []


def _pack(blocks, j_max, params: MoleculeParams, target_norm, dropped_mass):
    blocks = [b for b in blocks if b.psis]
    if not blocks:
        raise ValueError("no populated blocks to pack")
    nb = len(blocks)
    dmax = max(len(b.js) for b in blocks)
    smax = max(len(b.psis) for b in blocks)
    amax = max((len(b.chis) for b in blocks), default=0)
    if amax == 0:
        amax = 1
    dims = np.zeros(nb, dtype=np.int64)
    block_m = np.zeros(nb, dtype=np.int64)
    block_parity = np.zeros(nb, dtype=np.int64)
    wblk = np.zeros(nb)
    h0 = np.zeros((nb, dmax))
    wd = np.zeros((nb, dmax))
    ws = np.zeros((nb, dmax))
    c2d = np.zeros((nb, dmax))
    c2s = np.zeros((nb, dmax))
    psi0 = np.zeros((nb, smax, dmax), dtype=np.complex128)
    npsi = np.zeros(nb, dtype=np.int64)
    pw = np.zeros((nb, smax))
    chi_f = np.zeros((nb, amax, dmax), dtype=np.complex128)
    nchi = np.zeros(nb, dtype=np.int64)
    qw = np.zeros((nb, amax))
    dalpha = params.dalpha
    for bi, blk in enumerate(blocks):
        js = blk.js
        n = len(js)
        dims[bi] = n
        block_m[bi] = blk.m
        block_parity[bi] = blk.parity
        wblk[bi] = blk.weight
        for i, j in enumerate(js):
            c2d[bi, i] = cos2_diagonal(int(j), blk.m)
            h0[bi, i] = params.b * j * (j + 1)
            wd[bi, i] = 0.25 * (dalpha * c2d[bi, i] + params.alpha_perp)
        for i, j in enumerate(js[:-1]):
            c2s[bi, i] = cos2_offdiagonal(int(j), blk.m)
            ws[bi, i] = 0.25 * dalpha * c2s[bi, i]
        npsi[bi] = len(blk.psis)
        for s, vec in enumerate(blk.psis):
            psi0[bi, s, :n] = vec
            pw[bi, s] = blk.pws[s]
        nchi[bi] = len(blk.chis)
        for a, vec in enumerate(blk.chis):
            chi_f[bi, a, :n] = vec
            qw[bi, a] = blk.qws[a]
    return EnsemblePlan(
        j_max=j_max, dims=dims, block_m=block_m, block_parity=block_parity,
        wblk=wblk, h0=h0, wd=wd, ws=ws, c2d=c2d, c2s=c2s,
        psi0=psi0, npsi=npsi, pw=pw, chi_f=chi_f, nchi=nchi, qw=qw,
        target_norm=target_norm, dropped_mass=dropped_mass)


def _split_by_parity(vector: np.ndarray, j_max: int, m: int):
    """Components of a full-ladder vector on the two parity ladders."""
    out = {}
    for parity in (PARITY_EVEN, PARITY_ODD):
        js = block_j_values(j_max, m, parity)
        comp = np.array([vector[j - abs(m)] for j in js], dtype=np.complex128)
        out[parity] = (js, comp)
    return out


def build_pure_plan(ops: RotorOperators, params: MoleculeParams,
                    psi0: np.ndarray, chi: np.ndarray) -> EnsemblePlan:
    """Plan for a single initial vector and a single target vector.

    Both vectors are indexed over the full j ladder of ops.basis.  The
    initial vector must be parity-pure; the target may mix parities (its
    odd component is then simply never reached from an even start).
    """
    basis = ops.basis
    j_max, m = basis.j_max, basis.m
    psi0 = np.asarray(psi0, dtype=np.complex128)
    chi = np.asarray(chi, dtype=np.complex128)
    if psi0.shape != (basis.dim,) or chi.shape != (basis.dim,):
        raise ValueError("state vectors must match the basis dimension")
    psi_parts = _split_by_parity(psi0, j_max, m)
    chi_parts = _split_by_parity(chi, j_max, m)
    wts = {p: float(np.vdot(v, v).real) for p, (_, v) in psi_parts.items()}
    if min(wts.values()) > 1e-20:
        raise ValueError(
            "initial state mixes j parities; only ladder-pure initial "
            "states are supported")
    blocks = []
    for parity in (PARITY_EVEN, PARITY_ODD):
        js, pvec = psi_parts[parity]
        if len(js) == 0 or wts[parity] <= 1e-20:
            continue
        blk = _Block(m, parity, js, 1.0)
        blk.psis.append(pvec)
        blk.pws.append(1.0)
        _, cvec = chi_parts[parity]
        if float(np.vdot(cvec, cvec).real) > 0.0:
            blk.chis.append(cvec)
            blk.qws.append(1.0)
        blocks.append(blk)
    return _pack(blocks, j_max, params, 1.0, 0.0)


def build_mixed_plan(j_max: int, params: MoleculeParams,
                     state_members, target_members, target_norm: float,
                     dropped_mass: float = 0.0) -> EnsemblePlan:
    """Plan for incoherent ensembles.

    state_members / target_members: iterables of (m, j_values, vector,
    weight) with the vector indexed over j_values (a single-parity
    ladder) and m >= 0.  Each m > 0 ladder is stored once with block
    multiplicity 2, standing for the +-m pair; weights are per single m
    and must be m-symmetric for that folding to be exact.  Target
    weights should already include any scaling by the target purity.
    dropped_mass records initial population the caller chose not to
    carry (deep Boltzmann tail); it is reported, not compensated.
    """
    table = {}

    def get_block(m, parity):
        key = (m, parity)
        if key not in table:
            js = block_j_values(j_max, m, parity)
            table[key] = _Block(m, parity, js,
                                1.0 if m == 0 else 2.0)
        return table[key]

    for m, js, vec, weight in state_members:
        am = int(m)
        if am < 0:
            raise ValueError("state members must carry m >= 0")
        js = np.asarray(js, dtype=np.int64)
        parity = int(js[0] % 2)
        expect = block_j_values(j_max, am, parity)
        if len(js) != len(expect) or np.any(js != expect):
            raise ValueError("state member does not span a full ladder")
        blk = get_block(am, parity)
        blk.psis.append(np.asarray(vec, dtype=np.complex128))
        blk.pws.append(float(weight))
    for m, js, vec, weight in target_members:
        am = int(m)
        if am < 0:
            raise ValueError("target members must carry m >= 0")
        js = np.asarray(js, dtype=np.int64)
        parity = int(js[0] % 2)
        expect = block_j_values(j_max, am, parity)
        if len(js) != len(expect) or np.any(js != expect):
            raise ValueError("target member does not span a full ladder")
        blk = get_block(am, parity)
        blk.chis.append(np.asarray(vec, dtype=np.complex128))
        blk.qws.append(float(weight))
    return _pack(list(table.values()), j_max, params, target_norm,
                 dropped_mass)


def backward_trajectory(plan: EnsemblePlan, field: FieldGrid) -> np.ndarray:
    """Adjoint ensemble at every grid point under the given field.

    Returns an array of shape (n_steps+1, nb, amax, dmax); entry [n]
    holds the adjoint vectors at t_n.  Backward steps use the same exact
    exponential as forward ones, so a forward step with the same field
    value inverts a backward step to rounding.
    """
    grid = field.grid
    nb, amax, dmax = plan.chi_f.shape
    traj = np.empty((grid.n_steps + 1, nb, amax, dmax), dtype=np.complex128)
    kernels.k_backward(plan.dims, plan.h0, plan.wd, plan.ws,
                       plan.chi_f, plan.nchi, field.values, grid.dt, traj)
    return traj


def propagate_projection(plan: EnsemblePlan, field: FieldGrid):
    """(projection at t_f, max top-level population) for a fixed field."""
    p, top = kernels.k_propagate(
        plan.dims, plan.h0, plan.wd, plan.ws, plan.wblk,
        plan.psi0, plan.npsi, plan.pw, plan.chi_f, plan.nchi, plan.qw,
        field.values, field.grid.dt)
    return float(p), float(top)


def sweep_update(plan: EnsemblePlan, e_tilde: FieldGrid,
                 chi_traj: np.ndarray, lam: np.ndarray, eta: float,
                 fp_tol: float = 1e-12, fp_max: int = 24) -> SweepResult:
    """One monotonic field update (forward sweep with the cubic rule)."""
    grid = e_tilde.grid
    e_new = np.empty(grid.n_steps + 1)
    p, resid, gap, top, used = kernels.k_sweep(
        plan.dims, plan.h0, plan.wd, plan.ws, plan.wblk,
        plan.psi0, plan.npsi, plan.pw, chi_traj, plan.nchi, plan.qw,
        e_tilde.values, lam, eta, grid.dt, e_new, fp_tol, fp_max)
    return SweepResult(field=FieldGrid(grid, e_new), projection=float(p),
                       max_cubic_residual=float(resid),
                       max_fixedpoint_gap=float(gap),
                       top_level_population=float(top),
                       max_fixedpoint_iters=int(used))


def cos2_trace(plan: EnsemblePlan, field: FieldGrid) -> np.ndarray:
    """Ensemble alignment <cos^2 theta>(t_n) along the propagation."""
    grid = field.grid
    trace = np.empty(grid.n_steps + 1)
    kernels.k_cos2_trace(plan.dims, plan.h0, plan.wd, plan.ws, plan.wblk,
                         plan.c2d, plan.c2s, plan.psi0, plan.npsi, plan.pw,
                         field.values, grid.dt, trace)
    return trace


def ground_state_plan(j_max: int, params: MoleculeParams,
                      chi: np.ndarray) -> EnsemblePlan:
    """Convenience plan: rotational ground state |j=0, m=0> vs target chi."""
    basis = RotorBasis(j_max=j_max, m=0)
    ops = build_operators(basis)
    psi0 = np.zeros(basis.dim, dtype=np.complex128)
    psi0[0] = 1.0
    return build_pure_plan(ops, params, psi0, chi)

"""Thermal ensembles: Boltzmann initial states and rearranged targets.

The optimization at temperature T starts from the rotational Boltzmann
mixture and aims at the most aligned density operator reachable by
unitary evolution from it.  Unitarity preserves the population spectrum,
so the best target pairs the sorted initial populations with the sorted
eigenvectors of the alignment operator restricted to the low-j manifold
(largest population onto the most aligned direction, within each
conserved m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import PARITY_EVEN, PARITY_ODD, block_j_values, build_mixed_plan
from .errors import BasisTooSmallError, DegenerateTargetError
from .rotor import MoleculeParams, TargetSpec, cos2_diagonal, cos2_offdiagonal
from .units import BOLTZMANN_EH_PER_K

_TAIL_EXTRA = 400   # extra j values when estimating the partition tail


@dataclass(frozen=True)
class BoltzmannPopulations:
    """Per-state thermal weights of the rigid-rotor levels.

    per_state[j] is the population of one |j, m> state (independent of
    m); the level as a whole carries (2j+1) * per_state[j].  Weights are
    normalized over j <= j_max; the probability the full canonical
    distribution puts beyond j_max is reported, not redistributed.
    """

    j_max: int
    temperature: float
    per_state: np.ndarray
    dropped_mass: float

    def level_population(self, j: int) -> float:
        return (2 * j + 1) * float(self.per_state[j])


def boltzmann_init(params: MoleculeParams, j_max: int,
                   temperature: float) -> BoltzmannPopulations:
    """Thermal populations of the rigid rotor at the given temperature."""
    if j_max < 0:
        raise ValueError("j_max must be non-negative")
    if temperature < 0.0:
        raise ValueError("temperature must be non-negative")
    per_state = np.zeros(j_max + 1)
    if temperature == 0.0:
        per_state[0] = 1.0
        return BoltzmannPopulations(j_max, 0.0, per_state, 0.0)
    beta = 1.0 / (BOLTZMANN_EH_PER_K * temperature)
    js = np.arange(j_max + 1)
    weights = np.exp(-beta * params.b * js * (js + 1.0))
    z_ret = float(np.sum((2 * js + 1) * weights))
    tail = 0.0
    for j in range(j_max + 1, j_max + 1 + _TAIL_EXTRA):
        term = (2 * j + 1) * math.exp(-beta * params.b * j * (j + 1.0))
        tail += term
        if term < 1e-300:
            break
    per_state = weights / z_ret
    dropped = tail / (z_ret + tail)
    return BoltzmannPopulations(j_max, temperature, per_state, dropped)


@dataclass(frozen=True)
class TargetMember:
    """One eigenvector of the target density operator.

    vector spans the (m, parity) ladder j = j0, j0+2, ..., running to
    j_max with zeros above j_opt.  weight is the Boltzmann population
    assigned to it (per single m; the -m partner is implied).
    """

    m: int
    parity: int
    j_values: np.ndarray
    vector: np.ndarray
    weight: float
    alignment: float


@dataclass(frozen=True)
class ThermalTarget:
    """Spectrum-preserving most-aligned target built from a thermal state."""

    j_max: int
    j_opt: int
    temperature: float
    members: tuple
    purity: float          # Tr of the squared target density operator
    trace_tail: float      # initial population beyond j_opt, renormalized away
    alignment: float       # alignment expectation of the target


def _ladder_cos2(js: np.ndarray, m: int) -> np.ndarray:
    n = len(js)
    mat = np.zeros((n, n))
    for i, j in enumerate(js):
        mat[i, i] = cos2_diagonal(int(j), m)
    for i, j in enumerate(js[:-1]):
        mat[i, i + 1] = mat[i + 1, i] = cos2_offdiagonal(int(j), m)
    return mat


def thermal_target(params: MoleculeParams, j_max: int, spec: TargetSpec,
                   temperature: float,
                   degeneracy_tol: float = 1e-10) -> ThermalTarget:
    """Pair sorted thermal populations with sorted alignment directions.

    Within every m <= j_opt ladder the alignment operator restricted to
    j <= j_opt is diagonalized; its eigenvectors, ordered by decreasing
    eigenvalue, receive the initial populations of that ladder in
    decreasing order (they already decrease with j).  Populations on
    j > j_opt are a negligible tail at the temperatures of interest;
    the target is renormalized over the kept part and the tail size is
    reported.
    """
    j_opt = spec.j_opt
    if j_opt > j_max:
        raise BasisTooSmallError(
            f"target needs j_opt={j_opt} <= j_max={j_max}")
    pops = boltzmann_init(params, j_max, temperature)
    kept = sum((2 * j + 1) * pops.per_state[j] for j in range(j_opt + 1))
    tail = 1.0 - kept
    members = []
    purity = 0.0
    alignment = 0.0
    for m in range(j_opt + 1):
        # ladder populations, decreasing in j because energy increases
        pool = [float(pops.per_state[j]) / kept for j in range(m, j_opt + 1)]
        vecs = []
        for parity in (PARITY_EVEN, PARITY_ODD):
            js_opt = block_j_values(j_opt, m, parity)
            if len(js_opt) == 0:
                continue
            mat = _ladder_cos2(js_opt, m)
            evals, evecs = np.linalg.eigh(mat)
            for idx in range(len(js_opt)):
                vecs.append((float(evals[idx]), parity, js_opt,
                             evecs[:, idx]))
        vecs.sort(key=lambda t: -t[0])
        if len(vecs) >= 2 and vecs[0][0] - vecs[1][0] < degeneracy_tol:
            raise DegenerateTargetError(
                f"top alignment directions for m={m} are degenerate")
        mult = 1.0 if m == 0 else 2.0
        for rank, (ev, parity, js_opt, vec) in enumerate(vecs):
            w = pool[rank]
            js_full = block_j_values(j_max, m, parity)
            full = np.zeros(len(js_full), dtype=np.complex128)
            for i, j in enumerate(js_opt):
                full[np.where(js_full == j)[0][0]] = vec[i]
            k = int(np.argmax(np.abs(full)))
            ph = full[k]
            if abs(ph) > 0:
                full *= abs(ph) / ph
            members.append(TargetMember(m=m, parity=parity,
                                        j_values=js_full, vector=full,
                                        weight=w, alignment=ev))
            purity += mult * w * w
            alignment += mult * w * ev
    return ThermalTarget(j_max=j_max, j_opt=j_opt, temperature=temperature,
                         members=tuple(members), purity=purity,
                         trace_tail=tail, alignment=alignment)


def thermal_projection(rho: np.ndarray, rho_opt: np.ndarray) -> float:
    """Normalized overlap Tr(rho rho_opt) / Tr(rho_opt^2).

    Equals 1 exactly when rho = rho_opt, and for pure states reduces to
    the usual squared overlap.  Reference (dense) form; the compiled
    path reproduces it through the eigenvector ensemble.
    """
    num = float(np.trace(rho @ rho_opt).real)
    den = float(np.trace(rho_opt @ rho_opt).real)
    return num / den


def thermal_alpha(chi: np.ndarray, w_op: np.ndarray,
                  rho: np.ndarray) -> float:
    """Coupling 2 Im Tr(chi W rho) = -i Tr(chi [W, rho]).

    chi here is the adjoint density operator at the current time (the
    backward-propagated, normalized target) and W the polarizability
    coupling; the same contraction drives the field update as in the
    pure-state case.
    """
    return 2.0 * float(np.trace(chi @ w_op @ rho).imag)


def thermal_plan(params: MoleculeParams, j_max: int, spec: TargetSpec,
                 temperature: float, population_cutoff: float = 1e-12):
    """Engine plan for a thermal optimization.

    State members: every |j, m >= 0> with per-state population above
    population_cutoff relative to the ground state (m > 0 ladders are
    stored once with multiplicity two).  Ladders with m > j_opt never
    overlap the target and never pick up coupling, so they are left out
    of the evolution entirely; their population is exactly conserved
    and is not counted as dropped.  Target members: the rearranged
    thermal target, weights scaled by 1 / purity so the kernel overlap
    sum is the normalized projection directly.  Returns (plan, target).
    """
    pops = boltzmann_init(params, j_max, temperature)
    target = thermal_target(params, j_max, spec, temperature)
    floor = population_cutoff * float(pops.per_state[0])
    j_keep = [j for j in range(j_max + 1) if pops.per_state[j] >= floor]
    j_cut = max(j_keep)
    dropped = pops.dropped_mass
    for j in range(j_cut + 1, j_max + 1):
        dropped += (2 * j + 1) * float(pops.per_state[j])
    state_members = []
    for m in range(0, min(j_cut, spec.j_opt) + 1):
        for parity in (PARITY_EVEN, PARITY_ODD):
            js = block_j_values(j_max, m, parity)
            if len(js) == 0:
                continue
            for i, j in enumerate(js):
                if j > j_cut:
                    break
                vec = np.zeros(len(js), dtype=np.complex128)
                vec[i] = 1.0
                state_members.append((m, js, vec,
                                      float(pops.per_state[j])))
    w_top = max(mem.weight for mem in target.members)
    target_members = [
        (mem.m, mem.j_values, mem.vector, mem.weight / target.purity)
        for mem in target.members if mem.weight > 1e-15 * w_top]
    plan = build_mixed_plan(j_max, params, state_members, target_members,
                            target_norm=target.purity,
                            dropped_mass=dropped)
    return plan, target

"""Rotor basis, cos^2(theta) matrix elements, and alignment targets."""

import numpy as np
import pytest

from octalign.errors import BasisTooSmallError, DegenerateTargetError
from octalign.rotor import CO, MoleculeParams, RotorBasis, TargetSpec, \
    build_operators, cos2_diagonal, cos2_offdiagonal, hamiltonian, \
    interaction_operator, target_alignment, target_pure

from _oracles import cos2_element_quadrature, dense_hamiltonian


def test_molecule_validation():
    with pytest.raises(ValueError):
        MoleculeParams(b=-1e-6, alpha_par=2.0, alpha_perp=1.0)
    with pytest.raises(ValueError):
        MoleculeParams(b=1e-6, alpha_par=1.0, alpha_perp=2.0)
    assert CO.dalpha == pytest.approx(3.92, abs=1e-12)


def test_cos2_elements_match_quadrature_all_j_up_to_20():
    worst = 0.0
    for m in range(0, 21):
        for j in range(m, 21):
            d = abs(cos2_diagonal(j, m) - cos2_element_quadrature(j, j, m))
            worst = max(worst, d)
            o = abs(cos2_offdiagonal(j, m)
                    - cos2_element_quadrature(j, j + 2, m))
            worst = max(worst, o)
    assert worst < 1e-12
    print(f"PASS cos2 matrix elements vs quadrature, worst {worst:.2e}")


def test_cos2_trace_identity():
    # sum over m of <j,m|cos2|j,m> = (2j+1)/3 for every j
    for j in range(0, 12):
        s = sum(cos2_diagonal(j, m) for m in range(-j, j + 1))
        assert abs(s - (2 * j + 1) / 3.0) < 1e-12


def test_basis_and_operator_shapes():
    basis = RotorBasis(j_max=8, m=2)
    assert basis.dim == 7
    assert list(basis.j_values) == list(range(2, 9))
    ops = build_operators(basis)
    assert ops.cos2.shape == (7, 7)
    assert np.allclose(ops.cos2, ops.cos2.T)
    with pytest.raises(BasisTooSmallError):
        RotorBasis(j_max=2, m=5)


def test_hamiltonian_matches_dense_reference():
    ops = build_operators(RotorBasis(j_max=10, m=0))
    for e in (0.0, 3e-3, 1e-2):
        h = hamiltonian(ops, CO, e)
        assert np.max(np.abs(h - dense_hamiltonian(ops, CO, e))) < 1e-18


def test_interaction_operator_scale():
    ops = build_operators(RotorBasis(j_max=4, m=0))
    w = interaction_operator(ops, CO)
    expect = 0.25 * (CO.dalpha / 3.0 + CO.alpha_perp)
    assert w[0, 0] == pytest.approx(expect, rel=1e-14)


def test_target_pure_is_top_eigenvector():
    ops = build_operators(RotorBasis(j_max=10, m=0))
    spec = TargetSpec(j_opt=4, m=0)
    chi = target_pure(ops, spec)
    assert abs(np.vdot(chi, chi) - 1.0) < 1e-12
    # supported on j <= 4 only
    assert np.max(np.abs(chi[5:])) == 0.0
    lam = target_alignment(ops, spec)
    resid = ops.cos2[:5, :5] @ chi[:5] - lam * chi[:5]
    assert np.max(np.abs(resid)) < 1e-12
    assert lam > cos2_diagonal(0, 0)


def test_target_alignment_grows_with_j_opt():
    ops = build_operators(RotorBasis(j_max=12, m=0))
    vals = [target_alignment(ops, TargetSpec(j_opt=j, m=0))
            for j in (2, 4, 6, 8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_target_requires_basis_room():
    ops = build_operators(RotorBasis(j_max=3, m=0))
    with pytest.raises(BasisTooSmallError):
        target_pure(ops, TargetSpec(j_opt=5, m=0))


def test_degenerate_target_detected():
    ops = build_operators(RotorBasis(j_max=4, m=0))
    with pytest.raises(DegenerateTargetError):
        target_pure(ops, TargetSpec(j_opt=4, m=0), degeneracy_tol=1.0)


def test_target_phase_fixed_sign():
    ops = build_operators(RotorBasis(j_max=8, m=0))
    chi = target_pure(ops, TargetSpec(j_opt=2, m=0))
    assert chi[int(np.argmax(np.abs(chi)))].real > 0.0
    assert np.max(np.abs(chi.imag)) == 0.0

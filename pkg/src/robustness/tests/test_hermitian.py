import numpy as np
import pytest

from robustness.errors import NotHermitian, NotSquare, DimensionMismatch
from robustness.hermitian import (
    validate_hermitian, eigvalsh, operator_norm_inf, is_psd, hs_inner, project_psd, partial_trace,
    hvec, unhvec, hermitian_basis, min_eigenvalue, max_eigenvalue,
)
from robustness.sampling import random_state


def _random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


def test_validate_hermitian_symmetrizes():
    matrix = np.array([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
    ret = validate_hermitian(matrix)
    assert np.abs(ret - ret.conj().T).max() == 0
    assert not ret.flags.writeable


def test_validate_hermitian_rejects():
    with pytest.raises(NotSquare):
        validate_hermitian(np.zeros((2, 3)))
    with pytest.raises(NotHermitian) as excinfo:
        validate_hermitian(np.array([[0, 1], [0, 0]]), field='effects[0]')
    assert excinfo.value.field == 'effects[0]'
    assert str(excinfo.value).startswith('effects[0]:')


def test_eigvalsh_matches_numpy():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 3, 5):
        matrix = _random_hermitian(dim, rng)
        ret_ = np.linalg.eigvalsh(matrix)
        ret0 = eigvalsh(matrix)
        assert np.abs(ret_ - ret0).max() < 1e-10
        assert abs(min_eigenvalue(matrix) - ret_[0]) < 1e-10
        assert abs(max_eigenvalue(matrix) - ret_[-1]) < 1e-10
        assert abs(operator_norm_inf(matrix) - np.abs(ret_).max()) < 1e-10


def test_is_psd():
    rng = np.random.default_rng(1)
    assert is_psd(random_state(3, rng))
    assert is_psd(np.diag([1.0, 0.0]))
    assert not is_psd(np.diag([1.0, -1e-3]))


def test_hs_inner():
    rng = np.random.default_rng(2)
    a = _random_hermitian(3, rng)
    b = _random_hermitian(3, rng)
    assert abs(hs_inner(a, b) - np.trace(a @ b).real) < 1e-12
    with pytest.raises(DimensionMismatch):
        hs_inner(a, np.eye(2))


def test_project_psd():
    rng = np.random.default_rng(3)
    matrix = _random_hermitian(4, rng)
    ret = project_psd(matrix)
    assert min_eigenvalue(ret) > -1e-12
    # the projection only removes the negative part
    assert np.abs(project_psd(ret) - ret).max() < 1e-10
    stack = np.stack([_random_hermitian(2, rng) for _ in range(5)])
    projected = project_psd(stack)
    for original, ret0 in zip(stack, projected):
        assert np.abs(ret0 - project_psd(original)).max() < 1e-12


def test_partial_trace():
    rng = np.random.default_rng(4)
    rho_a = random_state(2, rng)
    rho_b = random_state(3, rng)
    joint = np.kron(rho_a, rho_b)
    assert np.abs(partial_trace(joint, (2, 3), keep=0) - rho_a).max() < 1e-12
    assert np.abs(partial_trace(joint, (2, 3), keep=1) - rho_b).max() < 1e-12
    with pytest.raises(ValueError):
        partial_trace(joint, (2, 3), keep=2)


def test_hvec_is_an_isometry():
    rng = np.random.default_rng(5)
    a = _random_hermitian(3, rng)
    b = _random_hermitian(3, rng)
    assert abs(np.dot(hvec(a), hvec(b)) - hs_inner(a, b)) < 1e-10
    assert np.abs(unhvec(hvec(a), 3) - a).max() < 1e-12

    basis = hermitian_basis(3)
    assert basis.shape == (9, 3, 3)
    gram = np.real(np.einsum('iab,jab->ij', basis.conj(), basis))
    assert np.abs(gram - np.eye(9)).max() < 1e-12


def test_psd_cone_is_closed_under_sums():
    rng = np.random.default_rng(7)
    for dim in (2, 3, 4):
        for rank in (1, dim):
            m = random_state(dim, rng, rank=rank)
            n = 5 * random_state(dim, rng, rank=1)
            assert is_psd(m + n)


def test_operator_norm_is_homogeneous():
    rng = np.random.default_rng(8)
    for _ in range(10):
        matrix = _random_hermitian(3, rng)
        c = rng.standard_normal() * 10
        assert abs(operator_norm_inf(c * matrix) - abs(c) * operator_norm_inf(matrix)) < 1e-10 * (1 + abs(c))

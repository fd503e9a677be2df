import numpy as np
import pytest
from scipy.stats import unitary_group

from rlt import gates, reps
from rlt.linalg import (
    BranchCutError,
    LinalgError,
    NotDiagonalizableError,
    expm,
    fro_norm,
    is_diagonalizable,
    logm_principal,
    spectral_decompose,
)
from rlt.scaling import random_lindbladian


def test_expm_of_zero_is_identity():
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_diagonal():
    a = np.diag([1j * np.pi / 2, -1j * np.pi / 2])
    np.testing.assert_allclose(expm(a), np.diag([1j, -1j]), atol=1e-15)


def test_expm_x90_matches_unitary_hs(l_x90, basis1):
    u = expm(-1j * np.pi / 4 * reps.PAULI["X"])
    assert fro_norm(expm(l_x90) - reps.hs_of_unitary(u, basis1)) < 1e-10


def test_expm_inverse(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    np.testing.assert_allclose(expm(a) @ expm(-a), np.eye(5), atol=1e-10)


def test_expm_rejects_non_square():
    with pytest.raises(LinalgError):
        expm(np.zeros((2, 3)))


def test_logm_identity():
    np.testing.assert_allclose(logm_principal(np.eye(4)), np.zeros((4, 4)), atol=1e-15)


def test_logm_round_trip_hermitian(rng):
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (x + x.conj().T) / 2
    a = 0.3 * h / np.max(np.abs(np.linalg.eigvalsh(h)))
    np.testing.assert_allclose(logm_principal(expm(a)), a, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_logm_round_trip_lindbladian(seed):
    a = random_lindbladian(np.random.default_rng(seed), 2, h_norm=2.0)
    assert np.max(np.abs(np.linalg.eigvals(a).imag)) < np.pi
    assert fro_norm(logm_principal(expm(a)) - a) < 1e-8


def test_logm_branch_cut():
    with pytest.raises(BranchCutError):
        logm_principal(np.diag([-1.0]))


def test_logm_singular():
    with pytest.raises(LinalgError):
        logm_principal(np.diag([1.0, 0.0]))


def test_logm_real_input_gives_real_output(l_x90):
    out = logm_principal(expm(l_x90))
    assert np.isrealobj(out)
    np.testing.assert_allclose(out, l_x90, atol=1e-12)


def test_spectral_decompose_diagonal():
    sd = spectral_decompose(np.diag([1.0, 2.0, 3.0]))
    order = np.argsort(sd.eigenvalues.real)
    np.testing.assert_allclose(sd.eigenvalues[order], [1, 2, 3])
    for idx, j in enumerate(order):
        expected = np.zeros((3, 3))
        expected[idx, idx] = 1
        np.testing.assert_allclose(sd.projectors[j], expected, atol=1e-12)


def test_spectral_decompose_x90(l_x90):
    sd = spectral_decompose(l_x90)
    assert len(sd) == 3
    vals = dict(zip(np.round(sd.eigenvalues.imag / (np.pi / 2)).astype(int), sd.ranks()))
    assert vals == {0: 2, 1: 1, -1: 1}
    np.testing.assert_allclose(np.sort(np.abs(sd.eigenvalues)), [0, np.pi / 2, np.pi / 2], atol=1e-12)


def test_spectral_decompose_jordan_block():
    with pytest.raises(NotDiagonalizableError):
        spectral_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert not is_diagonalizable(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_spectral_decompose_zero_matrix():
    sd = spectral_decompose(np.zeros((4, 4)))
    assert len(sd) == 1
    np.testing.assert_allclose(sd.projectors[0], np.eye(4))


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("d", [2, 4])
def test_projector_algebra(seed, d):
    a = random_lindbladian(np.random.default_rng(seed), d)
    sd = spectral_decompose(a)
    p = sd.projectors
    m = a.shape[0]
    for i in range(len(sd)):
        np.testing.assert_allclose(p[i] @ p[i], p[i], atol=1e-8)
        for j in range(len(sd)):
            if i != j:
                assert fro_norm(p[i] @ p[j]) < 1e-8
    assert fro_norm(p.sum(axis=0) - np.eye(m)) < 1e-8
    assert fro_norm(sd.reconstruct() - a) < 1e-8 * fro_norm(a)


def test_clustering_idempotence(l_x90):
    sd = spectral_decompose(l_x90)
    sd2 = spectral_decompose(sd.reconstruct())
    def key(v):
        return sorted(v, key=lambda z: (round(z.imag, 6), round(z.real, 6)))

    np.testing.assert_allclose(key(sd.eigenvalues), key(sd2.eigenvalues), atol=1e-9)
    assert sorted(sd.ranks()) == sorted(sd2.ranks())


def test_degenerate_unitary_hs_clusters():
    u = unitary_group.rvs(2, random_state=3)
    g = reps.hs_of_unitary(u, reps.pauli_basis(1))
    sd = spectral_decompose(g)
    # rotation PTM: eigenvalue 1 twice (identity and rotation axis)
    assert sorted(sd.ranks()) == [1, 1, 2]


def test_fro_norm_values(l_x90):
    assert fro_norm(np.zeros((3, 3))) == 0
    assert fro_norm(l_x90) == pytest.approx(np.pi / np.sqrt(2), abs=1e-12)
    assert fro_norm(gates.ideal_lindbladian("ZX90", 2)) == pytest.approx(np.sqrt(2) * np.pi, abs=1e-12)

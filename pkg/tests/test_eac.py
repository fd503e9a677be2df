import numpy as np
import pytest

from rlt import eac, gates, perturb, reps, scaling
from rlt.linalg import expm, fro_norm


def _gs(*names, nq=1):
    return eac.GateSet.from_lindbladians({n: gates.ideal_lindbladian(n, nq) for n in names})


@pytest.mark.parametrize(
    "name,nq,k", [("I", 1, 1), ("X90", 1, 4), ("Y90", 1, 4), ("Z90", 1, 4), ("ZX90", 2, 4), ("T", 1, 8), ("X", 1, 2)]
)
def test_period(name, nq, k):
    assert eac.period_of(expm(gates.ideal_lindbladian(name, nq))) == k


def test_aperiodic():
    lind = reps.hamiltonian_lindbladian(0.5 * reps.PAULI["X"], reps.pauli_basis(1))
    with pytest.raises(eac.AperiodicError):
        eac.period_of(expm(lind))


def test_gate_set_lookup():
    gs = _gs("X90", "Y90")
    assert gs.m == 4 and gs.d == 2 and len(gs) == 2
    assert gs.sequence(["Y90", "X90"]) == (1, 0)
    with pytest.raises(KeyError):
        gs.label_of("Z90")
    with pytest.raises(ValueError):
        eac.unit_ideal_product(gs, [])
    with pytest.raises(ValueError):
        eac.unit_ideal_product(gs, [5])


def test_single_gate_unit_lindbladian():
    gs = _gs("X90")
    np.testing.assert_allclose(eac.unit_ideal_lindbladian(gs, ["X90"]), gs[0].lindbladian, atol=1e-12)


def test_full_turn_unit_is_identity():
    gs = _gs("X90")
    lind = eac.unit_ideal_lindbladian(gs, ["X90"] * 4)
    assert fro_norm(expm(lind) - np.eye(4)) < 1e-9


def test_xy_unit_product_order():
    gs = _gs("X90", "Y90")
    b = reps.pauli_basis(1)
    ux = expm(-1j * np.pi / 4 * reps.PAULI["X"])
    uy = expm(-1j * np.pi / 4 * reps.PAULI["Y"])
    expected = reps.hs_of_unitary(uy, b) @ reps.hs_of_unitary(ux, b)
    assert fro_norm(expm(eac.unit_ideal_lindbladian(gs, ["X90", "Y90"])) - expected) < 1e-10
    assert eac.period_of(expected) == 3


def test_algorithm1_single_gate():
    gs = _gs("X90", "Y90")
    f = eac.algorithm1(gs, ["Y90"])
    np.testing.assert_array_equal(f[1].matrix, np.eye(16))
    np.testing.assert_array_equal(f[0].matrix, np.zeros((16, 16)))


def test_algorithm1_two_gates_matches_compose_two():
    gs = _gs("X90", "Y90")
    f = eac.algorithm1(gs, ["X90", "Y90"])
    out = perturb.compose_two(gs[1].lindbladian, gs[0].lindbladian)
    np.testing.assert_allclose(f[0].matrix, out["map_Bprime"].matrix, atol=1e-12)
    np.testing.assert_allclose(f[1].matrix, out["map_B"].matrix, atol=1e-12)


def test_algorithm1_repeated_gate_quadratic():
    # X90 appears twice, so F_X90 accumulates two position transforms
    gs = _gs("X90", "Y90", "Z90")
    rng = np.random.default_rng(4)
    dirs = [scaling.unit_direction(rng, 4) for _ in range(3)]
    fn = scaling.algorithm1_residual(gs, ["X90", "Y90", "Z90", "X90"], dirs)
    for eps in scaling.EPSILONS:
        assert 3.5 <= scaling.ratio(fn, eps) <= 4.5


def test_algorithm1_stops_on_singular_prefix():
    gs = _gs("X90", "Y90")
    with pytest.raises(eac.AlgorithmStopped) as info:
        eac.algorithm1(gs, ["Y90", "X90", "X90"])
    assert info.value.prefix == (1, 0, 0) or info.value.prefix_names[-2:] == ["X90", "X90"]
    assert "90-degree" in str(info.value)


def test_singular_gate_rejected():
    gs = _gs("X", "Y90")
    with pytest.raises(eac.SingularGateError) as info:
        eac.amplification_maps(gs, ["X", "Y90"])
    assert info.value.gate == "X"
    assert "90-degree" in str(info.value)


def test_amp_split_sums_to_f():
    gs = _gs("X90", "Y90")
    am = eac.amplification_maps(gs, ["X90", "Y90"])
    for f, fa, fn in zip(am.F_unit, am.f_amp, am.f_not_amp):
        assert fro_norm(fa.matrix + fn.matrix - f.matrix) < 1e-10
        np.testing.assert_allclose(fa.matrix, am.ssp.matrix @ f.matrix, atol=1e-12)


def test_identity_unit_everything_amplifies():
    gs = _gs("I")
    am = eac.amplification_maps(gs, ["I"])
    assert am.period == 1
    np.testing.assert_allclose(am.f_amp[0].matrix, np.eye(16))
    np.testing.assert_allclose(am.f_not_amp[0].matrix, 0)


def test_over_rotation_is_purely_amplified():
    gs = _gs("X90")
    am = eac.amplification_maps(gs, ["X90"])
    delta = 1e-3 * gs[0].lindbladian
    np.testing.assert_allclose(am.f_not_amp[0](delta), 0, atol=1e-15)
    np.testing.assert_allclose(am.f_amp[0](delta), delta, atol=1e-15)


def test_unused_gates_have_zero_maps():
    gs = _gs("X90", "Y90", "Z90")
    am = eac.amplification_maps(gs, ["X90", "Y90"])
    assert am.used() == [0, 1]
    for sm in (am.F_unit[2], am.f_amp[2], am.f_not_amp[2]):
        np.testing.assert_array_equal(sm.matrix, 0)


def test_predict_trivial_cases():
    gs = _gs("X90", "Y90")
    am = eac.amplification_maps(gs, ["X90", "Y90"])
    np.testing.assert_allclose(eac.predict_eac_generator(am, [np.zeros((4, 4))] * 2, 6), 0, atol=1e-14)
    rng = np.random.default_rng(0)
    deltas = [1e-3 * rng.normal(size=(4, 4)) for _ in range(2)]
    full = eac.predict_eac_generator(am, deltas, 6)
    amp_only = 6 * sum(fa(d) for fa, d in zip(am.f_amp, deltas))
    np.testing.assert_allclose(full, amp_only, atol=1e-15)
    with pytest.raises(ValueError):
        eac.predict_eac_generator(am, deltas, 0)


def test_predict_is_affine():
    gs = _gs("X90", "Y90")
    am = eac.amplification_maps(gs, ["X90", "Y90"])
    rng = np.random.default_rng(1)
    deltas = [1e-3 * rng.normal(size=(4, 4)) for _ in range(2)]
    base = eac.predict_eac_generator(am, [None, None], 7)
    one = eac.predict_eac_generator(am, deltas, 7) - base
    two = eac.predict_eac_generator(am, [2 * d for d in deltas], 7) - base
    np.testing.assert_allclose(two, 2 * one, atol=1e-15)


@pytest.mark.parametrize("n", [4, 16, 64])
def test_predict_quadratic(n):
    gs = _gs("X90", "Y90")
    unit = ["X90", "Y90"]
    am = eac.amplification_maps(gs, unit)
    rng = np.random.default_rng(7)
    dirs = [scaling.unit_direction(rng, 4) for _ in range(2)]

    def res(e):
        g = np.eye(4)
        for i in gs.sequence(unit):
            g = expm(gs[i].lindbladian + e * dirs[i]) @ g
        exact = np.linalg.matrix_power(g, n)
        return fro_norm(exact - expm(eac.predict_eac_generator(am, [e * d for d in dirs], n)))

    for eps in (1e-3, 1e-4):
        assert 3.5 <= scaling.ratio(res, eps) <= 4.5


def test_design_block_shape():
    gs = _gs("X90", "Y90")
    am = eac.amplification_maps(gs, ["X90", "Y90"])
    assert am.design_block(5).shape == (16, 32)
    assert am.branch_margin(1) > 0

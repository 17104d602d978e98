import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilocality.errors import InvalidInputError, NumericalConsistencyError
from bilocality.qcore import (
    NoiseModel,
    TwoQubitState,
    classical_mixture,
    correlation_tensor,
    load_state_file,
    maximally_mixed,
    pauli,
    rho_to_pairs,
    singlet,
    state_from_spec,
    tensor_product,
    werner,
)


def random_density_matrix(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def brute_force_tensor(rho):
    """Entry-by-entry trace with explicit index loops, no kron."""
    paulis = [pauli("x"), pauli("y"), pauli("z")]
    t = np.zeros((3, 3))
    for i, si in enumerate(paulis):
        for j, sj in enumerate(paulis):
            acc = 0j
            for a in range(2):
                for b in range(2):
                    for c in range(2):
                        for d in range(2):
                            # <ab| rho |cd> <cd| si x sj |ab>
                            acc += rho[2 * a + b, 2 * c + d] * si[c, a] * sj[d, b]
            t[i, j] = acc.real
    return t


def test_pauli_basics():
    assert np.array_equal(pauli("z"), np.diag([1, -1]))
    assert np.allclose(pauli("x") @ pauli("x"), np.eye(2))
    assert abs(np.trace(pauli("y"))) == 0
    with pytest.raises(InvalidInputError):
        pauli("w")


def test_tensor_product():
    assert np.array_equal(tensor_product(pauli("z"), pauli("z")), np.diag([1, -1, -1, 1]))
    assert np.array_equal(tensor_product(np.eye(2), np.eye(2)), np.eye(4))
    assert tensor_product(pauli("x"), pauli("z"))[0, 2] == 1
    with pytest.raises(InvalidInputError):
        tensor_product(np.eye(4), np.eye(2))


def test_singlet():
    s = singlet()
    assert np.allclose(correlation_tensor(s), -np.eye(3), atol=1e-15)
    assert np.allclose(brute_force_tensor(s.rho), -np.eye(3), atol=1e-15)
    assert abs(np.trace(s.rho) - 1) < 1e-15
    assert abs(s.purity() - 1) < 1e-14


def test_werner():
    assert np.allclose(werner(1).rho, singlet().rho)
    assert np.allclose(correlation_tensor(werner(0)), 0)
    assert np.allclose(correlation_tensor(werner(0.5)), -0.5 * np.eye(3), atol=1e-15)
    v = 0.8989**2
    assert np.allclose(brute_force_tensor(werner(v).rho), -v * np.eye(3), atol=1e-14)
    with pytest.raises(InvalidInputError):
        werner(1.2)


@pytest.mark.parametrize("v", [0.25, 0.5, 0.81, 1.0])
def test_classical_mixture_tensor(v):
    expected = np.diag([0, 0, math.sqrt(v)])
    assert np.allclose(brute_force_tensor(classical_mixture(v).rho), expected, atol=1e-15)
    assert np.allclose(correlation_tensor(classical_mixture(v)), expected, atol=1e-15)


def test_classical_mixture_limits():
    assert np.allclose(classical_mixture(0).rho, np.eye(4) / 4)
    with pytest.raises(InvalidInputError):
        classical_mixture(-0.1)


def test_maximally_mixed_tensor_is_zero():
    assert np.allclose(correlation_tensor(maximally_mixed()), 0)


def test_tensor_matches_brute_force_on_random_states():
    rng = np.random.default_rng(11)
    for _ in range(50):
        rho = random_density_matrix(rng)
        assert np.allclose(correlation_tensor(TwoQubitState(rho)), brute_force_tensor(rho), atol=1e-12)


def test_tensor_linearity():
    rng = np.random.default_rng(3)
    for _ in range(100):
        r1, r2 = random_density_matrix(rng), random_density_matrix(rng)
        lam = rng.random()
        mixed = TwoQubitState(lam * r1 + (1 - lam) * r2)
        expected = lam * correlation_tensor(TwoQubitState(r1)) + (1 - lam) * correlation_tensor(TwoQubitState(r2))
        assert np.allclose(correlation_tensor(mixed), expected, atol=1e-12)


def test_werner_scales_singlet_tensor():
    rng = np.random.default_rng(5)
    ts = correlation_tensor(singlet())
    for v in rng.random(20):
        assert np.allclose(correlation_tensor(werner(v)), v * ts, atol=1e-12)


def test_tensor_entries_bounded():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        t = correlation_tensor(TwoQubitState(random_density_matrix(rng)))
        assert np.max(np.abs(t)) <= 1 + 1e-12


@given(st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_constructors_are_valid_states(v):
    for state in (werner(v), classical_mixture(v)):
        rho = state.rho
        assert np.allclose(rho, rho.conj().T, atol=1e-12)
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_invalid_states_rejected():
    with pytest.raises(InvalidInputError):
        TwoQubitState(np.eye(4))  # trace 4
    with pytest.raises(InvalidInputError):
        TwoQubitState(np.diag([1.5, -0.5, 0, 0]))
    bad = np.eye(4, dtype=complex) / 4
    bad[0, 1] = 0.1j
    with pytest.raises(InvalidInputError):
        TwoQubitState(bad)


def test_imaginary_residue_detected():
    rho = np.eye(4, dtype=complex) / 4
    rho[0, 3] = 0.1j  # non-Hermitian on purpose: only reachable by bypassing validation
    with pytest.raises(NumericalConsistencyError):
        correlation_tensor(rho)


def test_noise_model():
    nm = NoiseModel(0.81, 0.64)
    assert abs(nm.V - 0.72) < 1e-15
    assert NoiseModel.symmetric(0.8989).V == pytest.approx(0.8989, abs=1e-15)
    with pytest.raises(InvalidInputError):
        NoiseModel(1.1, 0.5)


def test_state_file_roundtrip(tmp_path):
    path = tmp_path / "state.json"
    path.write_text('{"rho": ' + str(rho_to_pairs(werner(0.7).rho)).replace("'", '"') + "}")
    state = load_state_file(path)
    assert np.allclose(state.rho, werner(0.7).rho)


def test_state_file_rejects_non_state(tmp_path):
    path = tmp_path / "state.json"
    path.write_text('{"rho": ' + str(rho_to_pairs(2 * np.eye(4))) + "}")
    with pytest.raises(InvalidInputError):
        load_state_file(path)
    path.write_text('{"oops": 1}')
    with pytest.raises(InvalidInputError):
        load_state_file(path)


def test_state_from_spec():
    assert np.allclose(state_from_spec({"kind": "werner", "v": 0.3}).rho, werner(0.3).rho)
    assert state_from_spec({"kind": "singlet"}).label == "singlet"
    with pytest.raises(InvalidInputError):
        state_from_spec({"kind": "ghz"})
    with pytest.raises(InvalidInputError):
        state_from_spec({"kind": "werner"})

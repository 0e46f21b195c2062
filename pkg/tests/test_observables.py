import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from avqds.models import tfim_hamiltonian
from avqds.observables import (
    Observable,
    ObservableSet,
    fidelity,
    loschmidt_echo,
    nearest_time_values,
    pauli_correlator,
    trajectory_std,
)
from avqds.state import product_state

from conftest import dense, random_state

BELL = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def test_correlator_examples():
    zz = product_state([0, 0])
    assert pauli_correlator(zz, "z", 0, 1) == pytest.approx(1.0)
    assert pauli_correlator(zz, "x", 0, 1) == pytest.approx(0.0)
    assert pauli_correlator(BELL, "x", 0, 1) == pytest.approx(1.0)
    assert pauli_correlator(BELL, "x", 0, 1) == pytest.approx(np.vdot(BELL, dense("XX") @ BELL).real)
    assert pauli_correlator(BELL, "y", 1, 0) == pytest.approx(-1.0)
    for bad in [("x", 0, 0), ("x", 0, 2), ("w", 0, 1)]:
        with pytest.raises(ValueError):
            pauli_correlator(BELL, *bad)


def test_correlators_bounded(rng):
    for _ in range(30):
        psi = random_state(rng, 4)
        for axis in "xyz":
            assert abs(pauli_correlator(psi, axis, 0, 3)) <= 1 + 1e-12


def test_fidelity_and_echo(rng):
    psi = random_state(rng, 3)
    assert fidelity(psi, psi) == pytest.approx(1.0)
    for phi in (0.3, 2.0, -1.1):
        assert fidelity(psi, np.exp(1j * phi) * psi) == pytest.approx(1.0)
    assert loschmidt_echo(product_state([0, 0]), product_state([1, 0])) == 0.0
    for _ in range(20):
        a, b = random_state(rng, 3), random_state(rng, 3)
        assert 0 <= fidelity(a, b) <= 1 + 1e-12
        assert fidelity(a, b) == pytest.approx(fidelity(b, a))


def test_echo_two_qubit_quench():
    h = tfim_hamiltonian(2, 1.0, -2.0, periodic=False)
    psi0 = product_state([0, 0])
    for t in (0.05, 0.2):
        psi_t = expm(-1j * t * h.matrix()) @ psi0
        oracle = abs(np.vdot(psi0, psi_t)) ** 2
        assert loschmidt_echo(psi0, psi_t) == pytest.approx(oracle, abs=1e-14)
        # short-time expansion 1 - t^2 var(H) on |00>: var = 2 h_x^2 = 8
        assert loschmidt_echo(psi0, psi_t) == pytest.approx(1 - 8 * t**2, abs=10 * t**4 * 64)


def test_trajectory_std():
    x = np.linspace(0, 1, 7)
    assert trajectory_std(x, x) == 0.0
    for n, d in [(2, 0.1), (10, -0.3), (101, 1e-3)]:
        assert trajectory_std(np.full(n, d), np.zeros(n)) == pytest.approx(abs(d) * np.sqrt(n / (n - 1)))
    with pytest.raises(ValueError):
        trajectory_std([1.0], [1.0])
    with pytest.raises(ValueError):
        trajectory_std([1.0, 2.0], [1.0])


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.floats(-5, 5))
def test_trajectory_std_shift_and_symmetry(xs, d):
    xs = np.array(xs)
    ys = xs + d
    assert trajectory_std(xs, ys) == pytest.approx(trajectory_std(ys, xs))
    assert trajectory_std(xs, ys) == pytest.approx(abs(d) * np.sqrt(len(xs) / (len(xs) - 1)), abs=1e-9)


def test_nearest_time_values():
    t_ref = np.arange(0, 1.0001, 0.25)
    v = t_ref * 10
    got = nearest_time_values(t_ref, v, [0.0, 0.1, 0.13, 0.26, 0.9, 1.2, -1])
    np.testing.assert_array_equal(got, [0, 0, 2.5, 2.5, 10, 10, 0])


def test_observable_set():
    obs = ObservableSet.correlators(8, [(0, 1), (0, 7)])
    assert obs.names == ("energy", "corr_xx_0_1", "corr_yy_0_1", "corr_xx_0_7", "corr_yy_0_7")
    assert not obs.needs_reference
    with pytest.raises(ValueError):
        ObservableSet([Observable("a", "energy"), Observable("a", "loschmidt")], 2)
    with pytest.raises(ValueError):
        ObservableSet([Observable("c", "pauli_correlator", "x", (0, 5))], 2)
    with pytest.raises(ValueError):
        Observable("c", "magic")
    with pytest.raises(ValueError):
        Observable("c", "pauli_correlator")


def test_observable_set_evaluate():
    h = tfim_hamiltonian(2, 1.0, -2.0, periodic=False)
    obs = ObservableSet(
        [Observable("energy", "energy"), Observable("echo", "loschmidt"),
         Observable("f", "fidelity"), Observable("inf", "infidelity"),
         Observable("sxx", "pauli_correlator", "x", (0, 1), scale=0.25)],
        2,
    )
    assert obs.needs_reference and len(obs) == 5
    psi0 = product_state([0, 0])
    vals = obs.evaluate(BELL, h=h, psi0=psi0, reference=psi0)
    assert vals["energy"] == pytest.approx(np.vdot(BELL, h.matrix() @ BELL).real)
    assert vals["echo"] == pytest.approx(0.5) and vals["f"] == pytest.approx(0.5)
    assert vals["inf"] == pytest.approx(0.5)
    assert vals["sxx"] == pytest.approx(0.25)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qnmarl import statevector as sv
from qnmarl.errors import ConfigError, UsageError

from oracles import gate_unitary, tv, zero_state

R2 = 1 / np.sqrt(2)
angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def random_gate(rng, n):
    kind = rng.choice(["H", "RY", "RX", "CZ"] if n > 1 else ["H", "RY", "RX"])
    if kind == "CZ":
        a, b = rng.choice(n, size=2, replace=False)
        return sv.CZ(int(a), int(b))
    q = int(rng.integers(n))
    if kind == "H":
        return sv.H(q)
    return getattr(sv, kind)(q, rng.uniform(-np.pi, np.pi))


def state_from(amps):
    amps = np.asarray(amps, dtype=complex)
    return sv.StateVector(int(np.log2(len(amps))), amps)


class TestNewState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(sv.new_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(sv.new_state(2).amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [0, 11, -1])
    def test_out_of_range(self, n):
        with pytest.raises(ConfigError):
            sv.new_state(n)


class TestGates:
    def test_hadamard(self):
        out = sv.apply_gate(sv.new_state(1), sv.H(0))
        np.testing.assert_allclose(out.amplitudes, [R2, R2], atol=1e-15)

    def test_ry_pi(self):
        out = sv.apply_gate(sv.new_state(1), sv.RY(0, np.pi))
        np.testing.assert_allclose(out.amplitudes, [0, 1], atol=1e-15)

    def test_cz_on_11(self):
        out = sv.apply_gate(state_from([0, 0, 0, 1]), sv.CZ(0, 1))
        np.testing.assert_allclose(out.amplitudes, [0, 0, 0, -1])

    def test_index_out_of_range(self):
        with pytest.raises(UsageError):
            sv.apply_gate(sv.new_state(2), sv.H(2))

    def test_cz_same_qubit_rejected(self):
        with pytest.raises(UsageError):
            sv.CZ(1, 1)

    @pytest.mark.parametrize("gate", [sv.H(0), sv.RY(0, 0.3), sv.RX(0, -1.2), sv.CZ(0, 1)])
    def test_matrices_unitary(self, gate):
        m = gate.matrix()
        np.testing.assert_allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-12)

    def test_lsb_is_qubit_zero(self):
        # X on qubit 0 of |00> gives basis state 1, on qubit 1 gives basis state 2.
        s = sv.apply_gate(sv.new_state(2), sv.RX(0, np.pi))
        assert np.argmax(np.abs(s.amplitudes)) == 1
        s = sv.apply_gate(sv.new_state(2), sv.RX(1, np.pi))
        assert np.argmax(np.abs(s.amplitudes)) == 2


class TestCostPhase:
    def test_zero_gamma_identity(self, rng):
        s = sv.apply_circuit(sv.new_state(2), [sv.H(0), sv.RY(1, 0.4)])
        out = sv.apply_cost_phase(s, rng.normal(size=4), 0.0)
        np.testing.assert_array_equal(out.amplitudes, s.amplitudes)

    def test_constant_cost_keeps_probs(self):
        s = sv.apply_circuit(sv.new_state(2), [sv.H(0), sv.RY(1, 0.4)])
        out = sv.apply_cost_phase(s, [2.5] * 4, 1.3)
        np.testing.assert_allclose(sv.measure_probs(out), sv.measure_probs(s), atol=1e-15)

    def test_hand_value(self):
        out = sv.apply_cost_phase(state_from([R2, R2]), [0, 1], np.pi)
        np.testing.assert_allclose(out.amplitudes, [R2, -R2], atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(UsageError):
            sv.apply_cost_phase(sv.new_state(2), [0, 1], 0.1)


class TestMixer:
    def test_zero_beta_identity(self):
        s = state_from([0.6, 0.8j])
        np.testing.assert_allclose(sv.apply_mixer(s, 0.0).amplitudes, s.amplitudes)

    def test_half_pi_flips(self):
        out = sv.apply_mixer(sv.new_state(1), np.pi / 2)
        np.testing.assert_allclose(np.abs(out.amplitudes), [0, 1], atol=1e-15)

    def test_composition(self):
        s = sv.apply_circuit(sv.new_state(3), [sv.H(0), sv.RY(2, 0.7)])
        twice = sv.apply_mixer(sv.apply_mixer(s, np.pi / 4), np.pi / 4)
        once = sv.apply_mixer(s, np.pi / 2)
        np.testing.assert_allclose(twice.amplitudes, once.amplitudes, atol=1e-14)


class TestMeasure:
    def test_basis(self):
        np.testing.assert_array_equal(sv.measure_probs(sv.new_state(1)), [1, 0])

    def test_hh_uniform(self):
        s = sv.apply_circuit(sv.new_state(2), [sv.H(0), sv.H(1)])
        np.testing.assert_allclose(sv.measure_probs(s), [0.25] * 4, atol=1e-15)

    def test_plus_six(self):
        s = sv.apply_circuit(sv.new_state(6), [sv.H(q) for q in range(6)])
        np.testing.assert_allclose(sv.measure_probs(s), np.full(64, 1 / 64), atol=1e-15)


class TestSample:
    def test_deterministic_state(self, rng):
        counts = sv.sample(sv.new_state(1), 500, rng)
        assert counts.tolist() == [500, 0]

    def test_uniform_tv(self, rng):
        s = sv.apply_circuit(sv.new_state(2), [sv.H(0), sv.H(1)])
        counts = sv.sample(s, 10_000, rng)
        assert counts.sum() == 10_000
        assert tv(counts / 10_000, [0.25] * 4) < 0.05

    def test_same_seed(self):
        s = sv.apply_circuit(sv.new_state(3), [sv.H(0), sv.RY(1, 1.0), sv.H(2)])
        a = sv.sample(s, 300, np.random.default_rng(7))
        b = sv.sample(s, 300, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_zero_shots(self, rng):
        with pytest.raises(UsageError):
            sv.sample(sv.new_state(1), 0, rng)

    @given(st.lists(angles, min_size=2, max_size=2), st.integers(0, 2**31 - 1))
    def test_converges_for_any_two_qubit_state(self, thetas, seed):
        s = sv.apply_circuit(sv.new_state(2), [sv.RY(0, thetas[0]), sv.RX(1, thetas[1]),
                                               sv.CZ(0, 1)])
        counts = sv.sample(s, 10_000, np.random.default_rng(seed))
        assert tv(counts / 10_000, sv.measure_probs(s)) < 0.05


class TestExpectation:
    def test_delta(self):
        assert sv.expectation_cost(sv.new_state(1), [3, 7]) == 3

    def test_uniform_one(self):
        assert sv.expectation_cost(state_from([R2, R2]), [0, 1]) == pytest.approx(0.5)

    def test_uniform_two(self):
        s = state_from([0.5] * 4)
        assert sv.expectation_cost(s, [1, 2, 3, 4]) == pytest.approx(2.5)

    def test_mismatch(self):
        with pytest.raises(UsageError):
            sv.expectation_cost(sv.new_state(1), [1, 2, 3])


class TestProperties:
    @given(st.integers(1, 5), st.integers(0, 100), st.integers(0, 2**31 - 1))
    def test_norm_preserved(self, n, n_gates, seed):
        r = np.random.default_rng(seed)
        s = sv.new_state(n)
        for _ in range(n_gates):
            s = sv.apply_gate(s, random_gate(r, n))
        assert abs(s.norm_sq() - 1) < 1e-12

    @given(angles, st.integers(0, 2), st.integers(0, 2**31 - 1))
    def test_ry_round_trip(self, theta, q, seed):
        r = np.random.default_rng(seed)
        s = sv.new_state(3)
        for _ in range(5):
            s = sv.apply_gate(s, random_gate(r, 3))
        back = sv.apply_gate(sv.apply_gate(s, sv.RY(q, theta)), sv.RY(q, -theta))
        np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)

    @given(angles, st.integers(0, 2**31 - 1))
    def test_phase_keeps_probs(self, gamma, seed):
        r = np.random.default_rng(seed)
        s = sv.new_state(3)
        for _ in range(6):
            s = sv.apply_gate(s, random_gate(r, 3))
        out = sv.apply_cost_phase(s, r.normal(size=8), gamma)
        np.testing.assert_allclose(sv.measure_probs(out), sv.measure_probs(s), atol=1e-12)

    def test_dense_oracle_100_circuits(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 4))
            gates = [random_gate(rng, n) for _ in range(int(rng.integers(1, 15)))]
            if rng.random() < 0.5:
                gates.append(sv.PHASE(rng.normal(size=1 << n), rng.uniform(-3, 3)))
            psi = zero_state(n)
            for g in gates:
                psi = gate_unitary(g.kind, g.qubits, g.angle, n, g.cost) @ psi
            got = sv.apply_circuit(sv.new_state(n), gates).amplitudes
            assert np.max(np.abs(got - psi)) < 1e-10

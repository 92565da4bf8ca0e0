import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qnmarl import mitigation as mit
from qnmarl import qaoa
from qnmarl import statevector as sv
from qnmarl.errors import MitigationError, UsageError

from oracles import lagrange_at_zero

coef = st.floats(-10, 10, allow_nan=False)


def ten_gate_circuit(rng):
    gates = [sv.H(0), sv.H(1), sv.RY(2, rng.uniform(-3, 3)), sv.CZ(0, 1),
             sv.RX(1, rng.uniform(-3, 3)), sv.PHASE(rng.normal(size=8), 0.7),
             sv.RY(0, rng.uniform(-3, 3)), sv.CZ(1, 2), sv.RX(2, 0.4), sv.H(2)]
    assert len(gates) == 10
    return gates


class TestZne:
    def test_constant(self):
        assert mit.zne_extrapolate([0.5, 0.5, 0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_hand_value(self):
        assert mit.zne_extrapolate([0.9, 0.82, 0.7]) == pytest.approx(0.94, abs=1e-12)

    @given(coef, coef, coef)
    def test_quadratic_exact(self, a, b, c):
        vals = [a * x * x + b * x + c for x in (1, 2, 3)]
        assert abs(mit.zne_extrapolate(vals) - c) < 1e-9

    def test_matches_lagrange_oracle(self, rng):
        for _ in range(20):
            ys = rng.normal(size=3)
            assert mit.zne_extrapolate(ys) == pytest.approx(lagrange_at_zero([1, 2, 3], ys))

    @pytest.mark.parametrize("vals", [[1.0, np.nan, 2.0], [1.0, 2.0], [1, 2, 3, 4],
                                      [np.inf, 0, 0]])
    def test_bad_input(self, vals):
        with pytest.raises(UsageError):
            mit.zne_extrapolate(vals)


class TestFolding:
    def test_scale_one_unchanged(self, rng):
        gates = ten_gate_circuit(rng)
        assert mit.fold_noise(gates, 1) == gates

    def test_scale_three(self, rng):
        gates = ten_gate_circuit(rng)
        folded = mit.fold_noise(gates, 3)
        assert len(folded) == 30
        a = sv.apply_circuit(sv.new_state(3), gates)
        b = sv.apply_circuit(sv.new_state(3), folded)
        np.testing.assert_allclose(b.amplitudes, a.amplitudes, atol=1e-10)
        np.testing.assert_allclose(sv.measure_probs(b), sv.measure_probs(a), atol=1e-10)

    @pytest.mark.parametrize("scale", [0, 2, 4, -1, 1.5])
    def test_bad_scale(self, rng, scale):
        with pytest.raises(UsageError):
            mit.fold_noise(ten_gate_circuit(rng), scale)

    def test_scale_two_partial(self, rng):
        gates = ten_gate_circuit(rng)
        two = mit.scaled_circuit(gates, 2)
        assert len(two) == 20
        a = sv.measure_probs(sv.apply_circuit(sv.new_state(3), gates))
        b = sv.measure_probs(sv.apply_circuit(sv.new_state(3), two))
        np.testing.assert_allclose(a, b, atol=1e-10)

    @given(st.integers(0, 2**31 - 1), st.sampled_from([1, 3, 5]))
    def test_semantics_preserved(self, seed, scale):
        r = np.random.default_rng(seed)
        gates = ten_gate_circuit(r)
        a = sv.measure_probs(sv.apply_circuit(sv.new_state(3), gates))
        b = sv.measure_probs(sv.apply_circuit(sv.new_state(3), mit.fold_noise(gates, scale)))
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_zne_recovers_noiseless_quadratic_channel(self, rng):
        pol = qaoa.QaoaPolicy(n_qubits=4, depth_p=1)
        angles, cost = rng.uniform(0, 3, 4), rng.normal(size=16)
        gates = qaoa.ansatz_gates(pol, angles, cost)
        ideal = float(sv.measure_probs(sv.apply_circuit(sv.new_state(4), gates)) @ cost)
        est, values = mit.zne_expectation(gates, 4, cost, error_per_gate=1e-3)
        # Depolarizing noise pulls values toward the mean; extrapolation removes most of it.
        assert abs(est - ideal) < abs(values[0] - ideal)


class TestReadout:
    def test_identity(self, rng):
        p = rng.dirichlet(np.ones(4))
        np.testing.assert_allclose(mit.mitigate_readout(np.eye(4), p), p)

    def test_hand_two_by_two(self):
        m = np.array([[0.9, 0.2], [0.1, 0.8]])
        np.testing.assert_allclose(mit.mitigate_readout(m, [0.55, 0.45]), [0.5, 0.5],
                                   atol=1e-12)

    def test_round_trip_100(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 4))
            m = rng.uniform(0, 0.15, (1 << n, 1 << n))
            np.fill_diagonal(m, 0.0)
            m /= np.maximum(m.sum(axis=0), 1e-12) / rng.uniform(0, 0.2)
            np.fill_diagonal(m, 1.0 - m.sum(axis=0))
            p_true = rng.dirichlet(np.ones(1 << n) * 2)
            observed = m @ p_true
            got, clipped = mit.mitigate_readout(m, observed, return_clipped=True)
            assert not clipped
            assert np.max(np.abs(got - p_true)) < 1e-10
            np.testing.assert_allclose(m @ got, observed, atol=1e-10)

    def test_singular(self):
        m = np.array([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(MitigationError):
            mit.mitigate_readout(m, [0.5, 0.5])

    def test_clipping(self):
        m = np.array([[0.9, 0.2], [0.1, 0.8]])
        p, clipped = mit.mitigate_readout(m, [0.95, 0.05], return_clipped=True)
        assert clipped
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)

    def test_not_stochastic(self):
        with pytest.raises(UsageError):
            mit.mitigate_readout(np.array([[0.9, 0.2], [0.2, 0.8]]), [0.5, 0.5])

    def test_tensor_confusion_columns(self):
        m = mit.confusion_matrix(3, 0.02, 0.05)
        np.testing.assert_allclose(m.sum(axis=0), 1.0)
        # P(read basis 1 | true 0) flips only qubit 0.
        assert m[1, 0] == pytest.approx(0.02 * 0.98 * 0.98)

    def test_noise_then_mitigate(self, rng):
        m = mit.confusion_matrix(3, 0.05)
        p = rng.dirichlet(np.ones(8) * 3)
        counts = rng.multinomial(200_000, p)
        noisy = mit.apply_readout_noise(counts, m, rng)
        assert noisy.sum() == 200_000
        fixed = mit.mitigate_readout(m, noisy / noisy.sum())
        assert np.max(np.abs(fixed - p)) < 0.01

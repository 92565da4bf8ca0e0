"""Noise folding, zero-noise extrapolation and readout correction."""

import numpy as np

from qnmarl import mitigation as mit
from qnmarl import qaoa
from qnmarl import statevector as sv

rng = np.random.default_rng(1)
policy = qaoa.QaoaPolicy(n_qubits=4, depth_p=1)
angles, cost = rng.uniform(0, np.pi, 4), rng.normal(size=16)
gates = qaoa.ansatz_gates(policy, angles, cost)
ideal = sv.measure_probs(sv.apply_circuit(sv.new_state(4), gates)) @ cost
print(f"{len(gates)} gates, noiseless expected cost {ideal:.5f}")

# Folding G -> G G^dagger G triples the gate count but not the result.
folded = mit.fold_noise(gates, 3)
same = sv.measure_probs(sv.apply_circuit(sv.new_state(4), folded)) @ cost
print(f"folded x3: {len(folded)} gates, expected cost {same:.5f}")

# %% With depolarizing noise per gate, extrapolate back to zero noise.
for err in (1e-3, 5e-3, 1e-2):
    est, values = mit.zne_expectation(gates, 4, cost, error_per_gate=err)
    print(f"error/gate {err:g}: scaled values {np.round(values, 4)} -> ZNE {est:.5f} "
          f"(raw error {abs(values[0] - ideal):.2e}, after {abs(est - ideal):.2e})")

# %% Readout errors and their inversion
m = mit.confusion_matrix(4, 0.03, 0.06)
p = sv.measure_probs(sv.apply_circuit(sv.new_state(4), gates))
counts = rng.multinomial(100_000, p)
noisy = mit.apply_readout_noise(counts, m, rng)
fixed = mit.mitigate_readout(m, noisy / noisy.sum())
print("max error before correction:", np.abs(noisy / noisy.sum() - p).max().round(4))
print("max error after correction: ", np.abs(fixed - p).max().round(4))

"""Statevectors, the plan circuit and its gradients, step by step."""

import numpy as np

from qnmarl import gridworld as gw
from qnmarl import qaoa
from qnmarl import statevector as sv

# Two qubits, a Hadamard and an entangling CZ.
state = sv.apply_circuit(sv.new_state(2), [sv.H(0), sv.H(1), sv.CZ(0, 1)])
print("amplitudes:", np.round(state.amplitudes, 3))
print("probabilities:", sv.measure_probs(state))

rng = np.random.default_rng(0)
print("500 shots:", sv.sample(state, 500, rng))

# %% The plan circuit on a real observation
world = gw.init_world(gw.WorldConfig(dims=(12, 12, 6), n_agents=3), rng)
obs = gw.observe(world, 0)
policy = qaoa.QaoaPolicy()
angles, cost = qaoa.encode_observation(obs, policy.n_qubits)
plan_state = qaoa.build_state(policy, angles, cost)
probs = sv.measure_probs(plan_state)
dist = qaoa.plan_distribution(probs, policy.n_qubits)
prior = qaoa.safe_prior(obs).distribution
print("plan distribution:", np.round(dist, 3))
print("safe prior:       ", np.round(prior, 3))
print("KL to prior (nats):", round(qaoa.kl_to_prior(dist, prior), 4))

plan, sampled = qaoa.sample_latent(policy, plan_state, rng)
print("sampled plan:", plan.plan_id, "from bitstring", format(plan.raw_bitstring, "06b"))

# %% Gradient of the expected cost, and a few descent steps
for step in range(5):
    grad = qaoa.parameter_shift_grad(policy, angles, cost, cost)
    value = sv.measure_probs(qaoa.build_state(policy, angles, cost)) @ cost
    print(f"step {step}: expected cost {value:.4f}  |grad| {np.linalg.norm(grad):.4f}")
    policy = qaoa.update_params(policy, grad, lr=0.1)

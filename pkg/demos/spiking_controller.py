"""A single LIF neuron, then a small spiking Q-network learning a two-state task."""

import numpy as np

from qnmarl import harness as h
from qnmarl import snn

cfg = snn.LifConfig()
state = snn.LifState.zeros(1)
trace = []
for t in range(40):
    state, spk = snn.lif_step(state, cfg, [1.5 if t < 30 else 0.0])
    trace.append("|" if spk[0] else ".")
print("spikes under constant drive then silence:")
print("".join(trace))

# %% Rate coding: feature value f fires with probability f/2 per step.
rng = np.random.default_rng(2)
trains = snn.encode_rate(np.array([0.0, 0.5, 1.0]), 20, rng)
print("spike counts per input over 20 ms:", trains.sum(axis=0))

# %% Learn Q(s, a) with reward 0.1 when the action matches the state.
net = snn.SpikingQNet.init(2, rng, n_hidden=128, n_actions=2, input_gain=4.0)
buf = h.ReplayBuffer(2000)
eye = np.eye(2)
s = 0
for update in range(1, 601):
    a = int(rng.integers(2))
    nxt = int(rng.integers(2))
    buf.add(h.Transition(eye[s], -1, a, 0.1 if a == s else 0.0, eye[nxt], False))
    s = nxt
    _, loss = net.td_update(buf.sample(32, rng), 0.5, rng)
    if update % 50 == 0:
        net.sync_target()
    if update % 200 == 0:
        q = [np.mean([net.forward_q(snn.encode_rate(eye[k], 20, rng))[0] for _ in range(30)],
                     axis=0) for k in range(2)]
        print(f"update {update}: loss {loss:.5f}  Q(s=0) {np.round(q[0], 3)}  "
              f"Q(s=1) {np.round(q[1], 3)}")

# Q mixes output spike rate with the final membrane potential.
q, record = net.forward_q(snn.encode_rate(eye[0], 20, rng))
print("hidden spikes:", int(record.hidden_counts.sum()), " output spikes:", record.counts)

"""Leaky integrate-and-fire spiking Q-network.

Input features are rate-coded into Bernoulli spike trains, pushed through a
hidden and an output LIF layer, and decoded as
``Q(a) = spike_count(a) / steps + 0.1 * final_membrane(a)``.

Learning is backprop-through-time with the fast-sigmoid surrogate
``1 / (1 + alpha |v - u_th|)^2`` standing in for the spike derivative; the
reset is treated as a constant (stop-gradient).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TrainingError, UsageError
from .plans import HOVER, N_ACTIONS, N_PLANS, PLAN_ACTION

log = logging.getLogger(__name__)

R_MAX = 0.5          # spike probability per step at feature value 1
LATENT_BIAS = 0.3    # extra current for the hidden group of the active plan
MEMBRANE_WEIGHT = 0.1


@dataclass(frozen=True)
class LifConfig:
    tau_m: float = 10.0
    u_th: float = 1.0
    refractory: float = 2.0
    dt: float = 1.0
    u_reset: float = 0.0

    def __post_init__(self):
        if not (self.tau_m > 0 and self.dt > 0 and self.dt <= self.tau_m):
            raise UsageError("need tau_m > 0 and 0 < dt <= tau_m")
        if self.refractory < 0:
            raise UsageError("refractory period must be >= 0")

    @property
    def leak(self) -> float:
        return self.dt / self.tau_m


@dataclass
class LifState:
    u: np.ndarray
    refractory_remaining: np.ndarray

    @classmethod
    def zeros(cls, shape, config: LifConfig = LifConfig()):
        return cls(np.full(shape, config.u_reset, dtype=float), np.zeros(shape))


def lif_step(state: LifState, config: LifConfig, input_current):
    """One forward-Euler step; returns ``(new_state, spike_flags)``."""
    current = np.asarray(input_current, dtype=float)
    active = state.refractory_remaining <= 0
    v = state.u + config.leak * (current - state.u)
    spikes = active & (v >= config.u_th)
    u = np.where(active & ~spikes, v, config.u_reset)
    remaining = np.where(
        spikes, config.refractory,
        np.where(active, 0.0, np.maximum(state.refractory_remaining - config.dt, 0.0)),
    )
    return LifState(u, remaining), spikes


def surrogate_sigma_prime(x, alpha: float = 1.0):
    """Fast-sigmoid derivative ``1 / (1 + alpha |x|)^2``."""
    if alpha <= 0:
        raise UsageError("surrogate slope must be positive")
    return 1.0 / (1.0 + alpha * np.abs(x)) ** 2


def fast_sigmoid(x, alpha: float = 1.0):
    """``x / (1 + alpha |x|)``, whose derivative is ``surrogate_sigma_prime``."""
    return x / (1.0 + alpha * np.abs(x))


def encode_rate(features, window: float, rng: np.random.Generator, dt: float = 1.0,
                r_max: float = R_MAX):
    """Bernoulli spike trains, shape ``(..., steps, n_features)``.

    Features outside [0, 1] are clipped (and logged).
    """
    f = np.asarray(features, dtype=float)
    if np.any((f < 0) | (f > 1)):
        log.debug("rate encoder clipped %d features", int(np.sum((f < 0) | (f > 1))))
        f = np.clip(f, 0.0, 1.0)
    steps = int(round(window / dt))
    shape = f.shape[:-1] + (steps, f.shape[-1])
    p = (f * r_max * dt)[..., None, :]
    # Zero-rate inputs never fire, so only draw for columns that can.
    live = np.flatnonzero(np.any(p > 0, axis=tuple(range(p.ndim - 1))))
    out = np.zeros(shape)
    out[..., live] = rng.random(shape[:-1] + (live.size,), dtype=np.float32) < p[..., live]
    return out


@dataclass
class SpikeRecord:
    counts: np.ndarray                      # output spike counts per action
    hidden_counts: Optional[np.ndarray] = None
    raster: Optional[np.ndarray] = None     # (steps, n_out) output spikes

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))


def spike_entropy(record) -> float:
    """Shannon entropy (nats) of the normalized output spike-count distribution."""
    counts = np.asarray(getattr(record, "counts", record), dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(max(0.0, -np.sum(p * np.log(p))))


# ---------------------------------------------------------------------------
# layer simulation with traces for BPTT


@dataclass
class _Trace:
    v: np.ndarray       # pre-reset membrane, (B, T, N)
    s: np.ndarray       # spikes (or smoothed activations)
    carry: np.ndarray   # d u[t] / d v[t]
    sg: np.ndarray      # d s[t] / d v[t] (surrogate)
    u_final: np.ndarray


def _run_layer(currents, cfg: LifConfig, alpha: float, smooth: bool = False,
               keep_trace: bool = True):
    """Simulate a LIF layer driven by ``currents`` of shape (B, T, N)."""
    B, T, N = currents.shape
    k = cfg.leak
    drive = k * currents
    u = np.full((B, N), cfg.u_reset)
    refr = np.zeros((B, N))
    s_all = np.empty((B, T, N))
    v_all = np.empty((B, T, N))
    active_all = np.ones((B, T, N), dtype=bool)
    for t in range(T):
        v = (1.0 - k) * u + drive[:, t]
        v_all[:, t] = v
        if smooth:
            s_all[:, t] = fast_sigmoid(v - cfg.u_th, alpha)
            u = v
            continue
        active = refr <= 0
        spk = active & (v >= cfg.u_th)
        s_all[:, t] = spk
        active_all[:, t] = active
        u = np.where(active & ~spk, v, cfg.u_reset)
        refr = np.where(spk, cfg.refractory, np.maximum(refr - cfg.dt, 0.0))
    if not keep_trace:
        return s_all, u
    sg = surrogate_sigma_prime(v_all - cfg.u_th, alpha)
    if smooth:
        carry = np.ones_like(v_all)
    else:
        sg *= active_all
        carry = active_all & (s_all == 0)
    return s_all, u, _Trace(v_all, s_all, carry, sg, u)


def _layer_backward(trace: _Trace, grad_s, grad_u_final, leak: float):
    """Gradient w.r.t. the layer's input currents, shape (B, T, N)."""
    B, T, N = trace.v.shape
    grad_i = np.empty((B, T, N))
    gu = grad_u_final
    for t in range(T - 1, -1, -1):
        gv = gu * trace.carry[:, t] + grad_s[:, t] * trace.sg[:, t]
        grad_i[:, t] = leak * gv
        gu = (1.0 - leak) * gv
    return grad_i


# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def plan_groups(n_hidden: int, n_plans: int = N_PLANS) -> np.ndarray:
    """Hidden neuron -> plan group index (equal contiguous blocks)."""
    return np.arange(n_hidden) * n_plans // n_hidden


@dataclass
class SpikingQNet:
    """Three-layer LIF Q-network with an online and a target copy of its weights."""

    input_dim: int
    n_hidden: int = 128
    n_actions: int = N_ACTIONS
    alpha: float = 1.0
    window: float = 20.0
    lif: LifConfig = field(default_factory=LifConfig)
    w1: np.ndarray = None
    w2: np.ndarray = None
    w1_target: np.ndarray = None
    w2_target: np.ndarray = None
    lr: float = 1e-3

    def __post_init__(self):
        if self.w1 is None or self.w2 is None:
            raise UsageError("use SpikingQNet.init to create a network")
        if self.w1_target is None:
            self.w1_target = self.w1.copy()
            self.w2_target = self.w2.copy()
        if self.w1.shape != self.w1_target.shape or self.w2.shape != self.w2_target.shape:
            raise UsageError("online and target weights must have identical shapes")
        self.groups = plan_groups(self.n_hidden)
        self.opt = Adam([self.w1.shape, self.w2.shape], lr=self.lr)

    @classmethod
    def init(cls, input_dim: int, rng: np.random.Generator, n_hidden: int = 128,
             n_actions: int = N_ACTIONS, input_gain: float = 2.0, output_gain: float = 1.0,
             plan_link: float = 0.0, expected_rate: float = 0.1, **kw):
        """Gaussian weights scaled to the expected number of active inputs.

        ``plan_link`` adds a positive weight from each plan's hidden group to
        the action that plan starts with.
        """
        active_in = max(1.0, expected_rate * R_MAX * input_dim)
        w1 = rng.normal(0.0, input_gain / np.sqrt(active_in), (n_hidden, input_dim))
        w2 = rng.normal(0.0, output_gain / np.sqrt(n_hidden * 0.1), (n_actions, n_hidden))
        if plan_link and n_actions == N_ACTIONS:
            groups = plan_groups(n_hidden)
            for g in range(N_PLANS):
                w2[PLAN_ACTION[g], groups == g] += plan_link
        return cls(input_dim=input_dim, n_hidden=n_hidden, n_actions=n_actions,
                   w1=w1, w2=w2, **kw)

    @property
    def steps(self) -> int:
        return int(round(self.window / self.lif.dt))

    def latent_current(self, plans) -> np.ndarray:
        """(B, n_hidden) bias current for a batch of plan ids (None/-1 = no bias)."""
        plans = np.atleast_1d(np.asarray(plans, dtype=float))
        bias = np.zeros((plans.size, self.n_hidden))
        for i, z in enumerate(plans):
            if z >= 0:
                bias[i, self.groups == int(z)] = LATENT_BIAS
        return bias

    def _forward(self, trains, plans, target=False, keep_trace=False, smooth=False):
        w1 = self.w1_target if target else self.w1
        w2 = self.w2_target if target else self.w2
        # Input trains are sparse in columns; skip the silent ones.
        live = np.flatnonzero(trains.any(axis=(0, 1)))
        i_h = trains[..., live] @ w1[:, live].T + self.latent_current(plans)[:, None, :]
        hidden = _run_layer(i_h, self.lif, self.alpha, smooth, keep_trace)
        s_h = hidden[0]
        i_o = s_h @ w2.T
        out = _run_layer(i_o, self.lif, self.alpha, smooth, keep_trace)
        s_o, u_o = out[0], out[1]
        q = s_o.sum(axis=1) / self.steps + MEMBRANE_WEIGHT * u_o
        if keep_trace:
            return q, (trains[..., live], live, hidden[2], out[2])
        return q, (s_h, s_o)

    def forward_q(self, trains, plan=None, target=False):
        """Q-values for one window of input spikes, shape (steps, input_dim)."""
        trains = np.asarray(trains, dtype=float)
        if trains.shape != (self.steps, self.input_dim):
            raise UsageError(f"input trains must have shape {(self.steps, self.input_dim)}")
        z = -1 if plan is None else getattr(plan, "plan_id", plan)
        q, (s_h, s_o) = self._forward(trains[None], [z], target=target)
        record = SpikeRecord(counts=s_o[0].sum(axis=0), hidden_counts=s_h[0].sum(axis=0),
                             raster=s_o[0])
        return q[0], record

    def q_batch(self, trains, plans, target=False):
        return self._forward(trains, plans, target=target)[0]

    def backward(self, traces, grad_q):
        """Weight gradients of ``sum(grad_q * Q)`` through the surrogate network."""
        trains, live, th, to = traces
        k = self.lif.leak
        steps = self.steps
        grad_s_o = np.broadcast_to(grad_q[:, None, :] / steps, to.s.shape)
        grad_i_o = _layer_backward(to, grad_s_o, MEMBRANE_WEIGHT * grad_q, k)
        g_w2 = _flat(grad_i_o).T @ _flat(th.s)
        grad_s_h = grad_i_o @ self.w2
        grad_i_h = _layer_backward(th, grad_s_h, np.zeros_like(th.u_final), k)
        g_w1 = np.zeros_like(self.w1)
        g_w1[:, live] = _flat(grad_i_h).T @ _flat(trains)
        return g_w1, g_w2

    def sync_target(self) -> "SpikingQNet":
        self.w1_target = self.w1.copy()
        self.w2_target = self.w2.copy()
        return self

    def td_update(self, batch, gamma: float, rng: np.random.Generator, lr=None):
        """One surrogate-gradient TD step on a minibatch; returns ``(self, mean_loss)``.

        ``batch`` is a sequence of objects with ``obs``, ``plan``, ``action``,
        ``reward``, ``next_obs`` and ``done`` attributes (features in [0, 1]).
        """
        if len(batch) == 0:
            raise UsageError("empty TD batch")
        obs = np.stack([t.obs for t in batch])
        nxt = np.stack([t.next_obs for t in batch])
        plans = np.array([t.plan for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch], dtype=float)
        done = np.array([t.done for t in batch], dtype=float)

        trains = encode_rate(obs, self.window, rng, self.lif.dt)
        next_trains = encode_rate(nxt, self.window, rng, self.lif.dt)
        q_next = self.q_batch(next_trains, plans, target=True)
        y = rewards + gamma * (1.0 - done) * q_next.max(axis=1)
        q, traces = self._forward(trains, plans, keep_trace=True)
        rows = np.arange(len(batch))
        err = q[rows, actions] - y
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise TrainingError("non-finite TD loss", {
                "rewards": rewards.tolist(), "q": q.tolist(), "targets": y.tolist()})
        grad_q = np.zeros_like(q)
        grad_q[rows, actions] = 2.0 * err / len(batch)
        g_w1, g_w2 = self.backward(traces, grad_q)
        self.opt.step([self.w1, self.w2], [g_w1, g_w2], lr=lr)
        return self, loss

    def state_dict(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "w1_target": self.w1_target,
                "w2_target": self.w2_target}


def td_loss(reward: float, gamma: float, max_next_q: float, q: float, done: bool = False) -> float:
    """Squared TD error for one transition."""
    target = reward + (0.0 if done else gamma * max_next_q)
    return (target - q) ** 2


def select_action(q_values, epsilon: float, safe_mask, rng: np.random.Generator) -> int:
    """Epsilon-greedy over admissible actions; lowest index wins ties.

    An all-false mask forces hover.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError("epsilon must be in [0, 1]")
    q = np.asarray(q_values, dtype=float)
    mask = np.asarray(safe_mask, dtype=bool)
    admissible = np.flatnonzero(mask)
    explore = rng.random() < epsilon
    if admissible.size == 0:
        log.warning("no admissible action; forcing hover")
        return HOVER
    if explore:
        return int(admissible[rng.integers(admissible.size)])
    return int(admissible[np.argmax(q[admissible])])

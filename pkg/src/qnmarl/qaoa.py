"""Per-agent QAOA latent-plan policy.

The circuit is ``prod_l [mixer(beta_l) cost_phase(gamma_l)] RY(angles) |+>^n``
with the cost table built from the agent's local observation.  Plans are the
top three bits of the measured bitstring.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import statevector as sv
from .errors import InputError, TrainingError, UsageError
from .plans import N_PLANS, PLAN_ACTION, PLAN_BITS, plan_of

# Cost-table weights: safety dominates utility and prior agreement.
W_SAFETY = 5.0
W_UTILITY = 1.0
W_PRIOR = 0.5

PRIOR_FLOOR = 1e-9
SHIFT = np.pi / 2


@dataclass
class QaoaPolicy:
    n_qubits: int = 6
    depth_p: int = 2
    gammas: np.ndarray = None
    betas: np.ndarray = None
    input_angles_scale: float = np.pi
    shots: int = 500
    temporal_reg: float = 0.1
    prev_params: Optional[np.ndarray] = None

    def __post_init__(self):
        if not PLAN_BITS <= self.n_qubits <= sv.MAX_QUBITS:
            raise UsageError(f"n_qubits must be in {PLAN_BITS}..{sv.MAX_QUBITS}")
        if self.depth_p < 0:
            raise UsageError("depth_p must be >= 0")
        if self.shots < 1:
            raise UsageError("shots must be >= 1")
        if self.temporal_reg < 0:
            raise UsageError("temporal_reg must be >= 0")
        p = self.depth_p
        # Small annealing-style ramp: gamma grows, beta shrinks with layer index.
        if self.gammas is None:
            self.gammas = 0.2 * (np.arange(p) + 1) / max(p, 1)
        if self.betas is None:
            self.betas = 0.2 * (1.0 - np.arange(p) / max(p, 1))
        self.gammas = np.asarray(self.gammas, dtype=float).copy()
        self.betas = np.asarray(self.betas, dtype=float).copy()
        if self.gammas.shape != (p,) or self.betas.shape != (p,):
            raise UsageError(f"gammas and betas must each have {p} entries")
        if not (np.all(np.isfinite(self.gammas)) and np.all(np.isfinite(self.betas))):
            raise UsageError("QAOA parameters must be finite")
        if self.prev_params is None:
            self.prev_params = self.params.copy()

    @property
    def params(self) -> np.ndarray:
        """Flat parameter vector ``[gammas..., betas...]``."""
        return np.concatenate([self.gammas, self.betas])

    def with_params(self, theta) -> "QaoaPolicy":
        theta = np.asarray(theta, dtype=float)
        p = self.depth_p
        return replace(self, gammas=theta[:p].copy(), betas=theta[p:].copy(),
                       prev_params=self.prev_params.copy())

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "depth_p": self.depth_p,
            "gammas": self.gammas.tolist(),
            "betas": self.betas.tolist(),
            "prev_params": self.prev_params.tolist(),
            "shots": self.shots,
            "input_angles_scale": self.input_angles_scale,
            "temporal_reg": self.temporal_reg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QaoaPolicy":
        return cls(n_qubits=d["n_qubits"], depth_p=d["depth_p"], gammas=d["gammas"],
                   betas=d["betas"], shots=d["shots"],
                   input_angles_scale=d.get("input_angles_scale", np.pi), temporal_reg=d["temporal_reg"],
                   prev_params=np.asarray(d["prev_params"], dtype=float))


@dataclass(frozen=True)
class LatentPlan:
    plan_id: int
    raw_bitstring: int


@dataclass(frozen=True)
class PriorPolicy:
    distribution: np.ndarray = field(default_factory=lambda: np.full(N_PLANS, 1.0 / N_PLANS))

    def __post_init__(self):
        d = np.asarray(self.distribution, dtype=float)
        if d.shape != (N_PLANS,) or np.any(d < 0) or abs(d.sum() - 1.0) > 1e-12:
            raise UsageError("prior must be a distribution over the plan classes")


# ---------------------------------------------------------------------------
# observation -> circuit inputs


def plan_unsafe(obs) -> np.ndarray:
    """1.0 for plans whose first grid step is predicted unsafe from ``obs``."""
    unsafe = np.asarray(obs.unsafe_moves, dtype=float)
    return unsafe[PLAN_ACTION]


def plan_utility(obs) -> np.ndarray:
    """Expected coverage gain of each plan in [0, 1], from the depth readings."""
    open_ = np.asarray(obs.depth, dtype=float) / obs.sensor_radius
    horiz = open_[:4]
    return np.array([
        0.0,                       # hover
        horiz[0], horiz[1], horiz[2], horiz[3],
        0.25 * open_[4],           # climb
        0.25 * open_[5],           # descend
        0.5 * horiz.max(),         # sweep
    ])


def safe_prior(obs) -> PriorPolicy:
    """Uniform over plans whose first step is safe; uniform over all if none is."""
    safe = 1.0 - plan_unsafe(obs)
    if safe.sum() == 0:
        safe = np.ones(N_PLANS)
    return PriorPolicy(safe / safe.sum())


def plan_costs(obs, prior: Optional[PriorPolicy] = None, safety_weight=W_SAFETY) -> np.ndarray:
    if prior is None:
        prior = safe_prior(obs)
    return (safety_weight * plan_unsafe(obs)
            + W_UTILITY * (1.0 - plan_utility(obs))
            + W_PRIOR * (1.0 - prior.distribution))


def encode_observation(obs, n_qubits: int = 6, scale: float = np.pi, safety_weight=W_SAFETY):
    """Return ``(angles, cost_table)`` for one observation.

    Angles are the first ``n_qubits`` features (already in [0, 1]) times
    ``scale``; the cost table repeats each plan's cost over the bitstrings
    that map to it.
    """
    feats = np.asarray(obs.features(), dtype=float)
    if not np.all(np.isfinite(feats)):
        raise InputError("observation contains non-finite features")
    angles = scale * np.clip(feats[:n_qubits], 0.0, 1.0)
    costs = plan_costs(obs, safety_weight=safety_weight)
    table = costs[plan_of(np.arange(1 << n_qubits), n_qubits)]
    return angles, table


# ---------------------------------------------------------------------------
# circuit construction


def ansatz_gates(policy: QaoaPolicy, angles, cost) -> list:
    """The full ansatz as a gate list (used for folding and oracle checks)."""
    n = policy.n_qubits
    gates = [sv.H(q) for q in range(n)]
    gates += [sv.RY(q, a) for q, a in enumerate(angles)]
    for g, b in zip(policy.gammas, policy.betas):
        gates.append(sv.PHASE(cost, g))
        gates += [sv.RX(q, 2.0 * b) for q in range(n)]
    return gates


def _rx_layer(amps, n, angles):
    """RX(angles[k, q]) on every qubit q of each batched state ``amps[k]``."""
    K = amps.shape[0]
    for q in range(n):
        c = np.cos(angles[:, q] / 2.0)[:, None, None]
        s = -1j * np.sin(angles[:, q] / 2.0)[:, None, None]
        view = amps.reshape(K, 1 << (n - 1 - q), 2, 1 << q)
        a0, a1 = view[:, :, 0], view[:, :, 1]
        out = np.empty_like(view)
        out[:, :, 0] = c * a0 + s * a1
        out[:, :, 1] = s * a0 + c * a1
        amps = out.reshape(K, -1)
    return amps


def _input_state(n, angles):
    """RY(angles) H^n |0...0>, built as a product state (qubit 0 least significant)."""
    amps = np.ones(1, dtype=complex)
    for q in range(n):
        a = angles[q] if q < len(angles) else 0.0
        v = sv.ry_matrix(a) @ np.array([1.0, 1.0]) / np.sqrt(2.0)
        amps = np.kron(v, amps)
    return amps


def _build_batch(n, gammas, betas, angles, cost, phase_extra=None, mixer_extra=None):
    """Amplitudes of a batch of ansatz variants, shape ``(K, 2^n)``.

    ``phase_extra[k, layer]`` is an additive phase per basis state in that
    layer's cost phase; ``mixer_extra[k, layer, q]`` is an additive RX angle.
    """
    p = len(gammas)
    K = 1 if phase_extra is None else phase_extra.shape[0]
    if phase_extra is None:
        phase_extra = np.zeros((K, p, 1 << n))
    if mixer_extra is None:
        mixer_extra = np.zeros((K, p, n))
    amps = np.tile(_input_state(n, angles), (K, 1))
    for layer in range(p):
        amps = amps * np.exp(-1j * (gammas[layer] * cost[None, :] + phase_extra[:, layer]))
        amps = _rx_layer(amps, n, 2.0 * betas[layer] + mixer_extra[:, layer])
    return amps


def build_state(policy: QaoaPolicy, angles, cost) -> sv.StateVector:
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (1 << policy.n_qubits,):
        raise UsageError(f"cost table must have length {1 << policy.n_qubits}")
    amps = _build_batch(policy.n_qubits, policy.gammas, policy.betas,
                        np.asarray(angles, dtype=float), cost)
    return sv.StateVector(policy.n_qubits, amps[0])


def plan_distribution(probs, n_qubits: int) -> np.ndarray:
    """Marginalize a bitstring distribution onto the plan classes."""
    return np.bincount(plan_of(np.arange(len(probs)), n_qubits),
                       weights=probs, minlength=N_PLANS)


def sample_latent(policy: QaoaPolicy, state: sv.StateVector, rng: np.random.Generator,
                  readout=None):
    """Sample ``policy.shots`` bitstrings, group them by plan, and pick one shot.

    ``readout`` optionally maps the raw count vector before aggregation (used
    for the readout-error path).  Returns ``(LatentPlan, plan_distribution)``.
    """
    counts = sv.sample(state, policy.shots, rng)
    if readout is not None:
        counts = readout(counts, rng)
    pick = int(rng.integers(policy.shots))
    bitstring = int(np.searchsorted(np.cumsum(counts), pick, side="right"))
    dist = plan_distribution(counts / counts.sum(), policy.n_qubits)
    plan = LatentPlan(int(plan_of(bitstring, policy.n_qubits)), bitstring)
    return plan, dist


# ---------------------------------------------------------------------------
# gradients


def shift_rule(f: Callable[[float], float], theta: float) -> float:
    """Two-term parameter-shift derivative of ``f`` at ``theta`` for a Pauli-rotation angle."""
    return 0.5 * (f(theta + SHIFT) - f(theta - SHIFT))


def prob_jacobian(policy: QaoaPolicy, angles, cost, shots: Optional[int] = None,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """d probs / d (gammas, betas), shape ``(2p, 2^n)``, by exact parameter shifts.

    The cost phase exp(-i gamma C) splits into commuting projector phases
    exp(-i gamma c_v P_v), one per distinct cost value; each projector term
    and each mixer RX gate is shifted individually, so the result is exact
    (up to shot noise when ``shots`` is given).
    """
    n, p = policy.n_qubits, policy.depth_p
    dim = 1 << n
    cost = np.asarray(cost, dtype=float)
    angles = np.asarray(angles, dtype=float)
    values = [v for v in np.unique(cost) if v != 0.0]

    # One batch row per (+shift, -shift) pair; rows alternate plus/minus.
    rows_phase, rows_mixer, weights, targets = [], [], [], []
    for layer in range(p):
        for v in values:
            mask = (cost == v).astype(float)
            for sign in (1.0, -1.0):
                ph = np.zeros((p, dim))
                ph[layer] = sign * SHIFT * mask
                rows_phase.append(ph)
                rows_mixer.append(np.zeros((p, n)))
            weights.append(v * 0.5)
            targets.append(layer)
        for q in range(n):
            for sign in (1.0, -1.0):
                mx = np.zeros((p, n))
                mx[layer, q] = sign * SHIFT
                rows_phase.append(np.zeros((p, dim)))
                rows_mixer.append(mx)
            # RX angle is 2*beta, so d/dbeta = 2 * d/dangle.
            weights.append(2.0 * 0.5)
            targets.append(p + layer)
    amps = _build_batch(n, policy.gammas, policy.betas, angles, cost,
                        np.array(rows_phase), np.array(rows_mixer))
    probs = np.abs(amps) ** 2
    if shots is not None:
        probs = np.array([rng.multinomial(shots, row / row.sum()) / shots for row in probs])
    diffs = probs[0::2] - probs[1::2]
    jac = np.zeros((2 * p, dim))
    np.add.at(jac, np.array(targets), np.array(weights)[:, None] * diffs)
    return jac


def parameter_shift_grad(policy: QaoaPolicy, angles, cost, objective,
                         shots: Optional[int] = None, rng=None) -> np.ndarray:
    """Gradient of ``sum_z probs[z] * objective[z]`` w.r.t. ``(gammas, betas)``.

    ``objective`` is a diagonal observable (one value per basis state).
    """
    objective = np.asarray(objective, dtype=float)
    return prob_jacobian(policy, angles, cost, shots=shots, rng=rng) @ objective


def update_params(policy: QaoaPolicy, grad, lr: float = 0.01) -> QaoaPolicy:
    """One gradient step with the temporal penalty ``temporal_reg * ||theta - prev||^2``."""
    grad = np.asarray(grad, dtype=float)
    theta = policy.params
    if grad.shape != theta.shape:
        raise UsageError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite QAOA gradient",
                            {"grad": grad.tolist(), "params": theta.tolist()})
    step = grad + 2.0 * policy.temporal_reg * (theta - policy.prev_params)
    new = policy.with_params(theta - lr * step)
    new.prev_params = theta.copy()
    return new


# ---------------------------------------------------------------------------
# divergence


def kl_to_prior(dist, prior) -> float:
    """KL(dist || prior) in nats; ``0 ln 0 = 0`` and the prior is floored at 1e-9."""
    p = np.asarray(dist, dtype=float)
    q = np.asarray(getattr(prior, "distribution", prior), dtype=float)
    if p.shape != q.shape:
        raise UsageError("distributions must have the same length")
    q = np.maximum(q, PRIOR_FLOOR)
    nz = p > 0
    return max(0.0, float(np.sum(p[nz] * np.log(p[nz] / q[nz]))))


def prior_mismatch(dist, prior) -> bool:
    """True when the policy puts mass where the prior has none."""
    q = np.asarray(getattr(prior, "distribution", prior), dtype=float)
    return bool(np.any((np.asarray(dist) > 0) & (q == 0)))


def kl_grad_probs(probs, prior, n_qubits: int) -> np.ndarray:
    """d KL(plan(probs) || prior) / d probs[z]."""
    q = np.maximum(np.asarray(getattr(prior, "distribution", prior), dtype=float), PRIOR_FLOOR)
    dist = np.maximum(plan_distribution(probs, n_qubits), 1e-12)
    per_plan = np.log(dist / q) + 1.0
    return per_plan[plan_of(np.arange(len(probs)), n_qubits)]


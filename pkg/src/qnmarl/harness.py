"""Centralized training / decentralized execution loop.

Each agent samples a latent plan from its QAOA circuit, feeds it as a bias
into its spiking Q-network, and proposes an action.  A shield replaces unsafe
proposals with hover (the attempt still counts as a violation).  After every
episode the SNNs take TD steps from their replay buffers and the QAOA
parameters take a parameter-shift step on the plan-level objective.
"""

import base64
import json
import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import gridworld as gw
from . import qaoa
from . import rng as rngs
from .errors import ConfigError, TrainingError, UsageError
from .mitigation import MitigationError, apply_readout_noise, confusion_matrix, mitigate_readout
from .plans import HOVER, N_ACTIONS
from .reporting import obs_bucket
from .statevector import measure_probs
from .snn import LifConfig, SpikingQNet, encode_rate, select_action, spike_entropy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 200
    batch: int = 32
    gamma: float = 0.95
    lambda_kl: float = 0.1
    beta_spike: float = 0.05
    delta: float = 0.02
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 150
    eval_every: int = 10
    eval_episodes: int = 5
    seed: int = 0
    lr_snn: float = 1e-3
    lr_quantum: float = 0.01
    target_sync: int = 10
    buffer_capacity: int = 10_000
    history: int = 4
    penalty_rho: float = 10.0
    td_updates: int = 8
    reward_scale: float = 0.1
    qaoa_samples: int = 8
    readout_error: float = 0.0

    def validate(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("train.gamma must be in (0, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("train.delta must be in (0, 1)")
        for name in ("batch", "eval_every", "target_sync", "buffer_capacity", "history",
                     "eps_decay_episodes", "qaoa_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1")
        for name in ("episodes", "eval_episodes", "td_updates"):
            if getattr(self, name) < 0:
                raise ConfigError(f"train.{name} must be >= 0")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError("need 0 <= train.eps_end <= train.eps_start <= 1")
        for name in ("lambda_kl", "beta_spike", "penalty_rho", "lr_snn", "lr_quantum",
                     "reward_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"train.{name} must be >= 0")
        if not 0.0 <= self.readout_error < 0.5:
            raise ConfigError("train.readout_error must be in [0, 0.5)")
        return self


def epsilon(cfg: TrainConfig, episode: int) -> float:
    """Linear decay from ``eps_start`` at episode 1 to ``eps_end`` at ``eps_decay_episodes``."""
    if episode >= cfg.eps_decay_episodes:
        return cfg.eps_end
    frac = (episode - 1) / max(cfg.eps_decay_episodes - 1, 1)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * max(frac, 0.0)


def constraint_penalty(violation_rate: float, delta: float, rho: float) -> float:
    """Hinge penalty ``rho * max(0, rate - delta)``."""
    return rho * max(0.0, violation_rate - delta)


# ---------------------------------------------------------------------------
# replay


@dataclass
class Transition:
    obs: np.ndarray         # history digest (last ``history`` observations, newest first)
    plan: int
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    violation: bool = False


class ReplayBuffer:
    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise UsageError("buffer capacity must be >= 1")
        self.capacity = capacity
        self.items: List[Transition] = []
        self.cursor = 0

    def __len__(self):
        return len(self.items)

    def add(self, t: Transition):
        if len(self.items) < self.capacity:
            self.items.append(t)
        else:
            self.items[self.cursor] = t
        self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> List[Transition]:
        n = min(batch, len(self.items))
        idx = rng.choice(len(self.items), size=n, replace=False)
        return [self.items[i] for i in idx]


class History:
    """Fixed window of the most recent observation feature vectors."""

    def __init__(self, length: int, dim: int):
        self.length, self.dim = length, dim
        self.frames = deque(maxlen=length)

    def push(self, features):
        self.frames.appendleft(np.asarray(features, dtype=float))

    def digest(self) -> np.ndarray:
        out = np.zeros(self.length * self.dim)
        for k, f in enumerate(self.frames):
            out[k * self.dim:(k + 1) * self.dim] = f
        return out


# ---------------------------------------------------------------------------
# agents


@dataclass
class Agent:
    index: int
    policy: qaoa.QaoaPolicy
    net: SpikingQNet
    buffer: ReplayBuffer
    prev_violation_rate: float = 0.0


# Initialization that keeps hidden rates near 5% and every output neuron
# reachable for the default observation encoding.
SNN_DEFAULTS = {"n_hidden": 128, "alpha": 1.0, "window": 20.0, "input_gain": 4.0,
                "output_gain": 3.0, "plan_link": 0.6}


def make_agents(n_agents: int, input_dim: int, cfg: TrainConfig, qaoa_kw=None,
                lif: LifConfig = LifConfig(), snn_kw=None) -> List[Agent]:
    agents = []
    snn_kw = {**SNN_DEFAULTS, **(snn_kw or {})}
    for i in range(n_agents):
        r = rngs.stream(cfg.seed, "init", i)
        policy = qaoa.QaoaPolicy(**(qaoa_kw or {}))
        net = SpikingQNet.init(input_dim, r, lif=lif, lr=cfg.lr_snn, **snn_kw)
        agents.append(Agent(i, policy, net, ReplayBuffer(cfg.buffer_capacity)))
    return agents


@dataclass
class DecisionTrace:
    plan: qaoa.LatentPlan
    plan_dist: np.ndarray
    prior: np.ndarray
    q_values: np.ndarray
    spike_counts: np.ndarray
    total_spikes: int
    action: int


def readout_channel(n_qubits: int, error: float):
    """Count-vector transform that adds readout errors and then mitigates them."""
    m = confusion_matrix(n_qubits, error)

    def channel(counts, rng):
        noisy = apply_readout_noise(counts, m, rng)
        shots = noisy.sum()
        try:
            p = mitigate_readout(m, noisy / shots)
        except MitigationError:
            return noisy
        # Back to integer counts with the same total (largest remainder).
        raw = p * shots
        base = np.floor(raw).astype(np.int64)
        short = int(shots - base.sum())
        if short > 0:
            base[np.argsort(-(raw - base), kind="stable")[:short]] += 1
        return base

    return channel


def hybrid_act(obs, digest, policy: qaoa.QaoaPolicy, net: SpikingQNet, eps: float,
               rng: np.random.Generator, mask=None, readout=None, safety_weight=qaoa.W_SAFETY):
    """``z ~ pi_quantum(z | o)`` then ``a ~ eps-greedy(Q(h, . ; z))``.

    Returns ``(plan, action, trace)``.
    """
    angles, cost = qaoa.encode_observation(obs, policy.n_qubits, policy.input_angles_scale,
                                           safety_weight=safety_weight)
    state = qaoa.build_state(policy, angles, cost)
    plan, dist = qaoa.sample_latent(policy, state, rng, readout=readout)
    trains = encode_rate(digest, net.window, rng, net.lif.dt)
    q, rec = net.forward_q(trains, plan)
    if mask is None:
        mask = np.ones(N_ACTIONS, dtype=bool)
    action = select_action(q, eps, mask, rng)
    prior = qaoa.safe_prior(obs).distribution
    trace = DecisionTrace(plan, dist, prior, q, rec.counts,
                          int(rec.counts.sum() + rec.hidden_counts.sum()), action)
    return plan, action, trace


def safety_filter(proposed: int, world: gw.WorldState, agent: int, occupied=None):
    """Replace an unsafe proposal by hover; returns ``(final_action, flag, verdict)``."""
    verdict = gw.check_safety(world, agent, proposed, occupied)
    if verdict.violated:
        return HOVER, True, verdict
    return proposed, False, verdict


def shield_joint(world: gw.WorldState, proposals):
    """Apply ``safety_filter`` to every alive agent in index order.

    Agent ``i`` is checked against the cells committed by agents ``< i`` and
    the current cells of agents ``> i``.
    """
    n = len(world.positions)
    final = np.array(proposals, dtype=int)
    flags = np.zeros(n, dtype=bool)
    verdicts = [gw.SafetyVerdict() for _ in range(n)]
    committed = []
    for i in range(n):
        if not world.alive[i]:
            continue
        occupied = set(committed)
        occupied |= {tuple(world.positions[j]) for j in range(i + 1, n) if world.alive[j]}
        final[i], flags[i], verdicts[i] = safety_filter(int(proposals[i]), world, i, occupied)
        committed.append(tuple(gw.destination(world, i, final[i])))
    return final, flags, verdicts


# ---------------------------------------------------------------------------
# episodes


@dataclass
class EpisodeRecord:
    episode: int
    reward: float = 0.0              # mean over agents of summed (unscaled) reward
    violations: int = 0
    agent_steps: int = 0
    kl: float = 0.0
    spike_entropy: float = 0.0
    coverage: float = 0.0
    mean_spikes: float = 0.0         # spikes per decision window
    hybrid_loss: float = 0.0
    penalty: float = 0.0
    sim_ms: float = 0.0              # simulated controller time
    prior_flagged: int = 0
    td_loss: float = 0.0
    paths: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    violation_steps: list = field(default_factory=list)
    decision_log: list = field(default_factory=list)   # (observation bucket, action)
    heatmap: Optional[np.ndarray] = None
    final_world: object = None

    @property
    def violation_rate(self) -> float:
        return self.violations / self.agent_steps if self.agent_steps else 0.0


def hybrid_loss(rec: EpisodeRecord, lambda_kl: float, beta_spike: float) -> float:
    """Mean reward minus the KL and spike-energy terms."""
    return rec.reward - lambda_kl * rec.kl - beta_spike * rec.mean_spikes


def run_episode(agents: List[Agent], world: gw.WorldState, cfg: TrainConfig, episode: int,
                eps: float, world_rng: np.random.Generator, learn: bool = True,
                stream_purpose: str = rngs.AGENT, stream_key: int = None):
    """Roll out one episode.  Returns ``(EpisodeRecord, transitions_per_agent, observations_per_agent)``."""
    n = len(agents)
    if n != len(world.positions):
        raise UsageError("one agent per world position required")
    dim = gw.Observation.feature_dim(world.config.sensor_radius)
    histories = [History(cfg.history, dim) for _ in agents]
    key = episode if stream_key is None else stream_key
    agent_rngs = [rngs.stream(cfg.seed, stream_purpose, a.index, key) for a in agents]
    readout = (readout_channel(agents[0].policy.n_qubits, cfg.readout_error)
               if cfg.readout_error > 0 else None)
    penalty = [constraint_penalty(a.prev_violation_rate, cfg.delta, cfg.penalty_rho)
               for a in agents]

    rec = EpisodeRecord(episode)
    rec.paths = [[world.positions[i].tolist()] for i in range(n)]
    rec.plans = [[] for _ in range(n)]
    rec.violation_steps = [[] for _ in range(n)]
    transitions = [[] for _ in range(n)]
    observations = [[] for _ in range(n)]
    totals = np.zeros(n)
    kl_sum = np.zeros(n)
    decisions = np.zeros(n)
    out_counts = np.zeros((n, N_ACTIONS))
    spikes = 0
    viol_per_agent = np.zeros(n)

    obs = [gw.observe(world, i) for i in range(n)]
    for i in range(n):
        histories[i].push(obs[i].features())

    for t in range(world.config.max_steps):
        alive = np.flatnonzero(world.alive)
        if alive.size == 0:
            break
        proposals = np.full(n, HOVER)
        plans = np.full(n, -1)
        digests = {}
        for i in alive:
            digests[i] = histories[i].digest()
            mask = gw.admissible_mask(world, i)
            plan, action, trace = hybrid_act(obs[i], digests[i], agents[i].policy, agents[i].net,
                                             eps, agent_rngs[i], mask, readout)
            proposals[i] = action
            plans[i] = plan.plan_id
            kl_sum[i] += qaoa.kl_to_prior(trace.plan_dist, trace.prior)
            rec.prior_flagged += qaoa.prior_mismatch(trace.plan_dist, trace.prior)
            decisions[i] += 1
            out_counts[i] += trace.spike_counts
            spikes += trace.total_spikes
            rec.plans[i].append(int(plan.plan_id))
            observations[i].append(obs[i])
            rec.decision_log.append((obs_bucket(obs[i].features()), int(action)))

        final, flags, filter_verdicts = shield_joint(world, proposals)
        new_world, rewards, verdicts, done = gw.step_world(world, proposals, world_rng)
        for i in alive:
            if flags[i] != verdicts[i].violated:
                raise TrainingError("shield and environment disagree", {
                    "episode": episode, "t": t, "agent": int(i),
                    "filter": asdict(filter_verdicts[i]), "env": asdict(verdicts[i])})
            if flags[i] and not np.array_equal(new_world.positions[i], world.positions[i]):
                raise TrainingError("unsafe move was executed", {"agent": int(i), "t": t})

        next_obs = [gw.observe(new_world, i) for i in range(n)]
        for i in alive:
            histories[i].push(next_obs[i].features())
            landed = not new_world.alive[i]
            r = rewards[i]
            if flags[i]:
                viol_per_agent[i] += 1
                rec.violation_steps[i].append(t)
                # Active hinge: each violation carries rho / T, the slope of
                # rho * max(0, rate - delta) with respect to one more violation.
                if penalty[i] > 0:
                    r -= cfg.penalty_rho / max(world.config.max_steps, 1)
            if learn:
                transitions[i].append(Transition(
                    digests[i], int(plans[i]), int(proposals[i]), cfg.reward_scale * r,
                    histories[i].digest(), landed, bool(flags[i])))
            totals[i] += rewards[i]
            rec.paths[i].append(new_world.positions[i].tolist())
        rec.violations += int(flags[alive].sum())
        rec.agent_steps += int(alive.size)
        world, obs = new_world, next_obs
        if done:
            break

    steps_per_agent = np.maximum(decisions, 1)
    for i, a in enumerate(agents):
        a.prev_violation_rate = viol_per_agent[i] / steps_per_agent[i]
    rec.reward = float(totals.mean()) if n else 0.0
    rec.kl = float(np.mean(kl_sum / steps_per_agent)) if n else 0.0
    rec.spike_entropy = float(np.mean([spike_entropy(c) for c in out_counts])) if n else 0.0
    rec.mean_spikes = spikes / max(decisions.sum(), 1)
    rec.coverage, rec.heatmap = gw.coverage_stats(world)
    rec.sim_ms = float(decisions.sum() * agents[0].net.window) if n else 0.0
    rec.final_world = world
    rec.penalty = constraint_penalty(rec.violation_rate, cfg.delta, cfg.penalty_rho)
    rec.hybrid_loss = hybrid_loss(rec, cfg.lambda_kl, cfg.beta_spike)
    return rec, transitions, observations


# ---------------------------------------------------------------------------
# quantum update


def qaoa_objective_grad(policy: qaoa.QaoaPolicy, obs, lambda_kl: float, delta: float,
                        rho: float, safety_weight=qaoa.W_SAFETY):
    """Gradient of the per-observation plan loss.

    The loss is ``E[cost] + lambda_kl * KL(plan || prior) + rho * max(0, E[unsafe] - delta)``
    with exact expectations over the circuit's output distribution.
    Returns ``(grad, loss)``.
    """
    angles, cost = qaoa.encode_observation(obs, policy.n_qubits, policy.input_angles_scale,
                                           safety_weight=safety_weight)
    probs = measure_probs(qaoa.build_state(policy, angles, cost))
    prior = qaoa.safe_prior(obs).distribution
    unsafe = qaoa.plan_unsafe(obs).astype(float)[qaoa.plan_of(np.arange(len(probs)),
                                                              policy.n_qubits)]
    dist = qaoa.plan_distribution(probs, policy.n_qubits)
    excess = float(probs @ unsafe) - delta
    loss = float(probs @ cost) + lambda_kl * qaoa.kl_to_prior(dist, prior) + rho * max(0.0, excess)
    d_probs = cost.copy()
    if lambda_kl:
        d_probs += lambda_kl * qaoa.kl_grad_probs(probs, prior, policy.n_qubits)
    if excess > 0:
        d_probs += rho * unsafe
    grad = qaoa.parameter_shift_grad(policy, angles, cost, d_probs)
    return grad, loss


def quantum_update(agent: Agent, observations, cfg: TrainConfig, rng: np.random.Generator):
    """One averaged parameter-shift step over a sample of the episode's observations."""
    if not observations:
        return 0.0
    k = min(cfg.qaoa_samples, len(observations))
    idx = np.sort(rng.choice(len(observations), size=k, replace=False))
    grad = np.zeros_like(agent.policy.params)
    loss = 0.0
    for j in idx:
        g, l = qaoa_objective_grad(agent.policy, observations[j], cfg.lambda_kl, cfg.delta,
                                   cfg.penalty_rho)
        grad += g / k
        loss += l / k
    agent.policy = qaoa.update_params(agent.policy, grad, cfg.lr_quantum)
    return loss


# ---------------------------------------------------------------------------
# training


@dataclass
class EvalSnapshot:
    episode: int
    reward: float
    violation_rate: float
    coverage: float
    kl: float


@dataclass
class RunRecord:
    train: TrainConfig
    world: gw.WorldConfig
    episodes: List[EpisodeRecord] = field(default_factory=list)
    evals: List[EvalSnapshot] = field(default_factory=list)
    layout: Optional[gw.WorldState] = None
    agents: List[Agent] = field(default_factory=list)
    timing_ms: List[float] = field(default_factory=list)
    qaoa_kw: dict = field(default_factory=dict)
    snn_kw: dict = field(default_factory=dict)
    lif: LifConfig = field(default_factory=LifConfig)


def train(cfg: TrainConfig, world_cfg: gw.WorldConfig = gw.WorldConfig(), qaoa_kw=None,
          lif: LifConfig = LifConfig(), snn_kw=None, stop_after: Optional[int] = None,
          on_episode=None, on_eval=None, checkpoint_path=None, run_out=None) -> RunRecord:
    """Run the full training loop; ``stop_after`` truncates it (used by replay).

    ``on_episode(record)`` and ``on_eval(snapshot)`` are optional callbacks.
    A non-finite loss writes ``checkpoint_path`` (when given) before re-raising;
    ``run_out["run"]`` then still gives access to the partial record.
    """
    cfg.validate()
    world_cfg.validate()
    layout = gw.init_world(world_cfg, rngs.stream(cfg.seed, rngs.WORLD, 0), seed=cfg.seed)
    held_out = [gw.init_world(world_cfg, rngs.stream(cfg.seed, rngs.EVAL, k), seed=cfg.seed)
                for k in range(cfg.eval_episodes)]
    dim = cfg.history * gw.Observation.feature_dim(world_cfg.sensor_radius)
    agents = make_agents(world_cfg.n_agents, dim, cfg, qaoa_kw, lif, snn_kw)
    run = RunRecord(cfg, world_cfg, layout=layout, agents=agents, qaoa_kw=dict(qaoa_kw or {}),
                    snn_kw={**SNN_DEFAULTS, **(snn_kw or {})}, lif=lif)
    if run_out is not None:
        run_out["run"] = run
    last = cfg.episodes if stop_after is None else min(stop_after, cfg.episodes)

    for e in range(1, last + 1):
        t0 = time.perf_counter()
        world = gw.respawn(layout, rngs.stream(cfg.seed, rngs.WORLD, e))
        rec, transitions, observations = run_episode(
            agents, world, cfg, e, epsilon(cfg, e), rngs.stream(cfg.seed, rngs.WORLD, e, 1))
        try:
            rec.td_loss = _learn(agents, transitions, observations, cfg, e)
        except TrainingError as exc:
            exc.diagnostic.setdefault("episode", e)
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, run, e)
            raise
        if e % cfg.target_sync == 0:
            for a in agents:
                a.net.sync_target()
        run.episodes.append(rec)
        run.timing_ms.append((time.perf_counter() - t0) * 1e3)
        if on_episode is not None:
            on_episode(rec)
        if cfg.eval_episodes and e % cfg.eval_every == 0:
            snap = evaluate(agents, held_out, cfg, e)
            run.evals.append(snap)
            if on_eval is not None:
                on_eval(snap)
    return run


def _learn(agents, transitions, observations, cfg: TrainConfig, episode: int) -> float:
    losses = []
    for a in agents:
        for t in transitions[a.index]:
            a.buffer.add(t)
        r = rngs.stream(cfg.seed, rngs.TRAIN, a.index, episode)
        if len(a.buffer):
            for _ in range(cfg.td_updates):
                _, loss = a.net.td_update(a.buffer.sample(cfg.batch, r), cfg.gamma, r)
                losses.append(loss)
        quantum_update(a, observations[a.index], cfg, r)
    return float(np.mean(losses)) if losses else 0.0


def evaluate(agents, layouts, cfg: TrainConfig, episode: int) -> EvalSnapshot:
    """Greedy rollouts on held-out layouts without learning."""
    saved = [a.prev_violation_rate for a in agents]
    recs = []
    for k, layout in enumerate(layouts):
        world = gw.respawn(layout, rngs.stream(cfg.seed, rngs.EVAL, k, episode))
        rec, _, _ = run_episode(agents, world, cfg, episode, 0.0,
                                rngs.stream(cfg.seed, rngs.EVAL, k, episode, 1), learn=False,
                                stream_purpose=rngs.EVAL, stream_key=episode * 1000 + k)
        recs.append(rec)
    for a, v in zip(agents, saved):
        a.prev_violation_rate = v
    steps = sum(r.agent_steps for r in recs)
    return EvalSnapshot(
        episode=episode,
        reward=float(np.mean([r.reward for r in recs])),
        violation_rate=sum(r.violations for r in recs) / steps if steps else 0.0,
        coverage=float(np.mean([r.coverage for r in recs])),
        kl=float(np.mean([r.kl for r in recs])),
    )


# ---------------------------------------------------------------------------
# checkpoint


def _encode_matrix(m: np.ndarray) -> dict:
    m = np.ascontiguousarray(m, dtype="<f8")
    return {"shape": list(m.shape), "data": base64.b64encode(m.tobytes()).decode("ascii")}


def _decode_matrix(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


def checkpoint_dict(run: RunRecord, episode: int) -> dict:
    return {
        "format": 1,
        "config": {"train": asdict(run.train), "world": asdict(run.world),
                   "qaoa": run.qaoa_kw, "snn": run.snn_kw, "lif": asdict(run.lif)},
        "episode": int(episode),
        "agents": [
            {
                "index": a.index,
                "qaoa": a.policy.to_dict(),
                "snn": {k: _encode_matrix(v) for k, v in a.net.state_dict().items()},
                "prev_violation_rate": a.prev_violation_rate,
            }
            for a in run.agents
        ],
        "rng": {
            "world": rngs.generator_state(rngs.stream(run.train.seed, rngs.WORLD, episode + 1)),
            "agents": [rngs.generator_state(rngs.agent_stream(run.train.seed, a.index, episode + 1))
                       for a in run.agents],
        },
    }


def save_checkpoint(path, run: RunRecord, episode: int):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(run, episode), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    """Parse a checkpoint; SNN weights come back as arrays and configs as dataclasses."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        doc["train_config"] = TrainConfig(**doc["config"]["train"])
        world = dict(doc["config"]["world"])
        world["dims"] = tuple(world["dims"])
        doc["world_config"] = gw.WorldConfig(**world)
        doc["lif_config"] = LifConfig(**doc["config"].get("lif", {}))
        for a in doc["agents"]:
            a["snn"] = {k: _decode_matrix(v) for k, v in a["snn"].items()}
            a["qaoa"] = qaoa.QaoaPolicy.from_dict(a["qaoa"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed checkpoint {path}: {exc}") from exc
    return doc

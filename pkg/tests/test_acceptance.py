"""End-to-end acceptance checks, one group per criterion.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
a PASS/FAIL line per criterion (see ``conftest.py``).  The 200-episode
default run is marked ``slow``.
"""

import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qnmarl import cli
from qnmarl import gridworld as gw
from qnmarl import harness as h
from qnmarl import mitigation as mit
from qnmarl import qaoa
from qnmarl import reporting as rp
from qnmarl import snn
from qnmarl import statevector as sv

from oracles import central_diff, lif_euler, qaoa_state

SVG = "{http://www.w3.org/2000/svg}"


# ---------------------------------------------------------------------------
# 1. circuit builder against dense matrices


@pytest.mark.criterion(1)
def test_state_matches_dense_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(100):
        n = 1 + k % 3
        p = int(rng.integers(0, 4))
        gammas, betas = rng.uniform(-np.pi, np.pi, p), rng.uniform(-np.pi, np.pi, p)
        angles, cost = rng.uniform(0, np.pi, n), rng.normal(size=1 << n)
        if n == 3:
            pol = qaoa.QaoaPolicy(n_qubits=3, depth_p=p, gammas=gammas, betas=betas)
            got = qaoa.build_state(pol, angles, cost).amplitudes
        else:
            got = qaoa._build_batch(n, gammas, betas, angles, cost)[0]
        want = qaoa_state(n, gammas, betas, angles, cost)
        worst = max(worst, np.max(np.abs(np.abs(got) - np.abs(want))))
    assert worst < 1e-10
    assert time.perf_counter() - t0 < 10.0


# ---------------------------------------------------------------------------
# 2. parameter shift against finite differences


@pytest.mark.criterion(2)
def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(2)
    world = gw.init_world(gw.WorldConfig(dims=(12, 12, 6), n_agents=10), rng)
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(3, 7))
        p = int(rng.integers(1, 4))
        pol = qaoa.QaoaPolicy(n_qubits=n, depth_p=p, gammas=rng.uniform(-1, 1, p),
                              betas=rng.uniform(-1, 1, p))
        if k % 2:
            # Cost tables produced from real observations.
            angles, cost = qaoa.encode_observation(gw.observe(world, k % 10), n)
        else:
            angles, cost = rng.uniform(0, np.pi, n), rng.normal(size=1 << n)
        obj = rng.normal(size=1 << n)

        def f(theta):
            return float(sv.measure_probs(qaoa.build_state(pol.with_params(theta), angles,
                                                           cost)) @ obj)

        g = qaoa.parameter_shift_grad(pol, angles, cost, obj)
        fd = central_diff(f, pol.params, h=1e-5)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst < 1e-4


# ---------------------------------------------------------------------------
# 3. mitigation


@pytest.mark.criterion(3)
def test_zne_recovers_quadratic_constant():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b, c = rng.uniform(-5, 5, 3)
        vals = [a * s * s + b * s + c for s in (1, 2, 3)]
        assert abs(mit.zne_extrapolate(vals) - c) < 1e-9


@pytest.mark.criterion(3)
def test_readout_inversion():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        flips = rng.uniform(0, 0.1, (2, n))
        m = np.ones((1, 1))
        for q in range(n):
            e0, e1 = flips[:, q]
            m = np.kron(np.array([[1 - e0, e1], [e0, 1 - e1]]), m)
        assert np.linalg.cond(m) < 10
        p = rng.dirichlet(np.ones(1 << n))
        got = mit.mitigate_readout(m, m @ p)
        assert np.max(np.abs(got - p)) < 1e-10


# ---------------------------------------------------------------------------
# 4. LIF dynamics


@pytest.mark.criterion(4)
def test_euler_tracks_exponential():
    cfg = snn.LifConfig(tau_m=10.0, dt=1.0, u_th=1e9)
    for u0, current in [(0.0, 1.5), (1.0, 0.0), (0.3, -0.7)]:
        state = snn.LifState(np.array([u0]), np.zeros(1))
        traj = []
        for _ in range(100):
            state, _ = snn.lif_step(state, cfg, [current])
            traj.append(state.u[0])
        exact = current + (u0 - current) * np.exp(-np.arange(1, 101) / 10.0)
        assert np.max(np.abs(np.array(traj) - exact)) < 0.05
        np.testing.assert_allclose(traj, lif_euler(u0, current, 100), atol=1e-12)


class RefractoryAudit:
    """Wraps the layer simulator and inspects every spike raster it returns."""

    def __init__(self, inner):
        self.inner = inner
        self.spikes = 0
        self.breaches = 0

    def __call__(self, currents, cfg, alpha, smooth=False, keep_trace=True):
        out = self.inner(currents, cfg, alpha, smooth, keep_trace)
        if not smooth:
            s = np.asarray(out[0]) > 0
            hold = int(round(cfg.refractory / cfg.dt))
            self.spikes += int(s.sum())
            for lag in range(1, hold + 1):
                self.breaches += int((s[:, :-lag] & s[:, lag:]).sum())
        return out


# ---------------------------------------------------------------------------
# shared training runs

CI_WORLD = gw.WorldConfig(dims=(20, 20, 5), n_agents=4)
CI_TRAIN = h.TrainConfig(episodes=60, eps_decay_episodes=45)


@pytest.fixture(scope="module")
def ci_run():
    audit = RefractoryAudit(snn._run_layer)
    mp = pytest.MonkeyPatch()
    mp.setattr(snn, "_run_layer", audit)
    t0 = time.perf_counter()
    try:
        run = h.train(CI_TRAIN, CI_WORLD)
    finally:
        mp.undo()
    return run, audit, time.perf_counter() - t0


@pytest.fixture(scope="module")
def default_run():
    t0 = time.perf_counter()
    run = h.train(h.TrainConfig(), gw.WorldConfig())
    return run, time.perf_counter() - t0


@pytest.mark.criterion(4)
def test_no_spikes_inside_refractory_window(ci_run):
    _, audit, _ = ci_run
    assert audit.spikes > 10_000
    assert audit.breaches == 0


# ---------------------------------------------------------------------------
# 5. toy two-state task


def solve_toy(seed, max_updates=2000):
    """Return the update count at which the greedy policy first becomes optimal, else None."""
    rng = np.random.default_rng(seed)
    probe = np.random.default_rng(seed + 10_000)
    net = snn.SpikingQNet.init(2, rng, n_hidden=128, n_actions=2, input_gain=4.0)
    buf = h.ReplayBuffer(2000)
    eye = np.eye(2)
    s = int(rng.integers(2))
    for u in range(1, max_updates + 1):
        a = int(rng.integers(2))
        nxt = int(rng.integers(2))
        buf.add(h.Transition(eye[s], -1, a, 0.1 if a == s else 0.0, eye[nxt], False))
        s = nxt
        net.td_update(buf.sample(32, rng), 0.5, rng)
        if u % 50 == 0:
            net.sync_target()
        if u % 100 == 0:
            q = [np.mean([net.forward_q(snn.encode_rate(eye[k], net.window, probe))[0]
                          for _ in range(50)], axis=0) for k in range(2)]
            if np.argmax(q[0]) == 0 and np.argmax(q[1]) == 1:
                return u
    return None


@pytest.mark.criterion(5)
def test_toy_mdp_solved():
    t0 = time.perf_counter()
    solved = [solve_toy(seed) for seed in range(10)]
    assert sum(u is not None for u in solved) >= 8, solved
    assert time.perf_counter() - t0 < 120.0


# ---------------------------------------------------------------------------
# 6. trend reproduction


def violation_windows(run, head, tail):
    v = np.array([r.violation_rate for r in run.episodes])
    return v[:head].mean(), v[-tail:].mean()


def smoothed_kl(run):
    kl = np.array([r.kl for r in run.episodes])
    return np.convolve(kl, np.ones(10) / 10, mode="valid")


@pytest.mark.criterion(6)
def test_ci_config_halves_violations(ci_run):
    run, _, elapsed = ci_run
    early, late = violation_windows(run, 15, 15)
    assert late <= 0.5 * early, (early, late)
    assert elapsed < 300.0


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_default_violation_trend(default_run):
    run, elapsed = default_run
    early, late = violation_windows(run, 50, 50)
    assert late <= 0.5 * early, (early, late)
    assert late <= 0.02, late
    assert elapsed < 1800.0


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_default_kl_decreases(default_run):
    sm = smoothed_kl(default_run[0])
    # Window ending at episode 20 versus the one ending at episode 200.
    assert sm[-1] <= sm[10], (sm[10], sm[-1])


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_default_entropy_floor(default_run):
    assert min(r.spike_entropy for r in default_run[0].episodes) >= 0.1


# ---------------------------------------------------------------------------
# 7 and 8 through the command line

SMALL = """
[train]
episodes = 12
eval_every = 4
eval_episodes = 2
[world]
dims = [8, 8, 3]
n_agents = 3
n_targets = 3
n_nofly_zones = 1
nofly_size = 2
"""


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    d = tmp_path_factory.mktemp("accept")
    (d / "c.toml").write_text(SMALL)
    outs = []
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(d / "c.toml"),
                         f"--output.dir={d / name}"]) == 0
        outs.append(d / name)
    return outs


@pytest.mark.criterion(7)
def test_identical_seed_identical_bytes(two_runs):
    a, b = two_runs
    for name in ("metrics.csv", "trajectories.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.criterion(7)
def test_library_runs_repeat_exactly():
    cfg = h.TrainConfig(episodes=3, eval_every=3, eval_episodes=1)
    world = gw.WorldConfig(dims=(6, 6, 3), n_agents=2, n_nofly_zones=1, nofly_size=1)
    a, b = h.train(cfg, world), h.train(cfg, world)
    for x, y in zip(a.agents, b.agents):
        assert np.array_equal(x.net.w1, y.net.w1) and np.array_equal(x.net.w2, y.net.w2)
        assert np.array_equal(x.policy.params, y.policy.params)


@pytest.mark.criterion(8)
def test_exports_round_trip(two_runs, tmp_path):
    out = two_runs[0]
    rows = rp.read_metrics(out / "metrics.csv")
    assert [r.episode for r in rows] == list(range(1, 13))
    rp.write_metrics(tmp_path / "m.csv", rows)
    assert (tmp_path / "m.csv").read_bytes() == (out / "metrics.csv").read_bytes()
    traj = rp.read_trajectories(out / "trajectories.jsonl")
    assert len(traj) == 12 * 3
    assert all(len(t["plans"]) == len(t["path"]) - 1 for t in traj)
    doc = h.load_checkpoint(out / "checkpoint.json")
    assert doc["episode"] == 12
    layout = gw.load_layout(out / "world.json")
    assert layout.dims == (8, 8, 3)


@pytest.mark.criterion(8)
def test_plots_well_formed_with_point_counts(two_runs):
    out = two_runs[0]
    n_rows = len(rp.read_metrics(out / "metrics.csv"))
    for name in rp.PLOT_FILES:
        root = ET.parse(out / name).getroot()
        assert root.tag == f"{SVG}svg"
        if name in ("kl.svg", "violations.svg", "entropy.svg"):
            line = root.find(f".//{SVG}polyline[@class='series']")
            assert len(line.get("points").split()) == n_rows
    agents = [p for p in ET.parse(out / "trajectories.svg").getroot().iter(f"{SVG}polyline")
              if p.get("class") == "agent"]
    assert len(agents) == 3
    last = [t for t in rp.read_trajectories(out / "trajectories.jsonl") if t["episode"] == 12]
    for line, t in zip(agents, sorted(last, key=lambda t: t["agent"])):
        assert len(line.get("points").split()) == len(t["path"])
    cells = [c for c in ET.parse(out / "heatmap.svg").getroot().iter(f"{SVG}rect")
             if c.get("class") == "cell"]
    assert len(cells) == 64

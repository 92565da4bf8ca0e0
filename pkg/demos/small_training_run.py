"""Train a handful of agents on a small world and export everything a full run would."""

from pathlib import Path

import numpy as np

from qnmarl import gridworld as gw
from qnmarl import harness as h
from qnmarl import reporting as rp

out = Path("runs/demo")
cfg = h.TrainConfig(episodes=20, eps_decay_episodes=15, eval_every=5, eval_episodes=2)
world = gw.WorldConfig(dims=(12, 12, 4), n_agents=3, n_targets=4, n_nofly_zones=2)

run = h.train(cfg, world, on_eval=lambda s: print(
    f"eval @{s.episode}: reward {s.reward:.3f}  violation rate {s.violation_rate:.4f}"))

v = [r.violation_rate for r in run.episodes]
print(f"violation rate: first 5 episodes {np.mean(v[:5]):.4f}, last 5 {np.mean(v[-5:]):.4f}")
print(f"KL to prior: first {run.episodes[0].kl:.4f}, last {run.episodes[-1].kl:.4f}")

# %% Exports: metrics, trajectories, and the plots.
rows = rp.export_metrics(out, run.episodes)
heat = sum(r.heatmap for r in run.episodes)
rp.emit_plots(out, rows, run.episodes[-1].paths, heat, world.dims)
h.save_checkpoint(out / "checkpoint.json", run, len(run.episodes))
mi = rp.mutual_information(run.episodes[-1].decision_log)
print(f"I(observation bucket; action) in the last episode: {mi:.3f} bits")
print("wrote", sorted(p.name for p in out.iterdir()))

"""Command line entry point: ``run``, ``replay`` and ``plot``.

Exit status is 0 on success, 1 for configuration problems and 2 for
failures during a run.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import gridworld as gw
from . import harness
from . import reporting
from .config import RunConfig, load_config, parse_flags, with_output_dir
from .errors import ConfigError, QnmarlError, TrainingError

OUTPUT_ENV = "QNMARL_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("qnmarl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnmarl", description="Hybrid quantum/spiking multi-agent training.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="train and export metrics, trajectories and plots")
    run.add_argument("--config", help="TOML file with dotted section keys")

    rep = sub.add_parser("replay", help="re-simulate a run up to one episode")
    rep.add_argument("--checkpoint", required=True)
    rep.add_argument("--episode", required=True, type=int)

    plot = sub.add_parser("plot", help="redraw plots from exported files")
    plot.add_argument("--from", dest="source", required=True, help="path to metrics.csv")
    plot.add_argument("--out", help="directory for the SVG files (default: alongside)")
    return p


def visit_counts(trajectories, dims):
    """Column (x, y) visit counts over every step taken (spawn cells excluded)."""
    counts = np.zeros((dims[0], dims[1]), dtype=np.int64)
    for t in trajectories:
        for x, y, _ in t["path"][1:]:
            counts[x, y] += 1
    return counts


def last_paths(trajectories):
    if not trajectories:
        return []
    last = max(t["episode"] for t in trajectories)
    return [t["path"] for t in sorted(trajectories, key=lambda t: t["agent"])
            if t["episode"] == last]


def _summary(snap) -> str:
    return (f"eval episode {snap.episode}: reward {snap.reward:.4f}  "
            f"violation rate {snap.violation_rate:.4f}  coverage {snap.coverage:.4f}  "
            f"KL {snap.kl:.4f}")


def _write_outputs(cfg: RunConfig, run, records, out: Path):
    rows = reporting.export_metrics(out, records)
    with open(out / "timing.csv", "w", encoding="utf-8") as fh:
        fh.write("episode,elapsed_ms\n")
        for rec, ms in zip(records, run.timing_ms):
            fh.write(f"{rec.episode},{ms:.3f}\n")
    if cfg.output.plots and rows:
        trajectories = [line for rec in records for line in reporting.trajectory_lines(rec)]
        reporting.emit_plots(out, rows, last_paths(trajectories),
                             visit_counts(trajectories, cfg.world.dims), cfg.world.dims)
    return rows


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.flat(), indent=1, sort_keys=True) + "\n")
    records = []
    state = {}

    def on_episode(rec):
        records.append(rec)

    def on_eval(snap):
        print(_summary(snap), flush=True)

    status = EXIT_OK
    try:
        run = harness.train(cfg.train, cfg.world, qaoa_kw=cfg.qaoa, lif=cfg.lif,
                            snn_kw=cfg.snn, on_episode=on_episode, on_eval=on_eval,
                            checkpoint_path=out / "checkpoint.json", run_out=state)
    except TrainingError as exc:
        log.error("training aborted: %s; diagnostic: %s", exc, json.dumps(
            exc.diagnostic, default=str)[:2000])
        run = state.get("run")
        status = EXIT_RUNTIME
    if run is None:
        return EXIT_RUNTIME
    # Whatever finished is exported, even after an abort.
    gw.save_layout(run.layout, out / "world.json")
    if status == EXIT_OK:
        harness.save_checkpoint(out / "checkpoint.json", run, len(records))
    _write_outputs(cfg, run, records, out)
    if records:
        mi = reporting.mutual_information(records[-1].decision_log) \
            if records[-1].decision_log else 0.0
        last = records[-1]
        print(f"done: {len(records)} episodes, final violations {last.violations}, "
              f"KL {last.kl:.4f}, spike entropy {last.spike_entropy:.4f}, "
              f"I(O;A) {mi:.4f} bits -> {out}", flush=True)
    return status


def cmd_replay(checkpoint: str, episode: int, out_dir=None) -> int:
    doc = harness.load_checkpoint(checkpoint)
    train_cfg, world_cfg = doc["train_config"], doc["world_config"]
    if not 1 <= episode <= train_cfg.episodes:
        raise ConfigError(f"--episode must be in 1..{train_cfg.episodes}")
    records = {}
    run = harness.train(train_cfg, world_cfg, qaoa_kw=doc["config"].get("qaoa"),
                        snn_kw=doc["config"].get("snn"), lif=doc["lif_config"],
                        stop_after=episode, on_episode=lambda r: records.__setitem__(r.episode, r))
    rec = records[episode]
    out = Path(out_dir or Path(checkpoint).parent)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"replay_episode_{episode}.jsonl"
    reporting.write_trajectories(path, [rec])
    if episode == doc["episode"]:
        same = all(
            np.array_equal(a.net.w1, d["snn"]["w1"]) and np.array_equal(a.net.w2, d["snn"]["w2"])
            for a, d in zip(run.agents, doc["agents"]))
        print(f"weights match checkpoint: {same}")
        if not same:
            return EXIT_RUNTIME
    print(f"episode {episode}: reward {rec.reward!r} violations {rec.violations} "
          f"KL {rec.kl!r} -> {path}")
    return EXIT_OK


def cmd_plot(source: str, out_dir=None) -> int:
    src = Path(source)
    rows = reporting.read_metrics(src)
    out = Path(out_dir) if out_dir else src.parent
    traj_path = src.parent / "trajectories.jsonl"
    paths = heat = dims = None
    if traj_path.exists():
        trajectories = reporting.read_trajectories(traj_path)
        world_path = src.parent / "world.json"
        if world_path.exists():
            dims = tuple(json.loads(world_path.read_text())["dims"])
        else:
            dims = tuple(int(max(p[k] for t in trajectories for p in t["path"])) + 1
                         for k in range(3))
        paths, heat = last_paths(trajectories), visit_counts(trajectories, dims)
    written = reporting.emit_plots(out, rows, paths, heat, dims)
    print(f"wrote {len(written)} plots to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        known, rest = _parser().parse_known_args(argv)
        logging.basicConfig(level=logging.DEBUG if known.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if known.command == "run":
            overrides = parse_flags(rest)
            env_dir = os.environ.get(OUTPUT_ENV)
            cfg = load_config(known.config, overrides)
            if env_dir and "output.dir" not in overrides:
                cfg = with_output_dir(cfg, env_dir)
            return cmd_run(cfg)
        if rest:
            raise ConfigError(f"unrecognized arguments: {' '.join(rest)}")
        if known.command == "replay":
            return cmd_replay(known.checkpoint, known.episode, os.environ.get(OUTPUT_ENV))
        return cmd_plot(known.source, known.out or os.environ.get(OUTPUT_ENV))
    except ConfigError as exc:
        print(f"qnmarl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QnmarlError, OSError, ValueError, KeyError) as exc:
        print(f"qnmarl: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

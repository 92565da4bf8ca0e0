"""Metric export, the observation/action information diagnostic, and SVG plots."""

import csv
import hashlib
import json
import logging
import math
from dataclasses import astuple, dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .plans import N_ACTIONS

log = logging.getLogger(__name__)

METRICS_HEADER = ("episode", "reward", "violations", "kl_nats", "spike_entropy_nats",
                  "coverage", "hybrid_loss", "wall_ms")
N_BUCKETS = 16


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    reward: float
    violations: int
    kl_nats: float
    spike_entropy_nats: float
    coverage: float
    hybrid_loss: float
    wall_ms: float

    def __post_init__(self):
        for name in ("reward", "kl_nats", "spike_entropy_nats", "coverage", "hybrid_loss",
                     "wall_ms"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"metrics field {name} is not finite")

    @classmethod
    def from_record(cls, rec) -> "MetricsRow":
        return cls(int(rec.episode), float(rec.reward), int(rec.violations), float(rec.kl),
                   float(rec.spike_entropy), float(rec.coverage), float(rec.hybrid_loss),
                   float(rec.sim_ms))


def _fmt(v) -> str:
    # repr of a Python float is the shortest string that round-trips.
    return str(v) if isinstance(v, int) else repr(float(v))


def write_metrics(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = []
        for line in reader:
            if len(line) != len(METRICS_HEADER):
                raise ValueError(f"{path}: malformed row {line!r}")
            rows.append(MetricsRow(int(line[0]), float(line[1]), int(line[2]),
                                   *(float(x) for x in line[3:])))
    return rows


def trajectory_lines(rec):
    """One JSON-ready dict per agent for an episode record."""
    return [{"episode": int(rec.episode), "agent": i, "path": rec.paths[i],
             "plans": rec.plans[i], "violations": rec.violation_steps[i]}
            for i in range(len(rec.paths))]


def write_trajectories(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            for obj in trajectory_lines(rec):
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_trajectories(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            obj = json.loads(line)
            if set(obj) != {"episode", "agent", "path", "plans", "violations"}:
                raise ValueError(f"{path}:{n}: unexpected keys {sorted(obj)}")
            out.append(obj)
    return out


def export_metrics(directory, records):
    """Write ``metrics.csv`` and ``trajectories.jsonl``; returns the metric rows."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = [MetricsRow.from_record(r) for r in records]
    write_metrics(d / "metrics.csv", rows)
    write_trajectories(d / "trajectories.jsonl", records)
    return rows


# ---------------------------------------------------------------------------
# information diagnostic


def obs_bucket(features, n_buckets: int = N_BUCKETS) -> int:
    """Hash of the feature vector quantized to 1/16 steps, reduced mod ``n_buckets``."""
    q = np.round(np.asarray(features, dtype=float) * 16).astype("<i8")
    digest = hashlib.blake2b(q.tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % n_buckets


def _entropy_bits(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def mutual_information(pairs) -> float:
    """Plug-in ``H(A) - H(A|O)`` in bits from ``(bucket, action)`` pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("mutual_information needs at least one pair")
    obs = np.array([o for o, _ in pairs])
    act = np.array([a for _, a in pairs])
    _, o_idx = np.unique(obs, return_inverse=True)
    _, a_idx = np.unique(act, return_inverse=True)
    joint = np.zeros((o_idx.max() + 1, a_idx.max() + 1))
    np.add.at(joint, (o_idx, a_idx), 1.0)
    h_a = _entropy_bits(joint.sum(axis=0))
    h_o = _entropy_bits(joint.sum(axis=1))
    h_oa = _entropy_bits(joint.ravel())
    mi = h_a + h_o - h_oa
    # Clamp rounding noise into the valid range.
    return float(min(max(mi, 0.0), h_a, math.log2(N_ACTIONS)))


# ---------------------------------------------------------------------------
# SVG

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")


def _svg(body, title, width=WIDTH, height=HEIGHT) -> str:
    return ('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<title>{escape(title)}</title>\n'
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def _num(v) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _axes(x0, x1, y0, y1, xlabel, ylabel, title):
    """Axis lines, ticks and labels for a plot area mapped to data ranges."""
    left, right, top, bottom = MARGIN, WIDTH - 20, 40, HEIGHT - MARGIN
    body = [
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{(left + right) / 2}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-size="13">{escape(xlabel)}</text>',
        f'<text x="16" y="{(top + bottom) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {(top + bottom) / 2})">{escape(ylabel)}</text>',
    ]

    def sx(x):
        return left + (x - x0) / (x1 - x0 or 1.0) * (right - left)

    def sy(y):
        return bottom - (y - y0) / (y1 - y0 or 1.0) * (bottom - top)

    for t in _nice_ticks(x0, x1):
        body.append(f'<line x1="{_num(sx(t))}" y1="{bottom}" x2="{_num(sx(t))}" '
                    f'y2="{bottom + 5}" stroke="black"/>')
        body.append(f'<text x="{_num(sx(t))}" y="{bottom + 18}" text-anchor="middle" '
                    f'font-size="11">{t:.4g}</text>')
    for t in _nice_ticks(y0, y1):
        body.append(f'<line x1="{left - 5}" y1="{_num(sy(t))}" x2="{left}" '
                    f'y2="{_num(sy(t))}" stroke="black"/>')
        body.append(f'<text x="{left - 8}" y="{_num(sy(t) + 4)}" text-anchor="end" '
                    f'font-size="11">{t:.3g}</text>')
    return body, sx, sy


def line_plot(xs, ys, title, ylabel, xlabel="episode") -> str:
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if y1 <= y0:
        y1 = y0 + 1.0
    if x1 <= x0:
        x1 = x0 + 1.0
    body, sx, sy = _axes(x0, x1, y0, y1, xlabel, ylabel, title)
    pts = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(xs, ys))
    body.append(f'<polyline class="series" fill="none" stroke="{PALETTE[0]}" '
                f'stroke-width="1.5" points="{pts}"/>')
    return _svg(body, title)


def trajectory_plot(paths, dims, title="Agent trajectories (x-y projection)") -> str:
    """One polyline per agent; ``paths[i]`` is a list of ``[x, y, z]``."""
    body, sx, sy = _axes(0.0, float(dims[0] - 1), 0.0, float(dims[1] - 1), "x", "y", title)
    for i, path in enumerate(paths):
        pts = " ".join(f"{_num(sx(p[0]))},{_num(sy(p[1]))}" for p in path)
        color = PALETTE[i % len(PALETTE)]
        body.append(f'<polyline class="agent" data-agent="{i}" fill="none" stroke="{color}" '
                    f'stroke-width="1.5" points="{pts}"/>')
        if path:
            body.append(f'<circle cx="{_num(sx(path[0][0]))}" cy="{_num(sy(path[0][1]))}" '
                        f'r="3" fill="{color}"/>')
    return _svg(body, title)


def heat_color(v: float, vmax: float) -> str:
    """White for zero visits, darkening toward navy as ``v`` approaches ``vmax``."""
    t = 0.0 if vmax <= 0 else min(max(v / vmax, 0.0), 1.0)
    r = round(255 * (1 - t))
    g = round(255 * (1 - 0.8 * t))
    b = round(255 * (1 - 0.5 * t))
    return f"rgb({r},{g},{b})"


def heatmap_plot(visits, title="Visit frequency") -> str:
    visits = np.asarray(visits, dtype=float)
    nx, ny = visits.shape
    size = min((WIDTH - MARGIN - 20) / nx, (HEIGHT - MARGIN - 40) / ny)
    vmax = float(visits.max())
    body = [f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">'
            f'{escape(title)}</text>']
    left, bottom = MARGIN, HEIGHT - MARGIN
    for x in range(nx):
        for y in range(ny):
            v = visits[x, y]
            body.append(f'<rect class="cell" data-x="{x}" data-y="{y}" '
                        f'x="{_num(left + x * size)}" y="{_num(bottom - (y + 1) * size)}" '
                        f'width="{_num(size)}" height="{_num(size)}" '
                        f'fill="{heat_color(v, vmax)}"/>')
    body += [
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{_num(left + nx * size)}" '
        f'y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{bottom}" x2="{left}" '
        f'y2="{_num(bottom - ny * size)}" stroke="black"/>',
        f'<text x="{_num(left + nx * size / 2)}" y="{bottom + 20}" text-anchor="middle" '
        f'font-size="13">x (0..{nx - 1})</text>',
        f'<text x="16" y="{_num(bottom - ny * size / 2)}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {_num(bottom - ny * size / 2)})">y (0..{ny - 1})</text>',
        f'<text x="{WIDTH - 20}" y="{bottom + 20}" text-anchor="end" font-size="11">'
        f'max visits {vmax:.0f}</text>',
    ]
    return _svg(body, title)


PLOT_FILES = ("kl.svg", "violations.svg", "entropy.svg", "trajectories.svg", "heatmap.svg")


def emit_plots(directory, rows, paths=None, heatmap=None, dims=None):
    """Write the five SVG figures; returns the list of files written.

    ``paths`` are the x-y-z paths of one episode (usually the last) and
    ``heatmap`` the accumulated column visit counts.
    """
    rows = list(rows)
    if not rows:
        log.warning("no metric rows; skipping plots")
        return []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ep = [r.episode for r in rows]
    files = {
        "kl.svg": line_plot(ep, [r.kl_nats for r in rows],
                            "KL divergence of plan distribution to prior", "KL (nats)"),
        "violations.svg": line_plot(ep, [r.violations for r in rows],
                                    "Safety violations per episode", "violations"),
        "entropy.svg": line_plot(ep, [r.spike_entropy_nats for r in rows],
                                 "Output spike entropy per episode", "entropy (nats)"),
    }
    if paths is not None and heatmap is not None:
        heatmap = np.asarray(heatmap)
        dims = dims or heatmap.shape
        files["trajectories.svg"] = trajectory_plot(paths, dims)
        files["heatmap.svg"] = heatmap_plot(heatmap)
    written = []
    for name, text in files.items():
        (d / name).write_text(text, encoding="utf-8")
        written.append(d / name)
    return written

"""Partially observable 3D voxel world with no-fly zones and a safety shield.

Moves are resolved one agent at a time in index order against the
destinations already committed by lower-indexed agents and the current cells
of the others, so no two agents ever share a voxel.  A move that fails the
safety predicate is reverted (the agent stays put) and reported.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, UsageError
from .plans import EVADE, HOVER, LAND, MOVES, N_ACTIONS

FREE, OBSTACLE, NOFLY, TARGET = 0, 1, 2, 3

# Reward shaping
R_TARGET = 1.0
R_COVERAGE = 0.1
R_VIOLATION = -1.0
R_STEP = -0.01
R_BUMP = -0.05
R_LAND_TARGET = 0.5

DRIFT_PERIOD = 5
DRIFT_FRACTION = 0.1
N_TEMPERATURE_BUMPS = 3

AXES = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)])


@dataclass(frozen=True)
class WorldConfig:
    dims: tuple = (40, 40, 10)
    n_agents: int = 10
    sensor_radius: int = 3
    obstacle_density: float = 0.08
    n_nofly_zones: int = 4
    nofly_size: int = 3
    n_targets: int = 12
    max_steps: int = 50
    velocity_limit: int = 1

    def validate(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ConfigError("world.dims must be three positive integers")
        if not 0.0 <= self.obstacle_density <= 1.0:
            raise ConfigError("world.obstacle_density must be in [0, 1]")
        for name in ("n_agents", "sensor_radius", "velocity_limit"):
            if getattr(self, name) < 1:
                raise ConfigError(f"world.{name} must be >= 1")
        for name in ("n_nofly_zones", "n_targets", "max_steps", "nofly_size"):
            if getattr(self, name) < 0:
                raise ConfigError(f"world.{name} must be >= 0")
        return self


@dataclass
class SafetyVerdict:
    violated: bool = False
    reason: Optional[str] = None    # "nofly_proximity" | "velocity_exceeded" | "collision"

    def __post_init__(self):
        if self.violated != (self.reason is not None):
            raise UsageError("a verdict has a reason exactly when it is violated")


@dataclass
class Observation:
    depth: np.ndarray          # distance to nearest obstacle along +x,-x,+y,-y,+z,-z
    temperature: float
    proximity: int             # other agents within the sensing cube
    patch: np.ndarray          # occupancy codes in the sensing cube, flattened
    position: np.ndarray       # normalized to [0, 1]
    unsafe_moves: np.ndarray   # per action: predicted shield violation from local data
    sensor_radius: int = 3
    n_agents: int = 10
    landed: bool = False

    def features(self) -> np.ndarray:
        """Flat feature vector in [0, 1]; the first six entries are the depth readings."""
        if self.landed:
            return np.zeros(self.feature_dim(self.sensor_radius))
        return np.concatenate([
            self.depth / self.sensor_radius,
            [self.temperature, min(1.0, self.proximity / max(1, self.n_agents - 1))],
            self.position,
            self.unsafe_moves.astype(float),
            self.patch / 3.0,
        ])

    @staticmethod
    def feature_dim(sensor_radius: int = 3) -> int:
        return 6 + 2 + 3 + N_ACTIONS + (2 * sensor_radius + 1) ** 3


@dataclass
class WorldState:
    config: WorldConfig
    occupancy: np.ndarray          # (X, Y, Z) int codes
    positions: np.ndarray          # (n_agents, 3) int
    alive: np.ndarray              # bool; False once landed
    visits: np.ndarray             # (X, Y) agent-visit counts
    temperature: np.ndarray        # (X, Y, Z) in [0, 1]
    drifting: np.ndarray           # (k, 3) coordinates of drifting obstacles
    seed: int = 0
    clock: int = 0
    target_claimed: np.ndarray = None   # (X, Y) bool
    covered: np.ndarray = None          # (X, Y) bool: columns visited at least once

    @property
    def dims(self):
        return self.occupancy.shape

    def copy(self) -> "WorldState":
        return WorldState(
            self.config, self.occupancy.copy(), self.positions.copy(), self.alive.copy(),
            self.visits.copy(), self.temperature, self.drifting.copy(), self.seed,
            self.clock, self.target_claimed.copy(), self.covered.copy(),
        )

    def in_bounds(self, p) -> bool:
        return all(0 <= p[i] < self.dims[i] for i in range(3))

    def code(self, p) -> int:
        return int(self.occupancy[tuple(p)]) if self.in_bounds(p) else OBSTACLE

    def to_json(self) -> dict:
        def cells(code):
            return np.argwhere(self.occupancy == code).tolist()
        return {
            "dims": list(self.dims),
            "seed": self.seed,
            "clock": self.clock,
            "obstacles": cells(OBSTACLE),
            "nofly": cells(NOFLY),
            "targets": cells(TARGET),
            "agents": self.positions.tolist(),
        }


# ---------------------------------------------------------------------------
# construction


def _temperature_field(dims, rng):
    X, Y, Z = dims
    gx, gy, gz = np.meshgrid(np.arange(X), np.arange(Y), np.arange(Z), indexing="ij")
    field_ = np.zeros(dims)
    for _ in range(N_TEMPERATURE_BUMPS):
        c = rng.uniform(0, 1, 3) * np.array(dims)
        w = rng.uniform(0.15, 0.35) * max(X, Y)
        field_ += np.exp(-((gx - c[0]) ** 2 + (gy - c[1]) ** 2 + (gz - c[2]) ** 2) / (2 * w * w))
    lo, hi = field_.min(), field_.max()
    return (field_ - lo) / (hi - lo) if hi > lo else np.zeros(dims)


def _nofly_adjacent(occ) -> np.ndarray:
    """Voxels that are no-fly or touch a no-fly voxel (Chebyshev distance 1)."""
    nofly = occ == NOFLY
    out = nofly.copy()
    X, Y, Z = occ.shape
    padded = np.zeros((X + 2, Y + 2, Z + 2), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = nofly
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                out |= padded[1 + dx:1 + dx + X, 1 + dy:1 + dy + Y, 1 + dz:1 + dz + Z]
    return out


def _spawn(occ, n_agents, rng) -> np.ndarray:
    """Distinct free, shield-safe cells at z = 1 (or the only layer), by rejection sampling."""
    X, Y, Z = occ.shape
    z_spawn = min(1, Z - 1)
    unsafe = _nofly_adjacent(occ)
    positions = []
    for _ in range(n_agents):
        for _attempt in range(10_000):
            p = (int(rng.integers(X)), int(rng.integers(Y)), z_spawn)
            if occ[p] in (FREE, TARGET) and not unsafe[p] and p not in positions:
                break
        else:
            raise ConfigError("could not place all agents on free voxels")
        positions.append(p)
    return np.array(positions, dtype=int).reshape(-1, 3)


def init_world(config: WorldConfig, rng: np.random.Generator, seed: int = 0) -> WorldState:
    config.validate()
    dims = tuple(int(d) for d in config.dims)
    X, Y, Z = dims
    occ = np.zeros(dims, dtype=np.int8)

    s = min(config.nofly_size, X, Y)
    for _ in range(config.n_nofly_zones):
        x0, y0 = rng.integers(0, X - s + 1), rng.integers(0, Y - s + 1)
        occ[x0:x0 + s, y0:y0 + s, :] = NOFLY

    obstacles = (rng.random(dims) < config.obstacle_density) & (occ == FREE)
    occ[obstacles] = OBSTACLE

    free = np.argwhere(occ == FREE)
    if config.n_targets and len(free):
        pick = rng.choice(len(free), size=min(config.n_targets, len(free)), replace=False)
        occ[tuple(free[pick].T)] = TARGET

    positions = _spawn(occ, config.n_agents, rng)

    obs_cells = np.argwhere(occ == OBSTACLE)
    n_drift = int(round(DRIFT_FRACTION * len(obs_cells)))
    drifting = obs_cells[rng.choice(len(obs_cells), size=n_drift, replace=False)] \
        if n_drift else np.zeros((0, 3), dtype=int)

    world = WorldState(
        config=config, occupancy=occ, positions=positions,
        alive=np.ones(config.n_agents, dtype=bool), visits=np.zeros((X, Y), dtype=np.int64),
        temperature=_temperature_field(dims, rng), drifting=drifting, seed=seed,
        target_claimed=np.zeros((X, Y), dtype=bool), covered=np.zeros((X, Y), dtype=bool),
    )
    for p in positions:
        world.covered[p[0], p[1]] = True
    return world


def respawn(layout: WorldState, rng: np.random.Generator) -> WorldState:
    """Fresh episode on an existing layout: new spawn cells, zeroed visits and clock."""
    cfg = layout.config
    positions = _spawn(layout.occupancy, cfg.n_agents, rng)
    world = world_from_layout(layout.occupancy.copy(), positions, cfg,
                              drifting=layout.drifting.copy())
    world.temperature = layout.temperature
    world.seed = layout.seed
    return world


def world_from_layout(occupancy, positions, config: Optional[WorldConfig] = None,
                      drifting=None) -> WorldState:
    """Hand-built world (tests, replays).  ``occupancy`` uses the FREE/OBSTACLE/NOFLY/TARGET codes."""
    occ = np.asarray(occupancy, dtype=np.int8)
    positions = np.asarray(positions, dtype=int).reshape(-1, 3)
    if config is None:
        config = WorldConfig(dims=occ.shape, n_agents=len(positions))
    X, Y, _ = occ.shape
    world = WorldState(
        config=config, occupancy=occ, positions=positions,
        alive=np.ones(len(positions), dtype=bool), visits=np.zeros((X, Y), dtype=np.int64),
        temperature=np.zeros(occ.shape),
        drifting=np.zeros((0, 3), dtype=int) if drifting is None else np.asarray(drifting),
        target_claimed=np.zeros((X, Y), dtype=bool), covered=np.zeros((X, Y), dtype=bool),
    )
    for p in positions:
        world.covered[p[0], p[1]] = True
    return world


# ---------------------------------------------------------------------------
# sensing


def _nearest_threat(world: WorldState, agent: int):
    """Offset to the nearest obstacle or other agent inside the sensing cube, or None."""
    r = world.config.sensor_radius
    pos = world.positions[agent]
    best, best_d = None, None
    lo = np.maximum(pos - r, 0)
    hi = np.minimum(pos + r + 1, world.dims)
    box = world.occupancy[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    cand = [c + lo for c in np.argwhere(box == OBSTACLE)]
    for j in np.flatnonzero(world.alive):
        if j != agent and np.max(np.abs(world.positions[j] - pos)) <= r:
            cand.append(world.positions[j])
    for c in cand:
        off = np.asarray(c) - pos
        d = (np.max(np.abs(off)), tuple(off))
        if best_d is None or d < best_d:
            best, best_d = off, d
    return best


def intended_destination(world: WorldState, agent: int, action: int):
    """Cell the agent tries to reach (before bounds/obstacle blocking and shielding)."""
    pos = world.positions[agent]
    if action == LAND:
        return np.array([pos[0], pos[1], 0])
    if action == EVADE:
        threat = _nearest_threat(world, agent)
        if threat is None:
            return pos.copy()
        return pos - np.sign(threat)
    return pos + np.array(MOVES[action])


def _blocked(world: WorldState, dest) -> bool:
    return not world.in_bounds(dest) or world.code(dest) == OBSTACLE


def destination(world: WorldState, agent: int, action: int):
    """Cell the agent ends in if the action is executed unshielded (blocked moves stay put)."""
    dest = intended_destination(world, agent, action)
    return world.positions[agent].copy() if _blocked(world, dest) else dest


def check_safety(world: WorldState, agent: int, action: int, occupied=None) -> SafetyVerdict:
    """Shield predicate for one proposed action.

    ``occupied`` is the set of cells the other agents will hold (defaults to
    their current cells).  Blocked moves resolve to staying put and are only
    unsafe if the current cell is.
    """
    pos = world.positions[agent]
    dest = intended_destination(world, agent, action)
    if np.max(np.abs(dest - pos)) > world.config.velocity_limit:
        return SafetyVerdict(True, "velocity_exceeded")
    if _blocked(world, dest):
        dest = pos
    if _near_nofly(world, dest):
        return SafetyVerdict(True, "nofly_proximity")
    if occupied is None:
        occupied = {tuple(world.positions[j]) for j in np.flatnonzero(world.alive) if j != agent}
    if tuple(dest) in occupied:
        return SafetyVerdict(True, "collision")
    return SafetyVerdict()


def _near_nofly(world: WorldState, p) -> bool:
    lo = np.maximum(np.asarray(p) - 1, 0)
    hi = np.minimum(np.asarray(p) + 2, world.dims)
    return bool(np.any(world.occupancy[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] == NOFLY))


def admissible_mask(world: WorldState, agent: int) -> np.ndarray:
    """Actions that are not physically blocked (bounds, obstacles, ground)."""
    pos = world.positions[agent]
    mask = np.ones(N_ACTIONS, dtype=bool)
    for a in MOVES:
        if a != HOVER and _blocked(world, pos + np.array(MOVES[a])):
            mask[a] = False
    return mask


def _patch(world: WorldState, pos, r):
    X, Y, Z = world.dims
    padded_lo = pos - r
    out = np.full((2 * r + 1,) * 3, OBSTACLE, dtype=np.int8)
    lo = np.maximum(padded_lo, 0)
    hi = np.minimum(pos + r + 1, (X, Y, Z))
    src = world.occupancy[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    o = lo - padded_lo
    out[o[0]:o[0] + src.shape[0], o[1]:o[1] + src.shape[1], o[2]:o[2] + src.shape[2]] = src
    return out


def observe(world: WorldState, agent: int) -> Observation:
    cfg = world.config
    r = cfg.sensor_radius
    if not world.alive[agent]:
        side = 2 * r + 1
        return Observation(np.zeros(6), 0.0, 0, np.zeros(side ** 3), np.zeros(3),
                           np.zeros(N_ACTIONS, dtype=bool), r, cfg.n_agents, landed=True)
    pos = world.positions[agent]
    patch = _patch(world, pos, r)
    depth = np.full(6, float(r))
    c = np.array([r, r, r])
    for k, ax in enumerate(AXES):
        for d in range(1, r + 1):
            if patch[tuple(c + d * ax)] == OBSTACLE:
                depth[k] = d
                break
    others = [j for j in np.flatnonzero(world.alive) if j != agent]
    near = sum(1 for j in others if np.max(np.abs(world.positions[j] - pos)) <= r)
    # Shield prediction from local information only (no-fly codes in the patch,
    # neighbours' current cells, and the landing height).
    local_nofly = patch == NOFLY
    unsafe = np.zeros(N_ACTIONS, dtype=bool)
    occupied = {tuple(world.positions[j]) for j in others}
    for a in range(N_ACTIONS):
        dest = intended_destination(world, agent, a)
        if np.max(np.abs(dest - pos)) > cfg.velocity_limit:
            unsafe[a] = True
            continue
        if _blocked(world, dest):
            dest = pos
        q = dest - pos + c
        if local_nofly[q[0] - 1:q[0] + 2, q[1] - 1:q[1] + 2, q[2] - 1:q[2] + 2].any():
            unsafe[a] = True
        elif tuple(dest) in occupied:
            unsafe[a] = True
    dims = np.array(world.dims, dtype=float)
    position = pos / np.maximum(dims - 1, 1)
    return Observation(depth, float(world.temperature[tuple(pos)]), int(near),
                       patch.reshape(-1).astype(float), position, unsafe, r, cfg.n_agents)


# ---------------------------------------------------------------------------
# dynamics


def resolve_moves(world: WorldState, actions):
    """Shielded simultaneous move resolution.

    Returns ``(destinations, verdicts, bumped)`` without mutating ``world``.
    """
    n = len(world.positions)
    dest_all = world.positions.copy()
    verdicts = [SafetyVerdict() for _ in range(n)]
    bumped = np.zeros(n, dtype=bool)
    committed = {}
    for i in range(n):
        if not world.alive[i]:
            continue
        occupied = set(committed.values())
        occupied |= {tuple(world.positions[j]) for j in range(i + 1, n) if world.alive[j]}
        a = int(actions[i])
        v = check_safety(world, i, a, occupied)
        verdicts[i] = v
        pos = world.positions[i]
        if v.violated:
            dest = pos.copy()
        else:
            dest = intended_destination(world, i, a)
            if _blocked(world, dest):
                bumped[i] = a != HOVER
                dest = pos.copy()
        dest_all[i] = dest
        committed[i] = tuple(dest)
    return dest_all, verdicts, bumped


def _drift_obstacles(world: WorldState, rng: np.random.Generator):
    lateral = AXES[:4]
    agents = {tuple(p) for p in world.positions}
    for k in range(len(world.drifting)):
        src = world.drifting[k]
        step = lateral[rng.integers(4)]
        dst = src + step
        if (world.in_bounds(dst) and world.occupancy[tuple(dst)] == FREE
                and tuple(dst) not in agents):
            world.occupancy[tuple(src)] = FREE
            world.occupancy[tuple(dst)] = OBSTACLE
            world.drifting[k] = dst


def step_world(world: WorldState, actions, rng: np.random.Generator):
    """Advance one tick.  Returns ``(world', rewards, verdicts, done)``; ``world`` is not mutated."""
    actions = np.asarray(actions, dtype=int)
    n = len(world.positions)
    if actions.shape != (n,):
        raise UsageError(f"expected {n} actions, got {actions.shape}")
    for i in range(n):
        if not world.alive[i] and actions[i] != HOVER:
            raise UsageError(f"action {actions[i]} for landed agent {i}")
        if not 0 <= actions[i] < N_ACTIONS:
            raise UsageError(f"unknown action {actions[i]}")
    new = world.copy()
    dest, verdicts, bumped = resolve_moves(world, actions)
    rewards = np.zeros(n)
    for i in range(n):
        if not world.alive[i]:
            continue
        rewards[i] += R_STEP
        if verdicts[i].violated:
            rewards[i] += R_VIOLATION
        if bumped[i]:
            rewards[i] += R_BUMP
        new.positions[i] = dest[i]
        x, y, z = dest[i]
        new.visits[x, y] += 1
        if not new.covered[x, y]:
            new.covered[x, y] = True
            if world.occupancy[x, y, :].max() != NOFLY:
                rewards[i] += R_COVERAGE
        if (world.occupancy[x, y, :] == TARGET).any() and not new.target_claimed[x, y]:
            new.target_claimed[x, y] = True
            rewards[i] += R_TARGET
        if actions[i] == LAND and not verdicts[i].violated and z == 0:
            new.alive[i] = False
            if (world.occupancy[x, y, :] == TARGET).any():
                rewards[i] += R_LAND_TARGET
    new.clock = world.clock + 1
    if new.clock % DRIFT_PERIOD == 0:
        _drift_obstacles(new, rng)
    done = new.clock >= world.config.max_steps or not new.alive.any()
    return new, rewards, verdicts, bool(done)


def coverage_stats(world: WorldState):
    """``(fraction of free columns visited, visit heatmap)``."""
    free_cols = ~(world.occupancy == NOFLY).any(axis=2)
    n_free = int(free_cols.sum())
    covered = world.covered & free_cols
    frac = float(covered.sum() / n_free) if n_free else 0.0
    return frac, world.visits.copy()


def save_layout(world: WorldState, path):
    with open(path, "w") as f:
        json.dump(world.to_json(), f)


def load_layout(path, config: Optional[WorldConfig] = None) -> WorldState:
    with open(path) as f:
        d = json.load(f)
    occ = np.zeros(d["dims"], dtype=np.int8)
    for key, code in (("obstacles", OBSTACLE), ("nofly", NOFLY), ("targets", TARGET)):
        if d[key]:
            occ[tuple(np.array(d[key]).T)] = code
    world = world_from_layout(occ, d["agents"], config)
    world.seed = d.get("seed", 0)
    world.clock = d.get("clock", 0)
    return world

"""Seeded random streams.

Every stochastic component draws from a ``numpy.random.Generator`` derived
from ``(master_seed, purpose, *keys)``, so replaying a run only requires the
master seed.
"""

import zlib

import numpy as np

# Purpose tags keep streams for different subsystems independent.
WORLD = "world"
AGENT = "agent"
TRAIN = "train"
EVAL = "eval"


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("ascii"))


def stream(master_seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(master_seed, purpose, keys)``."""
    entropy = [int(master_seed) & 0xFFFFFFFF, _tag(purpose)]
    entropy.extend(int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def agent_stream(master_seed: int, agent: int, episode: int) -> np.random.Generator:
    """One stream per agent per episode."""
    return stream(master_seed, AGENT, agent, episode)


def generator_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    bitgen = np.random.PCG64()
    bitgen.state = state
    return np.random.Generator(bitgen)

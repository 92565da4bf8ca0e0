"""Action and latent-plan vocabularies shared by the environment and both policies."""

import numpy as np

ACTIONS = ("hover", "+x", "-x", "+y", "-y", "+z", "-z", "land", "evade")
N_ACTIONS = len(ACTIONS)
HOVER, PX, NX, PY, NY, PZ, NZ, LAND, EVADE = range(N_ACTIONS)

# Unit displacement of the plain moves; land and evade are resolved by the world.
MOVES = {
    HOVER: (0, 0, 0),
    PX: (1, 0, 0),
    NX: (-1, 0, 0),
    PY: (0, 1, 0),
    NY: (0, -1, 0),
    PZ: (0, 0, 1),
    NZ: (0, 0, -1),
}

PLANS = ("hover", "advance+x", "advance-x", "advance+y", "advance-y", "climb", "descend", "sweep")
N_PLANS = len(PLANS)
PLAN_BITS = 3

# First grid step of each plan; "sweep" starts with an evasive step.
PLAN_ACTION = np.array([HOVER, PX, NX, PY, NY, PZ, NZ, EVADE])


def plan_of(bitstring, n_qubits: int):
    """Plan class = top three bits of the measured bitstring."""
    return np.asarray(bitstring) >> (n_qubits - PLAN_BITS)

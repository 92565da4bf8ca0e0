"""Dense statevector simulation for small circuits.

Basis state ``z`` is the integer whose bit ``b`` (LSB = qubit 0) is the value
of qubit ``b``.  All operations return new ``StateVector`` objects.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UsageError

MAX_QUBITS = 10

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise UsageError(
                f"expected {1 << self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    ``kind`` is one of ``H``, ``RY``, ``RX``, ``CZ`` or ``PHASE``.  ``PHASE``
    is the diagonal ``exp(-i * angle * cost[z])`` and carries its cost table.
    """

    kind: str
    qubits: tuple
    angle: float = 0.0
    cost: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("H", "RY", "RX", "CZ", "PHASE"):
            raise UsageError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CZ":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise UsageError("CZ needs two distinct qubits")
        elif self.kind == "PHASE":
            if self.cost is None:
                raise UsageError("PHASE gate needs a cost table")
        elif len(self.qubits) != 1:
            raise UsageError(f"{self.kind} acts on exactly one qubit")

    def inverse(self) -> "Gate":
        if self.kind in ("H", "CZ"):
            return self
        return Gate(self.kind, self.qubits, -self.angle, self.cost)

    def matrix(self) -> np.ndarray:
        """Local matrix (2x2 for one-qubit gates, 4x4 for CZ, full diagonal for PHASE)."""
        if self.kind == "H":
            return _H.copy()
        if self.kind == "RY":
            return ry_matrix(self.angle)
        if self.kind == "RX":
            return rx_matrix(self.angle)
        if self.kind == "CZ":
            return np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
        return np.diag(np.exp(-1j * self.angle * np.asarray(self.cost, dtype=float)))


def H(q: int) -> Gate:
    return Gate("H", (q,))


def RY(q: int, theta: float) -> Gate:
    return Gate("RY", (q,), float(theta))


def RX(q: int, theta: float) -> Gate:
    return Gate("RX", (q,), float(theta))


def CZ(control: int, target: int) -> Gate:
    return Gate("CZ", (control, target))


def PHASE(cost, gamma: float) -> Gate:
    return Gate("PHASE", (), float(gamma), np.asarray(cost, dtype=float))


def new_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits!r}")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def _apply_1q(amps: np.ndarray, n: int, q: int, m: np.ndarray) -> np.ndarray:
    view = amps.reshape(1 << (n - 1 - q), 2, 1 << q)
    a0, a1 = view[:, 0], view[:, 1]
    out = np.empty_like(view)
    out[:, 0] = m[0, 0] * a0 + m[0, 1] * a1
    out[:, 1] = m[1, 0] * a0 + m[1, 1] * a1
    return out.reshape(-1)


def _check_cost(state: StateVector, cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (state.dim,):
        raise UsageError(f"cost table has length {cost.size}, state has {state.dim}")
    return cost


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    n = state.n_qubits
    for q in gate.qubits:
        if not 0 <= q < n:
            raise UsageError(f"qubit index {q} out of range for {n} qubits")
    if gate.kind == "PHASE":
        return apply_cost_phase(state, gate.cost, gate.angle)
    if gate.kind == "CZ":
        a, b = gate.qubits
        z = np.arange(state.dim)
        both = ((z >> a) & 1) & ((z >> b) & 1)
        return StateVector(n, np.where(both == 1, -state.amplitudes, state.amplitudes))
    return StateVector(n, _apply_1q(state.amplitudes, n, gate.qubits[0], gate.matrix()))


def apply_circuit(state: StateVector, gates: Sequence[Gate]) -> StateVector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def apply_cost_phase(state: StateVector, cost, gamma: float) -> StateVector:
    """Multiply amplitude ``z`` by ``exp(-i * gamma * cost[z])``."""
    cost = _check_cost(state, cost)
    return StateVector(state.n_qubits, state.amplitudes * np.exp(-1j * gamma * cost))


def apply_mixer(state: StateVector, beta: float) -> StateVector:
    """Transverse-field mixer exp(-i beta sum_j X_j), i.e. RX(2 beta) on every qubit."""
    m = rx_matrix(2.0 * beta)
    amps = state.amplitudes
    for q in range(state.n_qubits):
        amps = _apply_1q(amps, state.n_qubits, q, m)
    return StateVector(state.n_qubits, amps)


def measure_probs(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def sample(state: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``shots`` computational-basis measurements; returns counts per basis state."""
    if shots < 1:
        raise UsageError("shots must be >= 1")
    p = measure_probs(state)
    return rng.multinomial(int(shots), p / p.sum())


def expectation_cost(state: StateVector, cost) -> float:
    cost = _check_cost(state, cost)
    return float(measure_probs(state) @ cost)


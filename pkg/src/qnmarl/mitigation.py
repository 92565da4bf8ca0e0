"""Zero-noise extrapolation and readout-error mitigation."""

import numpy as np

from . import statevector as sv
from .errors import MitigationError, UsageError

ZNE_SCALES = (1.0, 2.0, 3.0)
MAX_CONDITION = 1e8


def zne_extrapolate(values, scales=ZNE_SCALES) -> float:
    """Value at zero noise of the quadratic through ``(scale_k, values_k)``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (3,) or not np.all(np.isfinite(values)):
        raise UsageError("zne_extrapolate needs exactly three finite values")
    x = np.asarray(scales, dtype=float)
    # Lagrange basis evaluated at 0.
    weights = np.array([
        (x[1] * x[2]) / ((x[0] - x[1]) * (x[0] - x[2])),
        (x[0] * x[2]) / ((x[1] - x[0]) * (x[1] - x[2])),
        (x[0] * x[1]) / ((x[2] - x[0]) * (x[2] - x[1])),
    ])
    return float(weights @ values)


def fold_noise(gates, scale: int) -> list:
    """Unitary folding: ``G -> G (G^dag G)^k`` with ``k = (scale - 1) / 2``."""
    if int(scale) != scale or scale < 1 or scale % 2 == 0:
        raise UsageError(f"fold scale must be an odd integer >= 1, got {scale!r}")
    k = (int(scale) - 1) // 2
    out = []
    for g in gates:
        out.append(g)
        for _ in range(k):
            out.extend((g.inverse(), g))
    return out


def fold_partial(gates, n_folded: int) -> list:
    """Fold only the first ``n_folded`` gates once (G -> G G^dag G)."""
    out = []
    for i, g in enumerate(gates):
        out.append(g)
        if i < n_folded:
            out.extend((g.inverse(), g))
    return out


def scaled_circuit(gates, scale) -> list:
    """Circuit at noise scale 1, 2 or 3; scale 2 folds half the gates (rounded down)."""
    if scale == 2:
        return fold_partial(gates, len(gates) // 2)
    return fold_noise(gates, int(scale))


def depolarized_probs(probs, n_gates: int, error_per_gate: float) -> np.ndarray:
    """Output distribution under a global depolarizing error after every gate."""
    keep = (1.0 - error_per_gate) ** n_gates
    return keep * probs + (1.0 - keep) / len(probs)


def zne_expectation(gates, n_qubits, observable, rng=None, shots=None,
                    error_per_gate=0.0, scales=ZNE_SCALES):
    """Estimate ``<observable>`` at each scale and extrapolate to zero noise.

    Returns ``(extrapolated, per_scale_values)``.
    """
    observable = np.asarray(observable, dtype=float)
    values = []
    for s in scales:
        circuit = scaled_circuit(gates, s)
        state = sv.apply_circuit(sv.new_state(n_qubits), circuit)
        probs = depolarized_probs(sv.measure_probs(state), len(circuit), error_per_gate)
        if shots is not None:
            probs = rng.multinomial(shots, probs / probs.sum()) / shots
        values.append(float(probs @ observable))
    return zne_extrapolate(values, scales), values


# ---------------------------------------------------------------------------
# readout


def confusion_matrix(n_qubits: int, p_flip0: float, p_flip1: float = None) -> np.ndarray:
    """Tensor-product readout confusion matrix (column = true, row = observed).

    ``p_flip0`` is P(read 1 | true 0) and ``p_flip1`` is P(read 0 | true 1).
    """
    if p_flip1 is None:
        p_flip1 = p_flip0
    single = np.array([[1.0 - p_flip0, p_flip1], [p_flip0, 1.0 - p_flip1]])
    m = np.ones((1, 1))
    # Qubit 0 is the least significant bit, so it is the innermost factor.
    for _ in range(n_qubits):
        m = np.kron(single, m)
    return m


def check_confusion(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise UsageError("confusion matrix must be square")
    if np.any(m < 0) or np.any(m > 1) or not np.allclose(m.sum(axis=0), 1.0, atol=1e-9):
        raise UsageError("confusion matrix columns must be probability vectors")
    return m


def mitigate_readout(m, observed, return_clipped: bool = False):
    """Solve ``M p_true = p_obs``; negative entries are clipped and the result renormalized.

    Raises ``MitigationError`` when ``M`` is singular or its condition number
    exceeds 1e8; callers then keep the raw distribution.
    """
    m = check_confusion(m)
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (m.shape[0],):
        raise UsageError("observed distribution does not match the confusion matrix")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise MitigationError(f"confusion matrix is ill-conditioned (cond={cond:.3g})")
    p = np.linalg.solve(m, observed)
    clipped = bool(np.any(p < 0))
    if clipped:
        p = np.clip(p, 0.0, None)
    total = p.sum()
    if total > 0:
        p = p / total
    return (p, clipped) if return_clipped else p


def apply_readout_noise(counts, m, rng) -> np.ndarray:
    """Resample each shot's outcome through the confusion matrix."""
    m = np.asarray(m, dtype=float)
    out = np.zeros(m.shape[0], dtype=np.int64)
    for z in np.nonzero(counts)[0]:
        out += rng.multinomial(int(counts[z]), m[:, z] / m[:, z].sum())
    return out

"""Dense statevector simulation of the ZZ feature map and RealAmplitudes ansatz.

Qubit 0 is the least-significant bit of the basis-state index.  All circuit
builders work on batches of states stored as ``(batch, 2**n)`` complex arrays;
the single-state wrappers at the top of the module operate on
:class:`StateVector` objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

Entanglement = Literal["full", "linear"]

NORM_TOL = 1e-10

H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (squared norm {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)


@dataclass(frozen=True)
class FeatureMapSpec:
    """ZZ feature map layout: ``reps`` repetitions over ``n_qubits``."""

    n_qubits: int
    reps: int = 2
    entanglement: Entanglement = "full"

    def __post_init__(self):
        _check_layout(self.n_qubits, self.reps, self.entanglement, min_reps=1)


@dataclass(frozen=True)
class AnsatzSpec:
    """RealAmplitudes layout: ``reps + 1`` RY layers with ``reps`` CX blocks."""

    n_qubits: int
    reps: int = 3
    entanglement: Entanglement = "full"

    def __post_init__(self):
        _check_layout(self.n_qubits, self.reps, self.entanglement, min_reps=0)

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.reps + 1)


def _check_layout(n_qubits, reps, entanglement, min_reps):
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    if reps < min_reps:
        raise ValueError(f"reps must be >= {min_reps}, got {reps}")
    if entanglement not in ("full", "linear"):
        raise ValueError(f"unknown entanglement pattern {entanglement!r}")


def entangling_pairs(n_qubits: int, entanglement: Entanglement) -> list[tuple[int, int]]:
    if entanglement == "full":
        return list(itertools.combinations(range(n_qubits), 2))
    if entanglement == "linear":
        return [(i, i + 1) for i in range(n_qubits - 1)]
    raise ValueError(f"unknown entanglement pattern {entanglement!r}")


# ---------------------------------------------------------------------------
# batched gate kernels


def _apply_1q(states: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a 2x2 ``matrix`` (or a batch of them, shape (B, 2, 2)) to ``qubit``."""
    batch, dim = states.shape
    view = states.reshape(batch, dim // (2 ** (qubit + 1)), 2, 2**qubit)
    if matrix.ndim == 2:
        out = np.einsum("ij,bajc->baic", matrix, view)
    else:
        out = np.einsum("bij,bajc->baic", matrix, view)
    return out.reshape(batch, dim)


def _rz_phases(angles: np.ndarray, qubit: int, dim: int) -> np.ndarray:
    """Diagonal of RZ(angle) on ``qubit`` for each angle, shape (B, dim)."""
    bit = (np.arange(dim) >> qubit) & 1
    sign = np.where(bit == 1, 1.0, -1.0)
    return np.exp(0.5j * np.outer(angles, sign))


def _cx_permutation(control: int, target: int, dim: int) -> np.ndarray:
    idx = np.arange(dim)
    flip = ((idx >> control) & 1) == 1
    return np.where(flip, idx ^ (1 << target), idx)


def _ry_matrices(angles: np.ndarray) -> np.ndarray:
    c = np.cos(np.asarray(angles) / 2.0)
    s = np.sin(np.asarray(angles) / 2.0)
    mats = np.empty((len(c), 2, 2), dtype=complex)
    mats[:, 0, 0] = c
    mats[:, 0, 1] = -s
    mats[:, 1, 0] = s
    mats[:, 1, 1] = c
    return mats


def _check_qubits(n_qubits: int, *qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit index {q} out of range for {n_qubits} qubits")


def apply_gate_batch(
    states: np.ndarray,
    gate: str,
    qubits: Sequence[int],
    angle: float | np.ndarray | None = None,
) -> np.ndarray:
    """Apply one gate to every state of a ``(batch, 2**n)`` array.

    ``angle`` may be a scalar or one angle per batch entry.
    """
    states = np.asarray(states, dtype=complex)
    batch, dim = states.shape
    n_qubits = dim.bit_length() - 1
    gate = gate.upper()
    _check_qubits(n_qubits, *qubits)
    if gate == "CX":
        control, target = qubits
        if control == target:
            raise ValueError("CX control and target must differ")
        return states[:, _cx_permutation(control, target, dim)]
    (qubit,) = qubits
    if gate == "H":
        return _apply_1q(states, H_MATRIX, qubit)
    if angle is None:
        raise ValueError(f"gate {gate} needs an angle")
    angles = np.broadcast_to(np.asarray(angle, dtype=float), (batch,))
    if gate == "RZ":
        return states * _rz_phases(angles, qubit, dim)
    if gate == "RY":
        return _apply_1q(states, _ry_matrices(angles), qubit)
    raise ValueError(f"unsupported gate {gate!r}")


def apply_gate(
    state: StateVector, gate: str, qubits: Sequence[int], angle: float | None = None
) -> StateVector:
    """Apply ``H``, ``RY(angle)``, ``RZ(angle)`` or ``CX(control, target)``."""
    out = apply_gate_batch(state.amplitudes[None, :], gate, qubits, angle)
    return StateVector(state.n_qubits, out[0])


# ---------------------------------------------------------------------------
# circuit blocks


def zz_feature_map_batch(X: np.ndarray, spec: FeatureMapSpec) -> np.ndarray:
    """Return U(phi(x))|0...0> for every row of ``X`` as a (batch, 2**n) array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.n_qubits:
        raise ValueError(
            f"feature map expects {spec.n_qubits} inputs per row, got {X.shape[1]}"
        )
    n, dim = spec.n_qubits, 2**spec.n_qubits
    batch = X.shape[0]
    pairs = entangling_pairs(n, spec.entanglement)

    # The whole block between Hadamard layers is diagonal; accumulate its phases.
    diag = np.ones((batch, dim), dtype=complex)
    for q in range(n):
        diag *= _rz_phases(2.0 * X[:, q], q, dim)
    for i, j in pairs:
        # CX(i,j) RZ_j CX(i,j) == RZ on the parity of qubits i and j.
        angle = 2.0 * (np.pi - X[:, i]) * (np.pi - X[:, j])
        parity = ((np.arange(dim) >> i) ^ (np.arange(dim) >> j)) & 1
        sign = np.where(parity == 1, 1.0, -1.0)
        diag *= np.exp(0.5j * np.outer(angle, sign))

    states = np.zeros((batch, dim), dtype=complex)
    states[:, 0] = 1.0
    for _ in range(spec.reps):
        for q in range(n):
            states = _apply_1q(states, H_MATRIX, q)
        states = states * diag
    return states


def zz_feature_map_state(x: Sequence[float], spec: FeatureMapSpec) -> StateVector:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.n_qubits:
        raise ValueError(f"expected a vector of length {spec.n_qubits}, got shape {x.shape}")
    return StateVector(spec.n_qubits, zz_feature_map_batch(x[None, :], spec)[0])


def real_amplitudes_batch(
    states: np.ndarray, theta: np.ndarray, spec: AnsatzSpec
) -> np.ndarray:
    """Apply V(theta) to each row of ``states``.

    ``theta`` is either one parameter vector (shared) or one per row, with
    parameter ``layer * n_qubits + q`` driving the RY on qubit ``q``.
    """
    states = np.asarray(states, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != spec.n_params:
        raise ValueError(
            f"ansatz expects {spec.n_params} parameters, got {theta.shape[-1]}"
        )
    n, dim = spec.n_qubits, states.shape[1]
    if dim != 2**n:
        raise ValueError(f"state dimension {dim} does not match {n} qubits")
    theta = np.broadcast_to(theta, (states.shape[0], spec.n_params))
    perms = [_cx_permutation(c, t, dim) for c, t in entangling_pairs(n, spec.entanglement)]
    for layer in range(spec.reps + 1):
        for q in range(n):
            states = _apply_1q(states, _ry_matrices(theta[:, layer * n + q]), q)
        if layer < spec.reps:
            for perm in perms:
                states = states[:, perm]
    return states


def real_amplitudes_unitary(theta: np.ndarray, spec: AnsatzSpec) -> np.ndarray:
    """Dense matrix of V(theta); column k is V applied to basis state k."""
    dim = 2**spec.n_qubits
    return real_amplitudes_batch(np.eye(dim, dtype=complex), theta, spec).T


def real_amplitudes_state(
    state: StateVector, theta: Sequence[float], spec: AnsatzSpec
) -> StateVector:
    if state.n_qubits != spec.n_qubits:
        raise ValueError("state and ansatz qubit counts differ")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"ansatz expects {spec.n_params} parameters, got {theta.shape}")
    out = real_amplitudes_batch(state.amplitudes[None, :], theta, spec)
    return StateVector(spec.n_qubits, out[0])


# ---------------------------------------------------------------------------
# readout


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(overlap.real**2 + overlap.imag**2)


def measure_probs(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2

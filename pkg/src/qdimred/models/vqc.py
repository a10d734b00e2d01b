"""Variational quantum classifier: ZZ feature map followed by RealAmplitudes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import cross_entropy_loss, make_optimizer, optimizer_step
from ..qsim import AnsatzSpec, FeatureMapSpec, real_amplitudes_batch, real_amplitudes_unitary, zz_feature_map_batch
from .autoencoders import TrainingDivergence, minibatches


@dataclass
class VqcModel:
    feature_map: FeatureMapSpec
    ansatz: AnsatzSpec
    theta: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.feature_map.n_qubits != self.ansatz.n_qubits:
            raise ValueError("feature map and ansatz act on different qubit counts")
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.ansatz.n_params,):
            raise ValueError(f"theta must have {self.ansatz.n_params} entries")
        if not 2 <= self.n_classes <= 2**self.ansatz.n_qubits:
            raise ValueError(f"cannot read {self.n_classes} classes from {self.ansatz.n_qubits} qubits")

    @classmethod
    def init(cls, feature_map: FeatureMapSpec, ansatz: AnsatzSpec, n_classes: int,
             rng: np.random.Generator) -> "VqcModel":
        theta = rng.uniform(-np.pi, np.pi, size=ansatz.n_params)
        return cls(feature_map, ansatz, theta, n_classes)

    def readout(self) -> np.ndarray:
        """(2**n, C) 0/1 matrix sending bitstring k to class k mod C."""
        dim = 2**self.ansatz.n_qubits
        A = np.zeros((dim, self.n_classes))
        A[np.arange(dim), np.arange(dim) % self.n_classes] = 1.0
        return A


def _class_probs(states: np.ndarray, U: np.ndarray, readout: np.ndarray) -> np.ndarray:
    out = states @ U.T
    return (out.real**2 + out.imag**2) @ readout


def vqc_forward(model: VqcModel, X: np.ndarray) -> np.ndarray:
    """Class probabilities for each row of encoded inputs, shape (B, C)."""
    X = np.atleast_2d(X)
    states = zz_feature_map_batch(X, model.feature_map)
    U = real_amplitudes_unitary(model.theta, model.ansatz)
    return _class_probs(states, U, model.readout())


def predict(model: VqcModel, X: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(vqc_forward(model, X), axis=1)


def vqc_evaluate(model: VqcModel, X: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(predict(model, X) == labels))


def shifted_unitaries(theta: np.ndarray, ansatz: AnsatzSpec) -> np.ndarray:
    """V(theta +- pi/2 e_k) for every k, shape (2, P, dim, dim)."""
    P, dim = ansatz.n_params, 2**ansatz.n_qubits
    shifts = np.concatenate([np.eye(P), -np.eye(P)]) * (np.pi / 2)
    thetas = np.repeat(theta[None, :] + shifts, dim, axis=0)
    eye = np.tile(np.eye(dim, dtype=complex), (2 * P, 1))
    cols = real_amplitudes_batch(eye, thetas, ansatz).reshape(2 * P, dim, dim)
    return np.transpose(cols, (0, 2, 1)).reshape(2, P, dim, dim)


def vqc_loss_and_grad(model: VqcModel, states: np.ndarray, labels: np.ndarray):
    """Cross-entropy over prepared feature states and its parameter-shift gradient."""
    readout = model.readout()
    U = real_amplitudes_unitary(model.theta, model.ansatz)
    probs = _class_probs(states, U, readout)
    loss, g_probs = cross_entropy_loss(probs, labels)
    Us = shifted_unitaries(model.theta, model.ansatz)
    out = np.einsum("spij,bj->spbi", Us, states)
    p_shift = (out.real**2 + out.imag**2) @ readout  # (2, P, B, C)
    dprobs = 0.5 * (p_shift[0] - p_shift[1])
    grad = np.einsum("pbc,bc->p", dprobs, g_probs)
    return loss, grad


@dataclass
class VqcHistory:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)


def vqc_train(
    model: VqcModel,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray | None = None,
    y_test: np.ndarray | None = None,
    *,
    epochs: int = 100,
    optimizer: str = "adam",
    lr: float = 0.05,
    batch_size: int = 0,
    seed: int = 0,
) -> VqcHistory:
    """Train ``theta`` by ADAM on parameter-shift gradients of the cross-entropy.

    ``batch_size <= 0`` means one full-batch step per epoch.
    """
    y_train = np.asarray(y_train, dtype=int)
    if y_train.min() < 0 or y_train.max() >= model.n_classes:
        raise ValueError(f"labels must lie in [0, {model.n_classes})")
    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer, lr)
    states = zz_feature_map_batch(np.atleast_2d(X_train), model.feature_map)
    hist = VqcHistory()
    for epoch in range(epochs):
        losses = []
        for idx in minibatches(len(y_train), batch_size, rng):
            loss, grad = vqc_loss_and_grad(model, states[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergence(f"non-finite VQC loss at epoch {epoch}")
            optimizer_step(opt, [model.theta], [grad])
            losses.append(loss * len(idx))
        hist.loss.append(float(sum(losses) / len(y_train)))
        hist.train_accuracy.append(vqc_evaluate(model, X_train, y_train))
        if X_test is not None:
            hist.test_accuracy.append(vqc_evaluate(model, X_test, y_test))
    return hist

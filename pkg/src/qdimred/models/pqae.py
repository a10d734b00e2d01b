"""PCA-embedded quantum autoencoder.

A linear encoder reduces each sample to ``n_q`` angles, the ZZ feature map
turns a batch of those into a fidelity kernel, kernel PCA keeps ``n_d``
components per sample and a linear decoder reconstructs the input.  The
kernel/KPCA block is differentiated by central finite differences over the
whole ``M x n_q`` encoded batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..kernels import (
    center_kernel,
    check_kernel,
    feature_states,
    gram_from_states,
    kpca_project,
    kpca_project_stack,
)
from ..nn import (
    BRIDGE_STEP,
    LayerStack,
    OptimizerState,
    make_optimizer,
    mse_loss,
    optimizer_step,
    stack_backward,
    stack_forward,
)
from ..qsim import FeatureMapSpec
from .autoencoders import TrainingDivergence

log = logging.getLogger(__name__)


class KernelInvariantError(RuntimeError):
    pass


@dataclass
class PqaeModel:
    encoder: LayerStack
    decoder: LayerStack
    feature_map: FeatureMapSpec
    n_d: int
    batch_size: int = 32
    center: bool = True

    def __post_init__(self):
        n_q = self.feature_map.n_qubits
        if self.encoder.out_dim != n_q:
            raise ValueError(f"encoder must output {n_q} angles, got {self.encoder.out_dim}")
        if self.decoder.in_dim != self.n_d:
            raise ValueError(f"decoder must take {self.n_d} components, got {self.decoder.in_dim}")
        if self.encoder.in_dim != self.decoder.out_dim:
            raise ValueError("encoder input and decoder output widths differ")
        if self.n_d < n_q:
            raise ValueError(f"n_d={self.n_d} must be >= n_q={n_q}")
        if self.n_d > self.batch_size:
            raise ValueError(f"n_d={self.n_d} exceeds batch size M={self.batch_size}")
        if self.n_d >= self.encoder.in_dim:
            log.info("n_d=%d is not below the input width N=%d", self.n_d, self.encoder.in_dim)

    @classmethod
    def init(cls, n_features: int, feature_map: FeatureMapSpec, n_d: int,
             rng: np.random.Generator, *, batch_size: int = 32, center: bool = True,
             encoder_widths=(), decoder_widths=()) -> "PqaeModel":
        """Random single-layer stacks unless hidden widths are given."""
        enc = LayerStack.init([n_features, *encoder_widths, feature_map.n_qubits], rng)
        dec = LayerStack.init([n_d, *decoder_widths, n_features], rng)
        return cls(enc, dec, feature_map, n_d, batch_size, center)

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.decoder.params()


def kernel_kpca_map(Z: np.ndarray, feature_map: FeatureMapSpec, n_d: int, center: bool = True,
                    check: bool = False) -> np.ndarray:
    """Encoded batch (M, n_q) -> per-sample kernel principal components (M, n_d)."""
    K = gram_from_states(feature_states(Z, feature_map))
    if check:
        try:
            check_kernel(K)
        except ValueError as exc:
            raise KernelInvariantError(str(exc)) from exc
    return kpca_project(K, n_d, center).projections


def kernel_kpca_vjp(Z: np.ndarray, g_proj: np.ndarray, feature_map: FeatureMapSpec, n_d: int,
                    center: bool = True, h: float = BRIDGE_STEP) -> np.ndarray:
    """Central-difference vector-Jacobian product through :func:`kernel_kpca_map`.

    Perturbing coordinate ``(i, k)`` only changes state ``i``, so each shifted
    kernel differs from the base one in row and column ``i``; all ``2 M n_q``
    shifted kernels are built and diagonalized as one stack.
    """
    M, n_q = Z.shape
    states = feature_states(Z, feature_map)
    K = gram_from_states(states)
    base = kpca_project(K, n_d, center).eigenvectors

    steps = h * np.eye(n_q)
    shifted = np.concatenate([
        (Z[:, None, :] + steps[None]).reshape(M * n_q, n_q),
        (Z[:, None, :] - steps[None]).reshape(M * n_q, n_q),
    ])
    s_shift = feature_states(shifted, feature_map)
    ov = s_shift.conj() @ states.T
    rows = ov.real**2 + ov.imag**2  # (2 M n_q, M)
    self_ov = np.sum(s_shift.real**2 + s_shift.imag**2, axis=1) ** 2

    owner = np.tile(np.repeat(np.arange(M), n_q), 2)
    S = len(shifted)
    Ks = np.repeat(K[None], S, axis=0)
    Ks[np.arange(S), owner, :] = rows
    Ks[np.arange(S), :, owner] = rows
    Ks[np.arange(S), owner, owner] = self_ov

    P = kpca_project_stack(Ks, n_d, center, reference=base)
    dP = (P[: M * n_q] - P[M * n_q:]) / (2.0 * h)  # (M n_q, M, n_d)
    return np.einsum("smd,md->s", dP, g_proj).reshape(M, n_q)


def pqae_forward(model: PqaeModel, X: np.ndarray, check: bool = False):
    """Batch reconstruction; returns (X_rec, projections, caches)."""
    Z, enc_cache = stack_forward(model.encoder, np.atleast_2d(X))
    P = kernel_kpca_map(Z, model.feature_map, model.n_d, model.center, check=check)
    X_rec, dec_cache = stack_forward(model.decoder, P)
    return X_rec, P, (Z, enc_cache, dec_cache)


def pqae_loss_and_grads(model: PqaeModel, X: np.ndarray, check: bool = True):
    X = np.atleast_2d(X)
    X_rec, _, (Z, enc_cache, dec_cache) = pqae_forward(model, X, check=check)
    loss, g = mse_loss(X, X_rec)
    dec_grads, gP = stack_backward(model.decoder, dec_cache, g)
    gZ = kernel_kpca_vjp(Z, gP, model.feature_map, model.n_d, model.center)
    enc_grads, _ = stack_backward(model.encoder, enc_cache, gZ)
    return loss, enc_grads + dec_grads


def make_batches(n: int, M: int, n_d: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled batches of size ``M``; a trailing batch smaller than ``2 n_d`` joins the previous one."""
    order = rng.permutation(n)
    batches = [order[i:i + M] for i in range(0, n, M)]
    if len(batches) > 1 and len(batches[-1]) < 2 * n_d:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    if len(batches[0]) < 2:
        raise ValueError("PQAE training needs at least two samples per batch")
    return batches


def pqae_train_epoch(model: PqaeModel, X: np.ndarray, opt: OptimizerState,
                     rng: np.random.Generator) -> float:
    """One pass over shuffled batches; returns the mean batch MSE."""
    params = model.params()
    losses = []
    for idx in make_batches(len(X), model.batch_size, model.n_d, rng):
        loss, grads = pqae_loss_and_grads(model, X[idx])
        if not np.isfinite(loss):
            raise TrainingDivergence("non-finite PQAE batch loss")
        optimizer_step(opt, params, grads)
        losses.append(loss)
    return float(np.mean(losses))


@dataclass
class PqaeHistory:
    train_mse: list[float] = field(default_factory=list)


def pqae_train(model: PqaeModel, X_train: np.ndarray, *, epochs: int = 50,
               optimizer: str = "adam", lr: float = 1e-2, seed: int = 0) -> PqaeHistory:
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer, lr)
    hist = PqaeHistory()
    for _ in range(epochs):
        hist.train_mse.append(pqae_train_epoch(model, X_train, opt, rng))
    return hist


def pqae_encode(model: PqaeModel, X: np.ndarray) -> np.ndarray:
    """The trained encoder alone: angles for the downstream classifier's feature map."""
    return stack_forward(model.encoder, np.asarray(X, dtype=float))[0]

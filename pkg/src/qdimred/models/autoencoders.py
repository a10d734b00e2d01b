"""Linear, quantum-inspired (SU(n) and Bloch) and polynomial autoencoders."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import liealg
from ..nn import LayerStack, make_optimizer, mse_loss, optimizer_step, stack_backward, stack_forward

log = logging.getLogger(__name__)

AE_KINDS = ("linear", "qae", "bloch_qae", "poly")


class TrainingDivergence(RuntimeError):
    """Raised when a training loss becomes non-finite."""


# ---------------------------------------------------------------------------
# bottleneck maps


class IdentityMap:
    kind = "linear"

    def __init__(self, width: int):
        self.in_dim = self.out_dim = width

    def forward(self, Z):
        return Z, None

    def backward(self, cache, g):
        return g

    def to_dict(self):
        return {"kind": self.kind, "width": self.in_dim}


class SUnMap:
    """Split the input into ``m`` chunks and push each through exp(-i sum z_j g_j)."""

    kind = "qae"

    def __init__(self, n: int = 2, m: int = 1, selection: Sequence[int] | None = None,
                 mode: liealg.ExtractionMode = "first_column"):
        self.basis = liealg.gellmann_generators(n)
        if selection is None:
            selection = range(n * n - 1)
        self.selection = [int(s) for s in selection]
        if not self.selection or len(self.selection) > n * n - 1:
            raise ValueError(f"selection must hold 1..{n * n - 1} generator indices")
        if len(set(self.selection)) != len(self.selection):
            raise ValueError("duplicate generator indices in selection")
        if mode not in ("first_column", "row_average"):
            raise ValueError(f"unknown extraction mode {mode!r}")
        self.n, self.m, self.mode = n, m, mode
        self.chunk = len(self.selection)
        self.in_dim = m * self.chunk
        self.out_dim = m * 2 * n

    def _chunks(self, Z):
        if Z.shape[1] != self.in_dim:
            raise ValueError(
                f"bottleneck expects {self.m} chunks of {self.chunk} values ({self.in_dim}), "
                f"got width {Z.shape[1]}"
            )
        return Z.reshape(Z.shape[0] * self.m, self.chunk)

    def forward(self, Z):
        flat = self._chunks(Z)
        feats = liealg.su_features_batch(flat, self.basis, self.selection, self.mode)
        return feats.reshape(Z.shape[0], self.out_dim), Z

    def backward(self, Z, g):
        flat = self._chunks(Z)
        jac = liealg.su_exponential_jacobian_batch(flat, self.basis, self.selection, self.mode)
        g_chunks = g.reshape(Z.shape[0] * self.m, 2 * self.n)
        return np.einsum("bf,bfj->bj", g_chunks, jac).reshape(Z.shape)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "m": self.m,
                "selection": self.selection, "mode": self.mode}


class BlochMap:
    kind = "bloch_qae"
    in_dim, out_dim = 2, 3

    def forward(self, Z):
        feats, jac = liealg.bloch_encode_batch(Z)
        return feats, jac

    def backward(self, jac, g):
        return np.einsum("bf,bfj->bj", g, jac)

    def to_dict(self):
        return {"kind": self.kind}


def poly_features(Z: np.ndarray):
    """{x1,x2} -> {x1^2, x2^2, x1 x2};  {x1,x2,x3} -> {x1^2, x2^2, x3^2, x1x2+x1x3+x2x3}.

    Returns features and their Jacobian, shapes (B, F) and (B, F, w).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    B, w = Z.shape
    if w == 2:
        x1, x2 = Z.T
        feats = np.stack([x1**2, x2**2, x1 * x2], axis=1)
        jac = np.zeros((B, 3, 2))
        jac[:, 0, 0] = 2 * x1
        jac[:, 1, 1] = 2 * x2
        jac[:, 2, 0] = x2
        jac[:, 2, 1] = x1
    elif w == 3:
        x1, x2, x3 = Z.T
        feats = np.stack([x1**2, x2**2, x3**2, x1 * x2 + x1 * x3 + x2 * x3], axis=1)
        jac = np.zeros((B, 4, 3))
        jac[:, 0, 0] = 2 * x1
        jac[:, 1, 1] = 2 * x2
        jac[:, 2, 2] = 2 * x3
        jac[:, 3, 0] = x2 + x3
        jac[:, 3, 1] = x1 + x3
        jac[:, 3, 2] = x1 + x2
    else:
        raise ValueError(f"polynomial map supports widths 2 and 3, got {w}")
    return feats, jac


class PolyMap:
    kind = "poly"

    def __init__(self, width: int = 3, m: int = 1):
        if width not in (2, 3):
            raise ValueError(f"polynomial map supports widths 2 and 3, got {width}")
        self.width, self.m = width, m
        self.in_dim = m * width
        self.out_dim = m * (width + 1)

    def forward(self, Z):
        if Z.shape[1] != self.in_dim:
            raise ValueError(f"polynomial map expects width {self.in_dim}, got {Z.shape[1]}")
        feats, jac = poly_features(Z.reshape(-1, self.width))
        return feats.reshape(Z.shape[0], self.out_dim), jac

    def backward(self, jac, g):
        gz = np.einsum("bf,bfj->bj", g.reshape(jac.shape[0], -1), jac)
        return gz.reshape(g.shape[0], self.in_dim)

    def to_dict(self):
        return {"kind": self.kind, "width": self.width, "m": self.m}


def bottleneck_from_dict(d: dict):
    kind = d["kind"]
    if kind == "linear":
        return IdentityMap(d["width"])
    if kind == "qae":
        return SUnMap(d["n"], d["m"], d["selection"], d["mode"])
    if kind == "bloch_qae":
        return BlochMap()
    if kind == "poly":
        return PolyMap(d["width"], d["m"])
    raise ValueError(f"unknown bottleneck kind {kind!r}")


# ---------------------------------------------------------------------------
# model


@dataclass
class Autoencoder:
    encoder: LayerStack
    bottleneck: object
    decoder: LayerStack

    def __post_init__(self):
        if self.encoder.out_dim != self.bottleneck.in_dim:
            raise ValueError(
                f"encoder output {self.encoder.out_dim} != bottleneck input {self.bottleneck.in_dim}"
            )
        if self.decoder.in_dim != self.bottleneck.out_dim:
            raise ValueError(
                f"decoder input {self.decoder.in_dim} != bottleneck output {self.bottleneck.out_dim}"
            )

    @property
    def kind(self) -> str:
        return self.bottleneck.kind

    @property
    def latent_dim(self) -> int:
        """Narrowest hidden width, counting the layer after the feature map."""
        return min(self.encoder.widths[1:] + self.decoder.widths[:-1])

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.decoder.params()

    def forward(self, X):
        Z, enc_cache = stack_forward(self.encoder, np.atleast_2d(X))
        F, map_cache = self.bottleneck.forward(Z)
        X_rec, dec_cache = stack_forward(self.decoder, F)
        return X_rec, F, (enc_cache, map_cache, dec_cache)

    def reconstruct(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def loss_and_grads(self, X):
        X = np.atleast_2d(X)
        X_rec, _, (enc_cache, map_cache, dec_cache) = self.forward(X)
        loss, g = mse_loss(X, X_rec)
        dec_grads, gF = stack_backward(self.decoder, dec_cache, g)
        gZ = self.bottleneck.backward(map_cache, gF)
        enc_grads, _ = stack_backward(self.encoder, enc_cache, gZ)
        return loss, enc_grads + dec_grads

    def mse(self, X) -> float:
        return mse_loss(np.atleast_2d(X), self.reconstruct(X))[0]


def build_autoencoder(
    kind: str,
    n_features: int,
    rng: np.random.Generator,
    *,
    latent: int = 3,
    n: int = 2,
    m: int = 1,
    selection: Sequence[int] | None = None,
    mode: liealg.ExtractionMode = "first_column",
    poly_width: int = 3,
    post_width: int | None = None,
) -> Autoencoder:
    """Assemble an autoencoder with single-layer encoder and decoder.

    For ``kind="linear"``, ``post_width`` inserts a hidden linear layer of that
    width after the latent layer, mirroring a feature-map architecture.
    """
    if kind == "linear":
        bottleneck = IdentityMap(latent)
        dec_widths = [latent] + ([post_width] if post_width else []) + [n_features]
    elif kind == "qae":
        bottleneck = SUnMap(n=n, m=m, selection=selection, mode=mode)
        dec_widths = [bottleneck.out_dim, n_features]
    elif kind == "bloch_qae":
        bottleneck = BlochMap()
        dec_widths = [3, n_features]
    elif kind == "poly":
        bottleneck = PolyMap(poly_width, m)
        dec_widths = [bottleneck.out_dim, n_features]
    else:
        raise ValueError(f"unknown autoencoder kind {kind!r}; expected one of {AE_KINDS}")
    encoder = LayerStack.init([n_features, bottleneck.in_dim], rng)
    decoder = LayerStack.init(dec_widths, rng)
    return Autoencoder(encoder, bottleneck, decoder)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainingHistory:
    train_mse: list[float] = field(default_factory=list)
    test_mse: list[float] = field(default_factory=list)
    skipped_steps: int = 0


def default_optimizer(kind: str) -> str:
    return "rmsprop" if kind in ("qae", "bloch_qae") else "adam"


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    if batch_size <= 0 or batch_size >= n:
        return [order]
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def ae_train(
    model: Autoencoder,
    X_train: np.ndarray,
    X_test: np.ndarray | None = None,
    *,
    epochs: int = 1000,
    optimizer: str | None = None,
    lr: float = 1e-3,
    batch_size: int = 16,
    seed: int = 0,
) -> TrainingHistory:
    """Minimize reconstruction MSE with minibatch ADAM/RMSprop."""
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    if X_train.shape[1] != model.encoder.in_dim:
        raise ValueError(f"data width {X_train.shape[1]} != model input {model.encoder.in_dim}")
    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer or default_optimizer(model.kind), lr)
    params = model.params()
    hist = TrainingHistory()
    for epoch in range(epochs):
        for idx in minibatches(len(X_train), batch_size, rng):
            loss, grads = model.loss_and_grads(X_train[idx])
            if not np.isfinite(loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}")
            if not optimizer_step(opt, params, grads):
                hist.skipped_steps += 1
        train = model.mse(X_train)
        if not np.isfinite(train):
            raise TrainingDivergence(f"non-finite training MSE after epoch {epoch}")
        hist.train_mse.append(train)
        if X_test is not None:
            hist.test_mse.append(model.mse(X_test))
    return hist

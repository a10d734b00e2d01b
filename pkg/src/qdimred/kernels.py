"""Quantum fidelity kernels, kernel PCA and covariance PCA."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .qsim import FeatureMapSpec, zz_feature_map_batch

SYMMETRY_TOL = 1e-10


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("QDIMRED_THREADS", "1")))
    except ValueError:
        return 1


def symmetric_eigendecomposition(A: np.ndarray):
    """Eigenpairs of a real symmetric or complex Hermitian matrix, largest first.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.conj().T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric/Hermitian")
    evals, evecs = np.linalg.eigh(A)
    return evals[::-1], evecs[:, ::-1]


# ---------------------------------------------------------------------------
# quantum kernel


def feature_states(Z: np.ndarray, spec: FeatureMapSpec) -> np.ndarray:
    """Feature-map states for each row, optionally split across threads."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    workers = thread_count()
    if workers == 1 or len(Z) < 2 * workers:
        return zz_feature_map_batch(Z, spec)
    chunks = np.array_split(Z, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: zz_feature_map_batch(c, spec), chunks))
    return np.concatenate(parts, axis=0)


def gram_from_states(states: np.ndarray) -> np.ndarray:
    """|<s_i|s_j>|^2, filled from the upper triangle so the result is exactly symmetric."""
    overlaps = states.conj() @ states.T
    K = overlaps.real**2 + overlaps.imag**2
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def quantum_kernel_matrix(Z: np.ndarray, spec: FeatureMapSpec) -> np.ndarray:
    """M x M fidelity kernel of the ZZ feature map evaluated on the rows of ``Z``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] < 1:
        raise ValueError("kernel needs at least one sample")
    if Z.shape[1] != spec.n_qubits:
        raise ValueError(f"rows must have width {spec.n_qubits}, got {Z.shape[1]}")
    return gram_from_states(feature_states(Z, spec))


def check_kernel(K: np.ndarray, diag_tol: float = 1e-10, psd_tol: float = 1e-8) -> None:
    """Raise ``ValueError`` unless ``K`` is symmetric, unit-diagonal and PSD."""
    if not np.array_equal(K, K.T):
        raise ValueError("kernel matrix is not symmetric")
    if np.max(np.abs(np.diag(K) - 1.0)) > diag_tol:
        raise ValueError("kernel matrix diagonal deviates from 1")
    if np.linalg.eigvalsh(K)[0] < -psd_tol:
        raise ValueError("kernel matrix has a negative eigenvalue")


def center_kernel(K: np.ndarray) -> np.ndarray:
    """Double-center ``K`` (also works on a stack of kernels)."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=-1, keepdims=True)
    col = K.mean(axis=-2, keepdims=True)
    total = K.mean(axis=(-2, -1), keepdims=True)
    return K - row - col + total


# ---------------------------------------------------------------------------
# kernel PCA


@dataclass
class KpcaProjection:
    n_d: int
    eigenvalues: np.ndarray  # (n_d,) descending
    eigenvectors: np.ndarray  # (M, n_d), orthonormal columns
    projections: np.ndarray  # (M, n_d)


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    """Flip each eigenvector so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=-2)
    picked = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    signs = np.where(picked < 0, -1.0, 1.0)
    return vecs * signs


def _top_eigenpairs(K: np.ndarray, n_d: int):
    evals, evecs = np.linalg.eigh(K)
    evals = evals[..., ::-1][..., :n_d]
    evecs = evecs[..., ::-1][..., :n_d]
    return evals, evecs


def kpca_project(K: np.ndarray, n_d: int, center: bool = True) -> KpcaProjection:
    """Top ``n_d`` kernel principal components of the batch behind ``K``.

    Sample ``i`` receives ``a_l[i] * sqrt(max(alpha_l, 0))`` for each retained
    eigenpair ``(alpha_l, a_l)``.
    """
    K = np.asarray(K, dtype=float)
    M = K.shape[0]
    if not 1 <= n_d <= M:
        raise ValueError(f"n_d must lie in [1, {M}], got {n_d}")
    Kc = center_kernel(K) if center else K
    evals, evecs = _top_eigenpairs(Kc, n_d)
    evecs = _sign_fix(evecs)
    proj = evecs * np.sqrt(np.maximum(evals, 0.0))
    return KpcaProjection(n_d, evals, evecs, proj)


def kpca_project_stack(
    Ks: np.ndarray, n_d: int, center: bool = True, reference: np.ndarray | None = None
) -> np.ndarray:
    """Projections for a stack of kernels, shape (S, M, n_d).

    With ``reference`` (M, n_d), each eigenvector's sign is aligned to the
    matching reference eigenvector instead of the max-entry rule, which keeps
    finite differences across nearby kernels continuous.
    """
    Kc = center_kernel(Ks) if center else np.asarray(Ks, dtype=float)
    evals, evecs = _top_eigenpairs(Kc, n_d)
    if reference is None:
        evecs = _sign_fix(evecs)
    else:
        dots = np.einsum("smd,md->sd", evecs, reference)
        evecs = evecs * np.where(dots < 0, -1.0, 1.0)[:, None, :]
    return evecs * np.sqrt(np.maximum(evals, 0.0))[:, None, :]


# ---------------------------------------------------------------------------
# covariance PCA


@dataclass
class PcaModel:
    mean: np.ndarray  # (N,)
    components: np.ndarray  # (k, N), orthonormal rows
    explained_variances: np.ndarray  # (k,)

    @property
    def n_components(self) -> int:
        return len(self.explained_variances)


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, N = X.shape
    if n == 0:
        raise ValueError("PCA needs at least one sample")
    if not 1 <= k <= min(n, N):
        raise ValueError(f"k must lie in [1, {min(n, N)}], got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    C = Xc.T @ Xc / n
    C = (C + C.T) / 2
    evals, evecs = symmetric_eigendecomposition(C)
    comps = _sign_fix(evecs[:, :k]).T
    return PcaModel(mean, comps, np.maximum(evals[:k], 0.0))


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"expected width {model.mean.shape[0]}, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, T: np.ndarray) -> np.ndarray:
    return np.atleast_2d(T) @ model.components + model.mean

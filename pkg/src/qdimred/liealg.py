"""Gell-Mann bases, SU(n) exponential maps and the Bloch encoding.

Generators carry no 1/2 factor: for ``n = 2`` the basis is exactly
``(sigma_x, sigma_y, sigma_z)`` and ``tr(g_i g_j) = 2 delta_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

ExtractionMode = Literal["first_column", "row_average"]

FD_STEP = 1e-5


@dataclass(frozen=True)
class GeneratorBasis:
    n: int
    generators: np.ndarray = field(repr=False)  # (n*n - 1, n, n)

    def __len__(self):
        return len(self.generators)


@dataclass(frozen=True)
class UnitaryFeatureMap:
    n: int
    U: np.ndarray
    z: np.ndarray
    features: np.ndarray


def gellmann_generators(n: int) -> GeneratorBasis:
    """Generalized Gell-Mann matrices of dimension ``n``.

    Order: symmetric off-diagonal pairs ``(j, k)`` with ``j < k`` in
    lexicographic order, then the antisymmetric pairs in the same order, then
    the ``n - 1`` diagonal matrices.
    """
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    gens = []
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = g[k, j] = 1.0
        gens.append(g)
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = -1j
        g[k, j] = 1j
        gens.append(g)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        gens.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * d).astype(complex))
    return GeneratorBasis(n, np.array(gens))


def _check_selection(z_len: int, basis: GeneratorBasis, selection: Sequence[int]):
    if z_len > len(basis):
        raise ValueError(f"at most {len(basis)} parameters for SU({basis.n}), got {z_len}")
    selection = np.asarray(selection, dtype=int)
    if selection.ndim != 1 or len(selection) != z_len:
        raise ValueError(
            f"selection has {len(selection)} entries but z has length {z_len}"
        )
    if len(set(selection.tolist())) != len(selection):
        raise ValueError(f"duplicate generator indices in selection {selection.tolist()}")
    if len(selection) and (selection.min() < 0 or selection.max() >= len(basis)):
        raise IndexError(f"selection {selection.tolist()} out of range for {len(basis)} generators")
    return selection


def hermitian_sum(Z: np.ndarray, basis: GeneratorBasis, selection) -> np.ndarray:
    """sum_j z_j g_{selection_j} for each row of ``Z``; shape (B, n, n)."""
    return np.einsum("bj,jkl->bkl", Z, basis.generators[np.asarray(selection)])


def su_exponential_batch(Z: np.ndarray, basis: GeneratorBasis, selection) -> np.ndarray:
    """exp(-i sum_j z_j g_j) for every row of ``Z`` via Hermitian eigendecomposition."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    selection = _check_selection(Z.shape[1], basis, selection)
    H = hermitian_sum(Z, basis, selection)
    evals, evecs = np.linalg.eigh(H)
    phases = np.exp(-1j * evals)
    return np.einsum("bij,bj,bkj->bik", evecs, phases, evecs.conj())


def extract_features_batch(U: np.ndarray, mode: ExtractionMode = "first_column") -> np.ndarray:
    """Real features of each matrix in a (B, n, n) stack; shape (B, 2n)."""
    if mode == "first_column":
        vals = U[:, :, 0]
    elif mode == "row_average":
        vals = U.mean(axis=2)
    else:
        raise ValueError(f"unknown extraction mode {mode!r}")
    out = np.empty((U.shape[0], 2 * U.shape[1]))
    out[:, 0::2] = vals.real
    out[:, 1::2] = vals.imag
    return out


def su_exponential(z: Sequence[float], basis: GeneratorBasis, selection=None) -> UnitaryFeatureMap:
    z = np.asarray(z, dtype=float)
    if selection is None:
        selection = range(len(z))
    U = su_exponential_batch(z[None, :], basis, list(selection))[0]
    feats = extract_features_batch(U[None], "first_column")[0]
    return UnitaryFeatureMap(basis.n, U, z, feats)


def extract_features(fmap: UnitaryFeatureMap, mode: ExtractionMode = "first_column") -> np.ndarray:
    """``first_column``: (Re U00, Im U00, Re U10, Im U10, ...).

    ``row_average`` returns plain row means, interleaved the same way; those are
    not unit-norm.
    """
    return extract_features_batch(fmap.U[None], mode)[0]


# ---------------------------------------------------------------------------
# SU(2) closed form


def _sinc_terms(theta: np.ndarray):
    """sin(t)/t and (t cos t - sin t)/t^3, with series near zero."""
    small = theta < 1e-4
    t = np.where(small, 1.0, theta)
    s = np.where(small, 1.0 - theta**2 / 6.0, np.sin(t) / t)
    d = np.where(small, -1.0 / 3.0 + theta**2 / 30.0, (t * np.cos(t) - np.sin(t)) / t**3)
    return s, d


def su2_quaternion(Z3: np.ndarray):
    """Quaternion q with exp(-i z.sigma) = q0 I - i (q1 sx + q2 sy + q3 sz).

    Returns ``q`` of shape (B, 4) and its Jacobian ``dq/dz`` of shape (B, 4, 3).
    """
    theta = np.linalg.norm(Z3, axis=1)
    s, d = _sinc_terms(theta)
    q = np.empty((Z3.shape[0], 4))
    q[:, 0] = np.cos(theta)
    q[:, 1:] = s[:, None] * Z3
    jac = np.empty((Z3.shape[0], 4, 3))
    jac[:, 0, :] = -s[:, None] * Z3
    jac[:, 1:, :] = s[:, None, None] * np.eye(3) + d[:, None, None] * np.einsum(
        "bi,bj->bij", Z3, Z3
    )
    return q, jac


@lru_cache(maxsize=None)
def _su2_extraction_matrix(mode: ExtractionMode) -> np.ndarray:
    """Features are linear in q: features = A @ q."""
    paulis = gellmann_generators(2).generators
    units = np.array([np.eye(2, dtype=complex)] + [-1j * p for p in paulis])
    A = extract_features_batch(units, mode).T  # (4, 4)
    A.setflags(write=False)
    return A


def _embed_su2(Z: np.ndarray, selection) -> np.ndarray:
    Z3 = np.zeros((Z.shape[0], 3))
    Z3[:, np.asarray(selection)] = Z
    return Z3


def su_features_batch(
    Z: np.ndarray, basis: GeneratorBasis, selection, mode: ExtractionMode = "first_column"
) -> np.ndarray:
    """Extracted features of exp(-i sum z_j g_j) for each row of ``Z``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    selection = _check_selection(Z.shape[1], basis, selection)
    if basis.n == 2:
        q, _ = su2_quaternion(_embed_su2(Z, selection))
        return q @ _su2_extraction_matrix(mode).T
    return extract_features_batch(su_exponential_batch(Z, basis, selection), mode)


def su_exponential_jacobian_batch(
    Z: np.ndarray, basis: GeneratorBasis, selection, mode: ExtractionMode = "first_column"
) -> np.ndarray:
    """d(features)/dz for each row of ``Z``; shape (B, 2n, L).

    Closed form for SU(2); central differences with step 1e-5 otherwise.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    selection = _check_selection(Z.shape[1], basis, selection)
    if basis.n == 2:
        _, dq = su2_quaternion(_embed_su2(Z, selection))
        return np.einsum("fq,bqj->bfj", _su2_extraction_matrix(mode), dq[:, :, selection])
    B, L = Z.shape
    steps = FD_STEP * np.eye(L)
    plus = (Z[:, None, :] + steps[None]).reshape(B * L, L)
    minus = (Z[:, None, :] - steps[None]).reshape(B * L, L)
    fp = su_features_batch(plus, basis, selection, mode).reshape(B, L, -1)
    fm = su_features_batch(minus, basis, selection, mode).reshape(B, L, -1)
    return np.transpose((fp - fm) / (2.0 * FD_STEP), (0, 2, 1))


def su_exponential_jacobian(
    z: Sequence[float], basis: GeneratorBasis, selection=None, mode: ExtractionMode = "first_column"
) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if selection is None:
        selection = list(range(len(z)))
    return su_exponential_jacobian_batch(z[None, :], basis, selection, mode)[0]


# ---------------------------------------------------------------------------
# Bloch encoding


def bloch_encode_batch(angles: np.ndarray):
    """Map rows (theta, phi) to (cos t/2, sin t/2 cos p, sin t/2 sin p).

    Returns the (B, 3) features and their (B, 3, 2) Jacobian.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    if angles.shape[1] != 2:
        raise ValueError(f"Bloch encoding takes 2 angles per row, got {angles.shape[1]}")
    if not np.all(np.isfinite(angles)):
        raise ValueError("Bloch encoding received non-finite angles")
    th, ph = angles[:, 0], angles[:, 1]
    ch, sh = np.cos(th / 2), np.sin(th / 2)
    cp, sp = np.cos(ph), np.sin(ph)
    feats = np.stack([ch, sh * cp, sh * sp], axis=1)
    jac = np.zeros((len(th), 3, 2))
    jac[:, 0, 0] = -0.5 * sh
    jac[:, 1, 0] = 0.5 * ch * cp
    jac[:, 2, 0] = 0.5 * ch * sp
    jac[:, 1, 1] = -sh * sp
    jac[:, 2, 1] = sh * cp
    return feats, jac


def bloch_encode(theta: float, phi: float) -> np.ndarray:
    return bloch_encode_batch(np.array([[theta, phi]]))[0][0]

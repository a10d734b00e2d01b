"""Independent reference implementations used only by the tests.

Everything here is written from textbook definitions with dense matrices and
explicit loops, sharing no code with the package.
"""

import math

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def ry(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(a):
    return np.array([[np.exp(-0.5j * a), 0], [0, np.exp(0.5j * a)]], dtype=complex)


def embed(gate, qubit, n):
    """Full 2^n matrix; the rightmost Kronecker factor is qubit 0."""
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, gate if q == qubit else I2)
    return out


def cx(control, target, n):
    return embed(P0, control, n) + embed(P1, control, n) @ embed(X, target, n)


def zero_state(n):
    v = np.zeros(2**n, dtype=complex)
    v[0] = 1
    return v


def pairs(n, entanglement="full"):
    if entanglement == "full":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [(i, i + 1) for i in range(n - 1)]


def zz_unitary(x, reps, entanglement="full"):
    n = len(x)
    U = np.eye(2**n, dtype=complex)
    for _ in range(reps):
        for q in range(n):
            U = embed(H, q, n) @ U
        for q in range(n):
            U = embed(rz(2 * x[q]), q, n) @ U
        for i, j in pairs(n, entanglement):
            U = cx(i, j, n) @ U
            U = embed(rz(2 * (math.pi - x[i]) * (math.pi - x[j])), j, n) @ U
            U = cx(i, j, n) @ U
    return U


def real_amplitudes_unitary(theta, n, reps, entanglement="full"):
    U = np.eye(2**n, dtype=complex)
    for layer in range(reps + 1):
        for q in range(n):
            U = embed(ry(theta[layer * n + q]), q, n) @ U
        if layer < reps:
            for i, j in pairs(n, entanglement):
                U = cx(i, j, n) @ U
    return U


def fidelity(a, b):
    s = 0j
    for ak, bk in zip(a, b):
        s += np.conj(ak) * bk
    return abs(s) ** 2


def kernel(Z, reps=2):
    states = [zz_unitary(z, reps) @ zero_state(len(z)) for z in Z]
    M = len(states)
    return np.array([[fidelity(states[i], states[j]) for j in range(M)] for i in range(M)])


def center(K):
    """Four-term formula, element by element."""
    M = len(K)
    row = K.mean(axis=1)
    col = K.mean(axis=0)
    tot = K.mean()
    return np.array([[K[i, j] - row[i] - col[j] + tot for j in range(M)] for i in range(M)])


def expm_taylor(A, terms=50):
    out = np.eye(len(A), dtype=complex)
    term = np.eye(len(A), dtype=complex)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def gellmann(n):
    """Symmetric pairs, antisymmetric pairs, then diagonals; no 1/2 factor."""
    sym, anti, diag = [], [], []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[j, k] = s[k, j] = 1
            sym.append(s)
            a = np.zeros((n, n), dtype=complex)
            a[j, k] = -1j
            a[k, j] = 1j
            anti.append(a)
    for l in range(1, n):
        d = np.zeros((n, n), dtype=complex)
        for i in range(l):
            d[i, i] = 1
        d[l, l] = -l
        diag.append(d * math.sqrt(2 / (l * (l + 1))))
    return sym + anti + diag


def central_diff(f, x, h):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))).ravel() / (2 * h))
    return np.stack(cols, axis=-1)

"""Tensor-leg bookkeeping shared by the state, circuit and test modules.

Vectors live on an ordered list of registers; a vector of overall dimension
prod(dims) is reshaped to one tensor leg per register.  Matrices carry one
ket leg and one bra leg per register.
"""

from __future__ import annotations

import math

import numpy as np


def kron_all(mats) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def permute_vector(vec: np.ndarray, dims, perm) -> np.ndarray:
    """Reorder registers of a vector: new register i is old register perm[i]."""
    t = vec.reshape(tuple(dims))
    return np.transpose(t, perm).reshape(-1)


def permute_matrix(mat: np.ndarray, dims, perm) -> np.ndarray:
    """Reorder registers of a matrix on both ket and bra legs."""
    n = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    axes = list(perm) + [p + n for p in perm]
    d = mat.shape[0]
    return np.transpose(t, axes).reshape(d, d)


def apply_to_vector(op: np.ndarray, vec: np.ndarray, dims, axes) -> np.ndarray:
    """Apply `op` (matrix on the product of dims[axes]) to the given legs."""
    n = len(dims)
    axes = list(axes)
    t = vec.reshape(tuple(dims))
    rest = [a for a in range(n) if a not in axes]
    t = np.transpose(t, axes + rest)
    block = math.prod(dims[a] for a in axes)
    t = op @ t.reshape(block, -1)
    t = t.reshape([dims[a] for a in axes] + [dims[a] for a in rest])
    inv = np.argsort(axes + rest)
    return np.transpose(t, inv).reshape(-1)


def apply_to_matrix(op: np.ndarray, mat: np.ndarray, dims, axes) -> np.ndarray:
    """Conjugate a matrix by `op` acting on the given registers: op @ M @ op†."""
    d = mat.shape[0]
    cols = apply_to_vector_batch(op, mat, dims, axes)
    rows = apply_to_vector_batch(op.conj(), cols.T, dims, axes)
    return rows.T.reshape(d, d)


def apply_to_vector_batch(op: np.ndarray, batch: np.ndarray, dims, axes) -> np.ndarray:
    """Apply `op` on the given legs of every column of `batch` (dim x k)."""
    n = len(dims)
    axes = list(axes)
    k = batch.shape[1]
    t = batch.reshape(tuple(dims) + (k,))
    rest = [a for a in range(n) if a not in axes]
    t = np.transpose(t, axes + rest + [n])
    block = math.prod(dims[a] for a in axes)
    t = op @ t.reshape(block, -1)
    t = t.reshape([dims[a] for a in axes] + [dims[a] for a in rest] + [k])
    inv = np.argsort(axes + rest + [n])
    return np.transpose(t, inv).reshape(-1, k)


def embed_operator(op: np.ndarray, dims, axes) -> np.ndarray:
    """Full-space matrix acting as `op` on dims[axes] and identity elsewhere."""
    n = len(dims)
    axes = list(axes)
    rest = [a for a in range(n) if a not in axes]
    rest_dim = math.prod(dims[a] for a in rest) if rest else 1
    big = np.kron(op, np.eye(rest_dim))
    order = axes + rest
    inv = list(np.argsort(order))
    reordered = [dims[a] for a in order]
    return permute_matrix(big, reordered, inv)


def partial_trace_matrix(mat: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out every register not in `keep`; result follows `keep`'s order."""
    n = len(dims)
    keep = list(keep)
    drop = [a for a in range(n) if a not in keep]
    t = mat.reshape(tuple(dims) * 2)
    dims = list(dims)
    for a in sorted(drop, reverse=True):
        t = np.trace(t, axis1=a, axis2=a + len(dims))
        dims = [d for i, d in enumerate(dims) if i != a]
    d = math.prod(dims)
    out = t.reshape(d, d)
    order = sorted(keep)
    if order != keep:
        perm = [order.index(k) for k in keep]
        out = permute_matrix(out, dims, perm)
    return out


def permutation_operator(d: int, k: int, perm) -> np.ndarray:
    """Unitary permuting k equal d-dim registers: output slot j holds input slot perm[j]."""
    total = d**k
    idx = np.arange(total)
    digits = [(idx // d ** (k - 1 - j)) % d for j in range(k)]
    new_idx = sum(digits[perm[j]] * d ** (k - 1 - j) for j in range(k))
    op = np.zeros((total, total))
    op[new_idx, idx] = 1.0
    return op


def hermitize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.conj().T) / 2


def eigh_clipped(mat: np.ndarray, floor: float = -1e-9):
    """Eigendecomposition of a Hermitian matrix with tiny negatives floored to 0."""
    vals, vecs = np.linalg.eigh(hermitize(mat))
    vals = np.where((vals < 0) & (vals > floor), 0.0, vals)
    return vals, vecs


def sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = eigh_clipped(mat)
    vals = np.clip(vals, 0.0, None)
    # noise-level eigenvalues would be amplified by the square root
    vals[vals < 1e-13 * max(vals.max(), 1e-300)] = 0.0
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def random_unit_vector(dim: int, rng) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(dim: int, rng, rank: int | None = None) -> np.ndarray:
    r = rank or dim
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    m = g @ g.conj().T
    return m / np.trace(m).real

"""Reshaping between flat parameter vectors and (triangular) matrices.

All maps work for real and complex entries. Triangular parts are read and
filled row by row; full matrices use column-major (``vec``) order.
"""

from math import isqrt

import numpy as np

__all__ = ["vtf", "ftv", "vtu", "utv", "vtsu", "sutv", "tri_size", "stri_size"]


def tri_size(length):
    """Return ``n`` with ``n(n+1)/2 == length`` or raise ``ValueError``."""
    n = (isqrt(8 * length + 1) - 1) // 2
    if length < 1 or n * (n + 1) // 2 != length:
        raise ValueError(f"length {length} is not a triangular number n(n+1)/2")
    return n


def stri_size(length):
    """Return ``n >= 1`` with ``n(n-1)/2 == length`` or raise ``ValueError``."""
    n = (isqrt(8 * length + 1) + 1) // 2
    if length < 0 or n * (n - 1) // 2 != length:
        raise ValueError(f"length {length} is not of the form n(n-1)/2")
    return n


def vtf(v, m):
    """Reshape a vector of length ``n*m`` into an ``n x m`` matrix, column by column."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if m < 1 or v.size % m:
        raise ValueError(f"vector length {v.size} is not divisible by {m} columns")
    return v.reshape((v.size // m, m), order="F").copy()


def ftv(A):
    """Column-major vectorization; inverse of :func:`vtf`."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return A.reshape(-1, order="F").copy()


def _square(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def vtu(v):
    v = np.asarray(v)
    n = tri_size(v.size)
    U = np.zeros((n, n), dtype=v.dtype)
    U[np.triu_indices(n)] = v
    return U


def utv(A):
    A = _square(A)
    return A[np.triu_indices(A.shape[0])].copy()


def vtsu(v):
    v = np.asarray(v)
    n = stri_size(v.size)
    U = np.zeros((n, n), dtype=v.dtype)
    U[np.triu_indices(n, 1)] = v
    return U


def sutv(A):
    A = _square(A)
    return A[np.triu_indices(A.shape[0], 1)].copy()

"""Small dense real linear algebra used by the learners and the monitor.

Vectors and matrices are plain float64 numpy arrays. The helpers here validate
them at API boundaries and provide the norms and spectral quantities the
stability monitor needs.
"""

from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError

Vec = np.ndarray
Mat = np.ndarray


def as_vec(x, name: str = "vector") -> Vec:
    """Return ``x`` as a finite, non-empty 1-D float64 array (a copy)."""
    v = np.array(x, dtype=float, ndmin=1)
    if v.ndim != 1:
        raise DomainError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise DomainError(f"{name} must be non-empty")
    if not np.isfinite(v).all():
        raise DomainError(f"{name} has non-finite entries")
    return v


def as_mat(m, name: str = "matrix") -> Mat:
    """Return ``m`` as a finite 2-D float64 array (a copy)."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or 0 in a.shape:
        raise DomainError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise DomainError(f"{name} has non-finite entries")
    return a


def frobenius_norm(m) -> float:
    m = as_mat(m)
    return float(np.sqrt(np.sum(m * m)))


class SpectralEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def spectral_norm_est(m, tol: float = 1e-10, max_iter: int = 10_000) -> SpectralEstimate:
    """Largest singular value of ``m`` by power iteration on ``m.T @ m``.

    Starts from the normalised all-ones vector so results are deterministic.
    Convergence is declared when the eigen-residual of ``m.T @ m`` drops below
    ``tol`` relative to the current eigenvalue estimate. If the start vector
    lies in the null space of ``m`` the iteration restarts once from the unit
    vector of the heaviest column. On non-convergence the best estimate is
    returned with ``converged=False``.
    """
    m = as_mat(m)
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = m.shape[1]
    if not np.any(m):
        return SpectralEstimate(0.0, True, 0)

    v = np.full(n, 1.0 / np.sqrt(n))
    mv = m @ v
    if not np.any(mv):
        v = np.zeros(n)
        v[int(np.argmax(np.sum(m * m, axis=0)))] = 1.0
        mv = m @ v

    sigma = float(np.linalg.norm(mv))
    for it in range(1, max_iter + 1):
        z = m.T @ mv
        lam = float(v @ z)
        if np.linalg.norm(z - lam * v) <= tol * lam:
            return SpectralEstimate(float(np.sqrt(lam)), True, it)
        v = z / np.linalg.norm(z)
        mv = m @ v
        sigma = max(sigma, float(np.linalg.norm(mv)))
    return SpectralEstimate(sigma, False, max_iter)


def spectral_radius_rank1_lmd(eta_gnorm2: float, dim: int) -> float:
    """Spectral radius of ``I - eta * g g^T`` given ``eta * ||g||^2``.

    The eigenvalues are 1 (multiplicity ``dim - 1``) and ``1 - eta*||g||^2``.
    """
    if dim < 1:
        raise DomainError("dim must be >= 1")
    r = abs(1.0 - eta_gnorm2)
    return r if dim == 1 else max(1.0, r)


def rank1_update_radius(a: Vec, b: Vec) -> float:
    """Spectral radius of ``I - a b^T``; eigenvalues are 1 and ``1 - b.a``."""
    return spectral_radius_rank1_lmd(float(b @ a), a.size)


def rank1_update_norm2(a: Vec, b: Vec) -> float:
    """Exact spectral norm of ``I - a b^T``.

    Outside span{a, b} the matrix is the identity. Inside, the two singular
    values satisfy ``s1^2 + s2^2 = 2 - 2c + |a|^2 |b|^2`` and ``s1 s2 = |1 - c|``
    with ``c = b.a``; Cauchy-Schwarz gives ``s1 >= 1 >= s2``.
    """
    c = float(b @ a)
    if a.size == 1:
        return abs(1.0 - c)
    total = 2.0 - 2.0 * c + float(a @ a) * float(b @ b)
    det2 = (1.0 - c) ** 2
    disc = max(total * total - 4.0 * det2, 0.0)
    return float(np.sqrt(max(0.5 * (total + np.sqrt(disc)), 1.0)))


def spectral_radius(m) -> float:
    """Spectral radius via a dense eigenvalue solve."""
    m = as_mat(m)
    if m.shape[0] != m.shape[1]:
        raise DomainError("spectral radius needs a square matrix")
    if np.allclose(m, m.T, rtol=0.0, atol=0.0):
        return float(np.max(np.abs(np.linalg.eigvalsh(m))))
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def window_product(mats: Sequence[Mat]) -> Mat:
    """Product of a window of square matrices, oldest first in ``mats``.

    The newest matrix ends up leftmost: ``mats[-1] @ ... @ mats[0]``. Adjacent
    pairs are multiplied in batches, so the work is ``log2(p)`` stacked matmuls.
    """
    if isinstance(mats, np.ndarray) and mats.ndim == 3:
        stack = mats
    else:
        mats = list(mats)
        n = mats[0].shape[0] if mats and mats[0].ndim == 2 else -1
        if any(a.ndim != 2 or a.shape != (n, n) for a in mats):
            raise DomainError("window matrices must be square and of equal size")
        stack = np.array(mats, dtype=float)
    if stack.shape[0] == 0 or stack.shape[1] != stack.shape[2]:
        raise DomainError("window must be a non-empty stack of square matrices")
    while stack.shape[0] > 1:
        even = stack.shape[0] - stack.shape[0] % 2
        paired = stack[1:even:2] @ stack[0:even:2]
        stack = np.concatenate([paired, stack[even:]]) if even < stack.shape[0] else paired
    return stack[0]

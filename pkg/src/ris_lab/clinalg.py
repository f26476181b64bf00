"""Dense complex linear algebra on numpy complex128 arrays.

A C-contiguous complex128 array viewed as float64 exposes row-major
interleaved (real, imag) pairs with zero copy, which is exactly the layout
the autodiff side and the binary dataset format consume. Matrices here are
small (K <= 16), so the Hermitian-positive-definite solve is a hand-rolled
Cholesky with forward/back substitution, vectorized over any leading batch
dimensions. The factorization reads only the lower triangle and the real
part of the diagonal, and fails on a non-positive pivot.
"""

from __future__ import annotations

import numpy as np


class NotPositiveDefiniteError(ValueError):
    pass


def as_cmat(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2:
        raise ValueError(f"{name} must have at least 2 dimensions, got {a.ndim}")
    if a.shape[-1] < 1 or a.shape[-2] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_cvec(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError(f"{name} must be a 1-d array of length >= 1")
    if not (np.all(np.isfinite(v.real)) and np.all(np.isfinite(v.imag))):
        raise ValueError(f"{name} has non-finite entries")
    return v


def matmul(a, b) -> np.ndarray:
    a = as_cmat(a, "A")
    b = as_cmat(b, "B")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def hermitian(a) -> np.ndarray:
    a = as_cmat(a)
    return np.conjugate(np.swapaxes(a, -1, -2))


def gram(a) -> np.ndarray:
    """A @ A^H, Hermitian positive semi-definite by construction."""
    a = as_cmat(a)
    return a @ np.conjugate(np.swapaxes(a, -1, -2))


def l2norm(v) -> float:
    return float(np.linalg.norm(as_cvec(v)))


def cholesky_hpd(m) -> np.ndarray:
    """Lower-triangular L with M = L L^H for Hermitian positive definite M.

    Accepts (..., K, K); only the lower triangle of M is read. Raises
    NotPositiveDefiniteError("not positive definite") on a non-positive pivot.
    """
    m = as_cmat(m, "M")
    k = m.shape[-1]
    if m.shape[-2] != k:
        raise ValueError(f"M must be square, got {m.shape}")
    L = np.zeros_like(m)
    for j in range(k):
        lj = L[..., j, :j]
        s = m[..., j, j].real - np.sum(lj.real ** 2 + lj.imag ** 2, axis=-1)
        if np.any(s <= 0.0):
            raise NotPositiveDefiniteError("not positive definite")
        d = np.sqrt(s)
        L[..., j, j] = d
        if j + 1 < k:
            rows = L[..., j + 1:, :j]
            v = m[..., j + 1:, j] - np.einsum("...ij,...j->...i", rows, np.conjugate(lj))
            L[..., j + 1:, j] = v / d[..., None]
    return L


def solve_hpd(m, b) -> np.ndarray:
    """Solve M X = B for Hermitian positive definite M via Cholesky.

    M: (..., K, K); B: (..., K, R). Residual satisfies
    ||M X - B||_F <= 1e-10 ||B||_F for well-conditioned M.
    """
    m = as_cmat(m, "M")
    b = as_cmat(b, "B")
    k = m.shape[-1]
    if b.shape[-2] != k:
        raise ValueError(f"dimension mismatch: M is {m.shape}, B is {b.shape}")
    L = cholesky_hpd(m)
    y = np.zeros(np.broadcast_shapes(L.shape[:-2], b.shape[:-2]) + b.shape[-2:], dtype=np.complex128)
    bb = np.broadcast_to(b, y.shape)
    for i in range(k):
        acc = np.einsum("...j,...jr->...r", L[..., i, :i], y[..., :i, :])
        y[..., i, :] = (bb[..., i, :] - acc) / L[..., i, i][..., None]
    x = np.zeros_like(y)
    for i in reversed(range(k)):
        acc = np.einsum("...j,...jr->...r", np.conjugate(L[..., i + 1:, i]), x[..., i + 1:, :])
        x[..., i, :] = (y[..., i, :] - acc) / L[..., i, i].real[..., None]
    return x

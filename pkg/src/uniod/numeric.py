"""Dense linear algebra helpers shared by the graph and model code.

Matrices are plain 2-D ``numpy.float64`` arrays. Every public function here
rejects non-finite input so that NaN/Inf never leak into features or
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

EPS = np.finfo(np.float64).eps
SYMMETRY_TOL = 1e-10
LAYER_NORM_EPS = 1e-5


class NumericError(ValueError):
    """Raised on shape mismatch, non-finite values or invalid matrix structure."""


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise NumericError(f"{name} must be 2-D, got shape {a.shape}")
    check_finite(a, name)
    return a


def check_finite(a: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise NumericError(f"{name} has a non-finite entry at {tuple(int(i) for i in bad)}")


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise NumericError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    check_finite(out, "product")
    return out


def relu(x) -> np.ndarray:
    return np.maximum(as_matrix(x), 0.0)


def softmax_rows(x) -> np.ndarray:
    x = as_matrix(x)
    z = np.exp(x - x.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def layer_norm_rows(x, gain=None, bias=None, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Normalize each row to zero mean / unit variance, then apply per-column gain and bias."""
    x = as_matrix(x)
    if x.shape[1] < 2:
        raise NumericError("layer_norm_rows needs at least 2 columns")
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    y = (x - mu) / np.sqrt(var + eps)
    if gain is not None:
        y = y * np.asarray(gain, dtype=np.float64).reshape(1, -1)
    if bias is not None:
        y = y + np.asarray(bias, dtype=np.float64).reshape(1, -1)
    return y


@dataclass(frozen=True)
class EigenResult:
    """Eigenpairs sorted by descending eigenvalue; column j of ``vectors`` pairs with ``values[j]``."""

    values: np.ndarray
    vectors: np.ndarray


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (first index wins ties)."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[pivots, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return vectors * signs


def psd_tolerance(n: int, largest: float) -> float:
    # rounding noise of a dense symmetric eigensolver grows like n * eps * ||A||
    return max(1e-10, 4.0 * n * EPS * abs(largest))


def _check_symmetric(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise NumericError(f"expected a square matrix, got {a.shape}")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise NumericError(f"matrix is not symmetric (max |a - a^T| = {asym:.3e})")


def _finish(values: np.ndarray, vectors: np.ndarray, n: int) -> EigenResult:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    tol = psd_tolerance(n, values[0] if values.size else 0.0)
    if values.size and values.min() < -tol:
        raise NumericError(f"matrix is not positive semi-definite (eigenvalue {values.min():.3e})")
    values = np.where(np.abs(values) <= tol, 0.0, values)
    return EigenResult(values=values, vectors=fix_signs(vectors))


def sym_eig_topk(a, k: int) -> EigenResult:
    """Top-``k`` eigenpairs of a symmetric positive semi-definite matrix.

    Eigenvalues whose magnitude is within the rounding floor of the solver are
    reported as exactly zero; anything more negative than that is rejected.
    """
    a = as_matrix(a)
    _check_symmetric(a)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise NumericError(f"k must be in [1, {n}], got {k}")
    values, vectors = scipy.linalg.eigh(a, subset_by_index=[n - k, n - 1])
    return _finish(values, vectors, n)


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 100) -> EigenResult:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Slow (pure Python loop over index pairs); intended for small matrices and
    as an independent reference for :func:`sym_eig_topk`.
    """
    a = as_matrix(a)
    _check_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * max(scale, 1.0):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - s * a[q, :]
                a[q, :] = s * row_p + c * a[q, :]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise NumericError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return _finish(np.diag(a).copy(), v, n)

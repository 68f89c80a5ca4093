"""
Symmetric eigen-decomposition by cyclic Jacobi rotations.
"""
import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_SWEEPS = 100


def _off_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a) - np.sum(np.diag(a) ** 2)))


def jacobi_eigh(matrix, tol: float = DEFAULT_TOLERANCE,
                max_sweeps: int = DEFAULT_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues (descending) and eigenvectors (as columns) of a symmetric matrix.

    Sweeps all (p, q) pairs until the off-diagonal norm drops to tol times the
    Frobenius norm of the input.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Jacobi needs a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-9 * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise ValueError('Jacobi needs a symmetric matrix')
    a = (a + a.T) / 2.0
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if n < 2 or scale == 0.0:
        return _sorted(np.diag(a).copy(), v)

    converged = False
    for sweep in range(max_sweeps):
        if _off_norm(a) <= tol * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        converged = _off_norm(a) <= tol * scale

    if not converged:
        logger.warning(f"Jacobi did not converge in {max_sweeps} sweeps "
                       f"(off-diagonal norm {_off_norm(a):.3e}, matrix size {n})")
    return _sorted(np.diag(a).copy(), v)


def _sorted(values: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-values, kind='stable')
    return values[order], vectors[:, order]


def inverse_sqrt(matrix, floor: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """S^(-1/2) of a symmetric positive definite matrix, plus its eigenvalues."""
    values, vectors = jacobi_eigh(matrix)
    if values.size and values[-1] <= floor:
        return None, values
    return (vectors / np.sqrt(values)) @ vectors.T, values

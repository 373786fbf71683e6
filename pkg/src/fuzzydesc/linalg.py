"""Self-contained symmetric eigensolver used for posterior certificate checks.

Deliberately independent of LAPACK so that verification does not share
code paths with the interior-point solver.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["jacobi_eigvalsh", "max_eig"]


def jacobi_eigvalsh(a, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    A = 0.5 * (A + A.T)
    scale = math.sqrt(float(np.sum(A * A))) or 1.0
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum((A - np.diag(np.diag(A))) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff  # theta would overflow; t ~ 1/(2 theta)
                else:
                    theta = diff / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with rotation in the (p, q) plane
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def max_eig(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    return float(jacobi_eigvalsh(a)[-1])

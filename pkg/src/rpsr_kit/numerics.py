"""Rank-revealing linear algebra shared by the PSR and R-PSR builders."""
from __future__ import annotations

import numpy as np

DEFAULT_TAU = 1e-8


class Basis:
    """Incrementally grown set of linearly independent vectors.

    Independence is decided by the residual of ``v`` after orthogonal
    projection onto the current span (modified Gram-Schmidt, applied twice).
    A vector is accepted iff ``||v - P v|| > tau * max(1, ||v||)``.
    """

    def __init__(self, dim: int, tau: float = DEFAULT_TAU):
        self.dim = dim
        self.tau = tau
        self.vectors: list[np.ndarray] = []
        self._q: list[np.ndarray] = []

    def __len__(self):
        return len(self.vectors)

    def residual(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of dimension {self.dim}, got {v.shape}")
        r = v.copy()
        for _ in range(2):
            for q in self._q:
                r -= (q @ r) * q
        return r

    def is_independent(self, v) -> bool:
        r = self.residual(v)
        return float(np.linalg.norm(r)) > self.tau * max(1.0, float(np.linalg.norm(v)))

    def try_extend(self, v) -> bool:
        r = self.residual(v)
        norm = float(np.linalg.norm(r))
        if norm <= self.tau * max(1.0, float(np.linalg.norm(v))):
            return False
        self.vectors.append(np.array(v, dtype=float))
        self._q.append(r / norm)
        return True

    @property
    def matrix(self) -> np.ndarray:
        """Accepted vectors stacked column-wise (``dim x len``)."""
        if not self.vectors:
            return np.zeros((self.dim, 0))
        return np.column_stack(self.vectors)


def try_extend(basis: Basis, v) -> bool:
    return basis.try_extend(v)


def pseudoinverse(M, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``tau * sigma_max`` are treated as zero.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, k = M.shape
    if M.size == 0:
        return np.zeros((k, n))
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((k, n))
    keep = s > tau * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def column_pseudoinverse(U) -> np.ndarray:
    """Pseudoinverse of a matrix whose columns are already known to be independent.

    The cutoff is at round-off level rather than ``tau``: a basis can accept
    columns whose joint condition number exceeds ``1/tau``, and truncating a
    singular value there would break ``U^+ U = I``.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return pseudoinverse(U, np.finfo(float).eps * max(U.shape))


def projector(M, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Orthogonal projector ``M M^+`` onto the column space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return M @ pseudoinverse(M, tau)

"""Dense two-phase simplex for the small LPs used by alpha-vector pruning.

Problems are posed as::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12
COST_TOL = 1e-12


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float | None
    iterations: int


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    basis[row] = col


def _run(T: np.ndarray, basis: np.ndarray, ncols: int, max_iter: int) -> tuple[str, int]:
    """Iterate on tableau ``T`` whose last row holds reduced costs.

    Dantzig pricing, switching to Bland's rule after a run of degenerate
    pivots so cycling cannot happen.
    """
    m = T.shape[0] - 1
    degenerate = 0
    for it in range(max_iter):
        costs = T[-1, :ncols]
        if degenerate > 50:
            neg = np.flatnonzero(costs < -COST_TOL)
            if neg.size == 0:
                return "optimal", it
            col = int(neg[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -COST_TOL:
                return "optimal", it
        column = T[:m, col]
        pos = column > PIVOT_TOL
        if not np.any(pos):
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-14)
        row = int(ties[np.argmin(basis[ties])])  # Bland-style leaving choice
        degenerate = degenerate + 1 if best <= 1e-14 else 0
        _pivot(T, basis, row, col)
    raise LPError(f"simplex did not terminate in {max_iter} iterations")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    rhs = np.concatenate([b_ub, b_eq])
    flip = rhs < 0
    A[flip] *= -1
    rhs = np.abs(rhs)

    # Rows whose slack is a usable +1 basic column need no artificial.
    slack_ok = np.zeros(m, dtype=bool)
    slack_ok[:m_ub] = ~flip[:m_ub]
    art_rows = np.flatnonzero(~slack_ok)
    nvar = n + m_ub
    ncols = nvar + art_rows.size
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :nvar] = A
    T[:m, -1] = rhs
    basis = np.empty(m, dtype=int)
    for i in range(m_ub):
        if slack_ok[i]:
            basis[i] = n + i
    for k, i in enumerate(art_rows):
        T[i, nvar + k] = 1.0
        basis[i] = nvar + k

    iters = 0
    if art_rows.size:
        T[-1, nvar:ncols] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status, it = _run(T, basis, ncols, max_iter)
        iters += it
        if -T[-1, -1] > 1e-9 * max(1.0, float(rhs.max(initial=0.0))):
            return LPResult("infeasible", None, None, iters)
        # Drive remaining artificials out of the basis.
        for i in range(m):
            if basis[i] >= nvar:
                cands = np.flatnonzero(np.abs(T[i, :nvar]) > 1e-9)
                if cands.size:
                    _pivot(T, basis, i, int(cands[0]))
        keep = basis < nvar
        T = np.vstack([T[:m][keep], T[-1:]])
        basis = basis[keep]
        T = np.delete(T, np.s_[nvar:ncols], axis=1)
        m = T.shape[0] - 1

    T[-1] = 0.0
    T[-1, :n] = c
    for i in range(m):
        if T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status, it = _run(T, basis, nvar, max_iter)
    iters += it
    if status == "unbounded":
        return LPResult("unbounded", None, None, iters)
    x = np.zeros(nvar)
    x[basis] = T[:m, -1]
    x = x[:n]
    return LPResult("optimal", x, float(c @ x), iters)

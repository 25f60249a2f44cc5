"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for the small transport LPs used as test oracles (a few hundred variables),
not as a general-purpose solver.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    pivot_row = T[row]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * pivot_row


def _run(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int) -> int:
    """Minimise the objective held in the last row of T over columns [0, n_cols)."""
    m = len(basis)
    for it in range(max_iter):
        reduced = T[-1, :n_cols]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return it
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise Unbounded("objective is unbounded below")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the basic variable with smallest index
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, row, col)
        basis[row] = col
    raise LPError(f"simplex exceeded {max_iter} pivots")


def linprog(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, tol: float = 1e-11,
            max_iter: int = 50_000) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks, rhs, n_slack = [], [], 0
    if A_ub is not None and len(A_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        n_slack = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_slack)]))
        rhs.append(np.asarray(b_ub, dtype=float))
    if A_eq is not None and len(A_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_slack))]))
        rhs.append(np.asarray(b_eq, dtype=float))
    if not blocks:
        if np.any(c < 0):
            raise Unbounded("objective is unbounded below")
        return LPResult(np.zeros(n), 0.0, 0)

    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    m, n_struct = A.shape

    # Phase 1: one artificial per row, objective = sum of artificials
    T = np.zeros((m + 1, n_struct + m + 1))
    T[:m, :n_struct] = A
    T[:m, n_struct:n_struct + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_struct] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_struct, n_struct + m))
    iters = _run(T, basis, n_struct + m, tol, max_iter)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max()):
        raise Infeasible(f"no feasible point (phase-1 residual {-T[-1, -1]:.3g})")

    # drive remaining artificials out; rows where that is impossible are redundant
    keep = []
    for i in range(m):
        if basis[i] >= n_struct:
            candidates = np.flatnonzero(np.abs(T[i, :n_struct]) > tol)
            if candidates.size:
                _pivot(T, i, int(candidates[0]))
                basis[i] = int(candidates[0])
                keep.append(i)
        else:
            keep.append(i)
    T = np.vstack([T[keep][:, list(range(n_struct)) + [-1]], np.zeros((1, n_struct + 1))])
    basis = [basis[i] for i in keep]

    # Phase 2
    cost = np.concatenate([c, np.zeros(n_struct - n)])
    T[-1, :n_struct] = cost
    for i, j in enumerate(basis):
        T[-1] -= cost[j] * T[i]
    iters += _run(T, basis, n_struct, tol, max_iter)

    x = np.zeros(n_struct)
    x[basis] = T[:-1, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(x=x, fun=float(c @ x), iterations=iters)

"""Worst-case expectations over Wasserstein balls via the lambda-c transform.

For an integrand ``f``, reference weights ``p`` and transport budget ``eps**q``
the worst case ``inf_{P in ball} E_P[f]`` equals the maximum over ``lam >= 0`` of

    G(lam) = sum_x p(x) * min_y (f(y) + lam * c(x, y)) - eps**q * lam,

a concave piecewise-linear function. Its kinks sit where two of the affine pieces
``f(y) + lam * c(x, y)`` cross, so the maximum is found exactly by evaluating G at
every crossing point and at ``lam = 0``.

Infinite costs mark forbidden moves: such pairs are dropped from the inner minimum
for every ``lam``, including ``lam = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .mdp import SIMPLEX_TOL
from .simplex import linprog
from .wasserstein import LP_MAX_POINTS, CostMatrix

# beyond this many candidate columns the O(n^3) enumeration gives way to golden-section search
ENUMERATION_MAX_COLUMNS = 512
_PLATEAU_RTOL = 1e-13


@numba.njit(cache=True, nogil=True)
def _dual_value(f, cost, w, budget, lam):
    total = 0.0
    for i in range(cost.shape[0]):
        best = np.inf
        for j in range(cost.shape[1]):
            c = cost[i, j]
            if c < np.inf:
                v = f[j] + lam * c
                if v < best:
                    best = v
        total += w[i] * best
    return total - budget * lam


@numba.njit(cache=True, nogil=True)
def _enumerate_breakpoints(f, cost, w, budget):
    ns, ny = cost.shape
    buf = np.empty(ns * ny * (ny - 1) // 2 + 1)
    buf[0] = 0.0
    k = 1
    for i in range(ns):
        for a in range(ny):
            ca = cost[i, a]
            if ca == np.inf:
                continue
            for b in range(ny):
                cb = cost[i, b]
                if cb < np.inf and cb > ca:
                    lam = (f[a] - f[b]) / (cb - ca)
                    if lam > 0.0:
                        buf[k] = lam
                        k += 1
    cands = np.sort(buf[:k])
    values = np.empty(k)
    n_eval = 0
    prev = -1.0
    best = -np.inf
    for idx in range(k):
        lam = cands[idx]
        if lam == prev:
            values[idx] = -np.inf
            continue
        prev = lam
        values[idx] = _dual_value(f, cost, w, budget, lam)
        n_eval += 1
        if values[idx] > best:
            best = values[idx]
    # smallest multiplier whose value is within rounding of the maximum
    tol = _PLATEAU_RTOL * max(1.0, abs(best))
    for idx in range(k):
        if values[idx] >= best - tol:
            return cands[idx], values[idx], n_eval
    return cands[0], values[0], n_eval


def _golden_section(f, cost, w, budget, hi, iters=200):
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    lo = 0.0
    a, b = lo + (1 - inv) * (hi - lo), lo + inv * (hi - lo)
    ga, gb = _dual_value(f, cost, w, budget, a), _dual_value(f, cost, w, budget, b)
    for _ in range(iters):
        if ga >= gb:
            hi, b, gb = b, a, ga
            a = lo + (1 - inv) * (hi - lo)
            ga = _dual_value(f, cost, w, budget, a)
        else:
            lo, a, ga = a, b, gb
            b = lo + inv * (hi - lo)
            gb = _dual_value(f, cost, w, budget, b)
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    probes = [0.0, lo, 0.5 * (lo + hi), hi]
    vals = [_dual_value(f, cost, w, budget, lam) for lam in probes]
    best = int(np.argmax(vals))
    return probes[best], vals[best], iters + 4


@dataclass(frozen=True, eq=False)
class DualInstance:
    """Integrand, cost, reference row and ball radius for one (state, action) pair."""

    f: np.ndarray
    cost: CostMatrix
    reference: np.ndarray
    epsilon: float
    q: int = 1

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        p = np.asarray(self.reference, dtype=float)
        if not isinstance(self.cost, CostMatrix):
            object.__setattr__(self, "cost", CostMatrix(self.cost))
        n = self.cost.n
        if f.shape != (n,) or p.shape != (n,):
            raise ValueError("f and reference must match the cost matrix size")
        if not np.all(np.isfinite(f)):
            raise ValueError("f must be finite")
        if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("reference must be a probability vector")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "reference", p)

    @property
    def budget(self) -> float:
        return float(self.epsilon) ** int(self.q)


@dataclass(frozen=True)
class DualSolution:
    lambda_star: float
    value: float
    candidates_evaluated: int

    @property
    def unconstrained(self) -> bool:
        """True for the zero-radius case, where the supremum is only reached as lam -> inf."""
        return np.isinf(self.lambda_star)


def reduce_instance(f, cost_values, reference, columns=None):
    """Restrict to rows with positive reference weight and to reachable columns.

    Returns ``(f_sub, cost_sub, weights, columns)``; zero-weight rows cannot change G
    and columns with infinite cost from every support row never enter the minimum.
    """
    rows = np.flatnonzero(reference > 0)
    if columns is None:
        sub = cost_values[rows]
        columns = np.flatnonzero(np.isfinite(sub).any(axis=0))
        sub = sub[:, columns]
    else:
        sub = cost_values[np.ix_(rows, columns)]
    return (np.ascontiguousarray(f[columns]), np.ascontiguousarray(sub),
            np.ascontiguousarray(reference[rows]), columns)


def solve_dual(f, cost_values, reference, budget, columns=None) -> DualSolution:
    """Array-level maximiser of G used on hot paths (no input validation)."""
    if budget == 0.0:
        return DualSolution(np.inf, float(reference @ f), 0)
    fs, cs, ws, _ = reduce_instance(f, cost_values, reference, columns)
    if cs.shape[1] > ENUMERATION_MAX_COLUMNS:
        finite = cs[np.isfinite(cs) & (cs > 0)]
        spread = float(fs.max() - fs.min())
        if finite.size == 0 or spread == 0.0:
            return DualSolution(0.0, _dual_value(fs, cs, ws, budget, 0.0), 1)
        lam, val, n = _golden_section(fs, cs, ws, budget, 2.0 * spread / finite.min())
        return DualSolution(float(lam), float(val), n)
    lam, val, n = _enumerate_breakpoints(fs, cs, ws, budget)
    return DualSolution(float(lam), float(val), int(n))


def lambda_c_transform(f, lam: float, cost, x: int) -> float:
    """``max_y f(y) - lam * c(x, y)`` over the finite-cost entries of row ``x``."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    c = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    f = np.asarray(f, dtype=float)
    row = c[x]
    ok = np.isfinite(row)
    return float(np.max(f[ok] - lam * row[ok]))


def dual_objective(inst: DualInstance, lam: float) -> float:
    """G(lam); ``lam = inf`` returns its limit E_ref[f] (only zero-cost moves survive)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if np.isinf(lam):
        return float(inst.reference @ inst.f)
    fs, cs, ws, _ = reduce_instance(inst.f, inst.cost.values, inst.reference)
    return float(_dual_value(fs, cs, ws, inst.budget, float(lam)))


def maximize_dual(inst: DualInstance) -> DualSolution:
    """Global maximiser of G over [0, inf); ties go to the smallest multiplier."""
    return solve_dual(inst.f, inst.cost.values, inst.reference, inst.budget)


def worst_case_expectation(inst: DualInstance) -> float:
    return maximize_dual(inst).value


def transform_target(f, cost_values, x_next: int, lam: float, budget: float) -> float:
    """Sample value ``-(-f)^{lam c}(x_next) - budget * lam`` used by the learning update."""
    if np.isinf(lam):
        return float(f[x_next])
    row = cost_values[x_next]
    ok = np.isfinite(row)
    return float(np.min(f[ok] + lam * row[ok]) - budget * lam)


def primal_worst_case_lp(inst: DualInstance) -> float:
    """Primal LP: minimise sum pi(x, y) f(y) over plans with first marginal = reference
    and total cost <= eps**q. Solved with the package simplex (oracle scale only)."""
    n = inst.cost.n
    if n > LP_MAX_POINTS:
        raise ValueError(f"LP oracle is limited to {LP_MAX_POINTS} states")
    rows = np.flatnonzero(inst.reference > 0)
    cells = [(i, j) for i in rows for j in range(n) if np.isfinite(inst.cost.values[i, j])]
    m = len(cells)
    obj = np.array([inst.f[j] for _, j in cells])
    A_eq = np.zeros((len(rows), m))
    row_pos = {int(i): k for k, i in enumerate(rows)}
    for col, (i, _) in enumerate(cells):
        A_eq[row_pos[int(i)], col] = 1.0
    A_ub = np.array([[inst.cost.values[i, j] for i, j in cells]])
    res = linprog(obj, A_eq=A_eq, b_eq=inst.reference[rows], A_ub=A_ub, b_ub=[inst.budget])
    return res.fun

"""Transport cost matrices and exact Wasserstein distances on finite supports."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import SIMPLEX_TOL, StateSpace
from .simplex import Infeasible, linprog

LP_MAX_POINTS = 256


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Pairwise transport cost with explicit infinite entries (stored as ``np.inf``).

    An infinite entry forbids moving mass between the two states at every
    multiplier, including zero.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {v.shape}")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("cost entries must be >= 0")
        if np.any(np.diag(v) != 0):
            raise ValueError("cost diagonal must be exactly 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def max_finite(self) -> float:
        return float(self.values[self.finite].max())

    def min_positive(self) -> float:
        pos = self.values[self.finite & (self.values > 0)]
        return float(pos.min()) if pos.size else np.inf


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability weights over an ordered support of points (rows)."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(s):
            raise ValueError("support and weights must have the same length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must be a probability vector (sum {w.sum():.15g})")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, support, index: int) -> "Distribution":
        w = np.zeros(len(np.asarray(support)))
        w[index] = 1.0
        return cls(support, w)


@dataclass
class Coupling:
    matrix: np.ndarray

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.matrix.sum(axis=1), self.matrix.sum(axis=0)


def cost_c1(states: StateSpace, q: int = 1) -> CostMatrix:
    """Euclidean distance raised to the power ``q``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    pts = states.points
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    return CostMatrix(dist**q)


def split_history(states: StateSpace, h: int) -> np.ndarray:
    """View states of dimension h*D as ``(n, h, D)`` tuples, checking they form T^h."""
    if h < 2:
        raise ValueError("history length must be >= 2")
    n, dim = states.points.shape
    if dim % h:
        raise ValueError(f"state dimension {dim} is not a multiple of h={h}")
    tuples = states.points.reshape(n, h, dim // h)
    alphabet = np.unique(tuples.reshape(-1, dim // h), axis=0)
    if n != len(alphabet) ** h:
        raise ValueError(f"{n} states do not form T^h for |T|={len(alphabet)}, h={h}")
    return tuples


def cost_c2(states: StateSpace, h: int, q: int = 1) -> CostMatrix:
    """Infinite unless the first h-1 components agree; then ||x_h - y_h||^q."""
    tuples = split_history(states, h)
    prefix = tuples[:, :-1, :].reshape(len(tuples), -1)
    same_prefix = np.all(prefix[:, None, :] == prefix[None, :, :], axis=-1)
    last = tuples[:, -1, :]
    dist = np.sqrt(((last[:, None, :] - last[None, :, :]) ** 2).sum(axis=-1)) ** q
    return CostMatrix(np.where(same_prefix, dist, np.inf))


def _check_common_support(p: Distribution, r: Distribution) -> np.ndarray:
    if p.support.shape != r.support.shape or not np.array_equal(p.support, r.support):
        raise ValueError("distributions must share the same support")
    return p.support


def w_distance_1d(p: Distribution, r: Distribution, q: int = 1) -> float:
    """W1 on a sorted scalar support via the integrated CDF difference."""
    support = _check_common_support(p, r)
    if support.shape[1] != 1:
        raise ValueError("1-D formula needs a scalar support")
    if q != 1:
        raise ValueError("1-D formula is only implemented for q=1; use w_distance_lp")
    s = support[:, 0]
    if np.any(np.diff(s) <= 0):
        raise ValueError("support must be strictly increasing")
    gap = np.abs(np.cumsum(p.weights) - np.cumsum(r.weights))[:-1]
    return float(gap @ np.diff(s))


def transport_lp(a: np.ndarray, b: np.ndarray, cost: CostMatrix) -> tuple[float, Coupling]:
    """Optimal transport cost between weight vectors ``a`` and ``b`` (no q-th root).

    Infinite-cost cells are excluded from the LP.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = cost.n
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError("weight vectors must match the cost matrix size")
    if n > LP_MAX_POINTS:
        raise ValueError(f"LP oracle is limited to {LP_MAX_POINTS} support points")
    cells = np.argwhere(cost.finite)
    rows, cols = cells[:, 0], cells[:, 1]
    A_eq = np.zeros((2 * n, len(cells)))
    A_eq[rows, np.arange(len(cells))] = 1.0
    A_eq[n + cols, np.arange(len(cells))] = 1.0
    try:
        res = linprog(cost.values[rows, cols], A_eq=A_eq, b_eq=np.concatenate([a, b]))
    except Infeasible as exc:
        raise Infeasible("no finite-cost coupling exists") from exc
    plan = np.zeros((n, n))
    plan[rows, cols] = res.x
    return res.fun, Coupling(plan)


def w_distance_lp(p: Distribution, r: Distribution, cost: CostMatrix,
                  q: int = 1) -> tuple[float, Coupling]:
    """Return (optimal transport cost, optimal coupling); the distance is cost**(1/q)."""
    _check_common_support(p, r)
    return transport_lp(p.weights, r.weights, cost)


def wasserstein(p: Distribution, r: Distribution, q: int = 1) -> float:
    """q-Wasserstein distance under the Euclidean ground metric."""
    support = _check_common_support(p, r)
    if q == 1 and support.shape[1] == 1 and np.all(np.diff(support[:, 0]) > 0):
        return w_distance_1d(p, r)
    total, _ = w_distance_lp(p, r, cost_c1(StateSpace(support), q))
    return max(total, 0.0) ** (1.0 / q)

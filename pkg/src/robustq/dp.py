"""Robust Bellman operator, exact robust value iteration and greedy policies."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dual import solve_dual
from .envs import Environment
from .mdp import NumericFailure

TIE_TOL = 1e-12


def value_from_q(q: np.ndarray) -> np.ndarray:
    return np.max(q, axis=1)


def greedy_action(row: np.ndarray) -> int:
    """Index of the largest entry; near-ties (within TIE_TOL) go to the smallest index."""
    top = row.max()
    return int(np.flatnonzero(row >= top - TIE_TOL * max(1.0, abs(top)))[0])


def greedy_policy(q: np.ndarray) -> np.ndarray:
    return np.array([greedy_action(row) for row in q], dtype=int)


def top_two_gap(q: np.ndarray) -> np.ndarray:
    """Per-state difference between the best and second-best action value."""
    if q.shape[1] < 2:
        return np.full(q.shape[0], np.inf)
    s = np.sort(q, axis=1)
    return s[:, -1] - s[:, -2]


def _h_rows(q_in: np.ndarray, env: Environment, xs) -> list[np.ndarray]:
    V = value_from_q(q_in)
    alpha, budget = env.spec.alpha, env.budget
    cost = env.cost.values
    out = []
    for x in xs:
        row = np.empty(env.n_actions)
        cols = env.columns(x)
        for a in range(env.n_actions):
            f = env.reward[x, a] + alpha * V
            row[a] = solve_dual(f, cost, env.reference[x, a], budget, cols).value
        out.append(row)
    return out


def bellman_H(q_in: np.ndarray, env: Environment, threads: int = 1) -> np.ndarray:
    """(Hq)(x, a) = worst case over the (x, a) ball of y -> r(x, a, y) + alpha max_b q(y, b)."""
    q_in = np.asarray(q_in, dtype=float)
    xs = range(env.n_states)
    if threads <= 1:
        return np.array(_h_rows(q_in, env, xs))
    chunks = np.array_split(np.arange(env.n_states), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: _h_rows(q_in, env, c), chunks))
    return np.array([row for part in parts for row in part])


@dataclass
class VIResult:
    q: np.ndarray
    iterations: int
    residual: float

    @property
    def value(self) -> np.ndarray:
        return value_from_q(self.q)

    @property
    def policy(self) -> np.ndarray:
        return greedy_policy(self.q)


def value_iteration(env: Environment, tol: float = 1e-10, max_iter: int = 10_000,
                    threads: int = 1) -> VIResult:
    """Iterate Q <- H(Q) from zero until the sup-norm step is at most ``tol``.

    The result is within ``tol * alpha / (1 - alpha)`` of the fixed point.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    q = np.zeros((env.n_states, env.n_actions))
    residual = np.inf
    for it in range(1, max_iter + 1):
        q_next = bellman_H(q, env, threads)
        residual = float(np.max(np.abs(q_next - q)))
        q = q_next
        if residual <= tol:
            return VIResult(q, it, residual)
    raise NumericFailure(f"value iteration did not reach tol={tol} in {max_iter} sweeps",
                         residual)


def iteration_bound(first_step: float, alpha: float, tol: float) -> int:
    """Sweeps needed by a geometric contraction starting from a first step of size ``first_step``."""
    if first_step <= tol:
        return 1
    return math.ceil(math.log(tol * (1 - alpha) / first_step) / math.log(alpha)) + 1

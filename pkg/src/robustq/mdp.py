"""Finite state/action spaces, kernels, seeded sampling and exact policy evaluation.

States and actions are addressed by integer index. Coordinates are kept only to
build cost matrices and rewards.

Array conventions used throughout the package:

* kernel: ``(n_states, n_actions, n_states)``, ``kernel[x, a]`` is the law of the next state
* reward: ``(n_states, n_actions, n_states)``, ``reward[x, a, y] = r(x, a, y)``
* Q-table: ``(n_states, n_actions)``
* policy: ``(n_states,)`` integer action indices
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12


class NumericFailure(RuntimeError):
    """An iterative routine did not reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


def _as_points(points, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty list of equal-length vectors")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    if len(np.unique(arr, axis=0)) != len(arr):
        raise ValueError(f"{name} contains duplicate points")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Ordered finite subset of R^d. Row ``i`` of ``points`` is state ``i``."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points, "states"))
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def index(self, point) -> int:
        target = np.atleast_1d(np.asarray(point, dtype=float))
        hits = np.flatnonzero(np.all(self.points == target, axis=1))
        if hits.size == 0:
            raise KeyError(f"{tuple(target)} is not a state")
        return int(hits[0])


@dataclass(frozen=True, eq=False)
class ActionSpace:
    """Ordered finite subset of R^m."""

    actions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "actions", _as_points(self.actions, "actions"))
        self.actions.setflags(write=False)

    def __len__(self) -> int:
        return self.actions.shape[0]

    def index(self, action) -> int:
        target = np.atleast_1d(np.asarray(action, dtype=float))
        hits = np.flatnonzero(np.all(self.actions == target, axis=1))
        if hits.size == 0:
            raise KeyError(f"{tuple(target)} is not an action")
        return int(hits[0])


SETTINGS = ("none", "setting1", "setting2")


@dataclass(frozen=True)
class ProblemSpec:
    """Discount, ambiguity radius, Wasserstein order and ambiguity-set selector.

    ``setting`` is ``"none"`` (no ambiguity), ``"setting1"`` (ball around the
    reference row under c1) or ``"setting2"`` (history states, c2 with ``history``).
    """

    alpha: float
    epsilon: float = 0.0
    q: int = 1
    setting: str = "setting1"
    history: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.setting == "setting2" and (self.history is None or self.history < 2):
            raise ValueError("setting2 needs a history length h >= 2")

    @property
    def budget(self) -> float:
        """Transport budget epsilon**q."""
        return float(self.epsilon) ** int(self.q)


def is_distribution(weights, tol: float = SIMPLEX_TOL) -> bool:
    w = np.asarray(weights, dtype=float)
    return bool(w.ndim == 1 and np.all(w >= 0) and abs(w.sum() - 1.0) <= tol)


def validate_kernel(kernel) -> list[str]:
    """Return one message per offending row; an empty list means every row is a distribution."""
    k = np.asarray(kernel, dtype=float)
    problems: list[str] = []
    if k.ndim == 1:
        k = k[None, None, :]
    elif k.ndim == 2:
        k = k[:, None, :]
    elif k.ndim != 3:
        return [f"kernel must have 1 to 3 dimensions, got shape {k.shape}"]
    for x, a in np.ndindex(*k.shape[:2]):
        row = k[x, a]
        where = f"row ({x}, {a})"
        if not np.all(np.isfinite(row)):
            problems.append(f"{where}: non-finite weight")
            continue
        if np.any(row < 0):
            problems.append(f"{where}: negative weight {row.min():g}")
        total = row.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            problems.append(f"{where}: row sum {total:.12g}")
    return problems


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator (64-bit output, platform-independent stream)."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def draw_index(weights: np.ndarray, u: float) -> int:
    """Inverse-CDF lookup of ``u`` in [0, 1) over a weight vector (left-to-right cumsum)."""
    cdf = np.cumsum(weights)
    j = int(np.searchsorted(cdf, u, side="right"))
    if j >= len(weights):
        # u landed in the rounding gap above cdf[-1]
        j = int(np.flatnonzero(weights > 0)[-1])
    return j


def sample_next(kernel: np.ndarray, x: int, a: int, rng: np.random.Generator) -> int:
    n_states, n_actions = kernel.shape[:2]
    if not (0 <= x < n_states and 0 <= a < n_actions):
        raise IndexError(f"(x={x}, a={a}) outside {n_states} states x {n_actions} actions")
    return draw_index(kernel[x, a], rng.random())


def policy_matrix(kernel: np.ndarray, policy: Sequence[int]) -> np.ndarray:
    """Transition matrix of the chain driven by a stationary deterministic policy."""
    policy = np.asarray(policy, dtype=int)
    return kernel[np.arange(kernel.shape[0]), policy]


def expected_reward(kernel: np.ndarray, reward: np.ndarray, policy: Sequence[int]) -> np.ndarray:
    """One-step expected reward r_bar(x) = sum_y P(x, pi(x))(y) r(x, pi(x), y)."""
    policy = np.asarray(policy, dtype=int)
    idx = np.arange(kernel.shape[0])
    return np.einsum("xy,xy->x", kernel[idx, policy], reward[idx, policy])


def evaluate_policy_exact(
    kernel: np.ndarray,
    reward: np.ndarray,
    policy: Sequence[int],
    alpha: float,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Discounted value of a stationary policy by fixed-point iteration.

    Stops when the sup-norm residual of V - (r_bar + alpha P V) is at most ``tol``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    P = policy_matrix(kernel, policy)
    r_bar = expected_reward(kernel, reward, policy)
    V = np.zeros_like(r_bar)
    residual = np.inf
    for _ in range(max_iter):
        V_next = r_bar + alpha * (P @ V)
        residual = float(np.max(np.abs(V_next - V)))
        V = V_next
        if residual <= tol:
            return V
    raise NumericFailure(f"policy evaluation did not converge in {max_iter} iterations", residual)

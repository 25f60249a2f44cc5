"""Robust (Wasserstein) Q-learning and the classical baseline.

Each step visits one state-action pair, so only that cell of the table moves.
The n-th update of a pair uses ``rate(n - 1)``, i.e. 1, 1/2, 1/3, ... for the
default schedule, so the first visit overwrites the zero initialisation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dp import greedy_action
from .dual import solve_dual, transform_target
from .envs import Environment
from .mdp import make_rng, sample_next


@dataclass(frozen=True)
class Schedule:
    """Learning rates rate(n) = 1 / (1 + n)**beta.

    Any beta in (0.5, 1] gives sum rate = inf and sum rate**2 < inf.
    """

    beta: float = 1.0
    family: str = "inv_visits"

    def __post_init__(self):
        if self.family != "inv_visits":
            raise ValueError(f"unknown schedule family {self.family!r}")
        if not 0.5 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0.5, 1], got {self.beta}")

    def rate(self, n: int) -> float:
        return 1.0 / (1.0 + n) ** self.beta


@dataclass(frozen=True)
class TrainConfig:
    robust: bool = True
    eps_tilde: float = 0.1
    decay: float = 1.0
    schedule: Schedule = field(default_factory=Schedule)
    x0: int | None = None
    snapshot_every: int = 1000
    lambda_refresh: int = 1

    def __post_init__(self):
        if not 0.0 <= self.eps_tilde <= 1.0:
            raise ValueError("eps_tilde must lie in [0, 1]")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.lambda_refresh < 1:
            raise ValueError("lambda_refresh must be >= 1")

    def exploration(self, t: int) -> float:
        return self.eps_tilde * self.decay**t


@dataclass
class LearnerState:
    q: np.ndarray
    visits: np.ndarray
    step: int = 0
    schedule: Schedule = field(default_factory=Schedule)
    # per-pair multiplier cache, only consulted when lambda_refresh > 1
    lambdas: np.ndarray | None = None

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, schedule: Schedule | None = None):
        return cls(np.zeros((n_states, n_actions)),
                   np.zeros((n_states, n_actions), dtype=np.int64),
                   0, schedule or Schedule())


def select_action(q: np.ndarray, x: int, eps_tilde: float, rng: np.random.Generator) -> int:
    """Greedy with probability 1 - eps_tilde, otherwise uniform over all actions."""
    if rng.random() < eps_tilde:
        return int(rng.integers(q.shape[1]))
    return greedy_action(q[x])


def _advance(ls: LearnerState, x: int, a: int, target: float) -> LearnerState:
    ls.q[x, a] += ls.schedule.rate(ls.visits[x, a] - 1) * (target - ls.q[x, a])
    ls.step += 1
    return ls


def _lookahead(ls: LearnerState, x: int, a: int, env: Environment) -> np.ndarray:
    return env.reward[x, a] + env.spec.alpha * np.max(ls.q, axis=1)


def robust_update(ls: LearnerState, x: int, a: int, x_next: int, env: Environment,
                  lambda_refresh: int = 1) -> LearnerState:
    """One robust step on cell (x, a) after observing x -> x_next. Mutates and returns ``ls``."""
    ls.visits[x, a] += 1
    budget = env.budget
    f = _lookahead(ls, x, a, env)
    if budget == 0.0:
        lam = np.inf
    elif lambda_refresh > 1 and ls.lambdas is not None and (ls.visits[x, a] - 1) % lambda_refresh:
        lam = ls.lambdas[x, a]
    else:
        lam = solve_dual(f, env.cost.values, env.reference[x, a], budget, env.columns(x)).lambda_star
        if ls.lambdas is not None:
            ls.lambdas[x, a] = lam
    target = transform_target(f, env.cost.values, x_next, lam, budget)
    return _advance(ls, x, a, target)


def classical_update(ls: LearnerState, x: int, a: int, x_next: int,
                     env: Environment) -> LearnerState:
    """Watkins step with target r(x, a, x_next) + alpha max_b Q(x_next, b)."""
    ls.visits[x, a] += 1
    target = float(_lookahead(ls, x, a, env)[x_next])
    return _advance(ls, x, a, target)


@dataclass
class Snapshot:
    t: int
    sup_norm_error: float
    epsilon_greedy: float
    seed: int


@dataclass
class TrainResult:
    q: np.ndarray
    visits: np.ndarray
    snapshots: list[Snapshot]
    seed: int
    final_state: int


def train(env: Environment, steps: int, seed: int, config: TrainConfig | None = None,
          q_star: np.ndarray | None = None) -> TrainResult:
    """Run ``steps`` learning steps on a trajectory sampled from the reference kernel.

    When ``q_star`` is given, ||Q_t - Q*||_inf is recorded every ``snapshot_every``
    steps (and at t = 0 and t = steps).
    """
    config = config or TrainConfig()
    if steps < 0:
        raise ValueError("steps must be >= 0")
    rng = make_rng(seed)
    ls = LearnerState.zeros(env.n_states, env.n_actions, config.schedule)
    if config.lambda_refresh > 1:
        ls.lambdas = np.full((env.n_states, env.n_actions), np.inf)
    x = env.x0 if config.x0 is None else config.x0
    if not 0 <= x < env.n_states:
        raise ValueError(f"x0={x} is not a state index")
    snapshots: list[Snapshot] = []

    def snap(t: int) -> None:
        if q_star is not None:
            err = float(np.max(np.abs(ls.q - q_star)))
            snapshots.append(Snapshot(t, err, config.exploration(t), seed))

    snap(0)
    for t in range(steps):
        a = select_action(ls.q, x, config.exploration(t), rng)
        x_next = sample_next(env.reference, x, a, rng)
        if config.robust:
            robust_update(ls, x, a, x_next, env, config.lambda_refresh)
        else:
            classical_update(ls, x, a, x_next, env)
        x = x_next
        done = t + 1
        if done % config.snapshot_every == 0 and done != steps:
            snap(done)
    if steps > 0:
        snap(steps)
    return TrainResult(ls.q, ls.visits, snapshots, seed, x)

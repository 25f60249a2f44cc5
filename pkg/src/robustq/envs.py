"""Coin toss, self-exciting two-armed bandit and history-state stock prediction."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .mdp import ActionSpace, ProblemSpec, StateSpace, make_rng, policy_matrix, validate_kernel
from .wasserstein import CostMatrix, cost_c1, cost_c2

SYMBOLS = (-2, -1, 1, 2)
DEFAULT_THRESHOLD = 0.01
DEFAULT_KAPPA = 1e-3


@dataclass(frozen=True, eq=False)
class Environment:
    """Finite robust MDP: spaces, reward r(x, a, y), reference kernel, ball and cost.

    ``successors`` is set for history-state problems: row ``x`` lists the states
    reachable at finite cost from the reference support of any ``(x, a)``.
    """

    name: str
    states: StateSpace
    actions: ActionSpace
    reward: np.ndarray
    reference: np.ndarray
    spec: ProblemSpec
    cost: CostMatrix
    x0: int = 0
    successors: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n, m = len(self.states), len(self.actions)
        if self.reward.shape != (n, m, n):
            raise ValueError(f"reward shape {self.reward.shape} != {(n, m, n)}")
        if self.reference.shape != (n, m, n):
            raise ValueError(f"kernel shape {self.reference.shape} != {(n, m, n)}")
        if not np.all(np.isfinite(self.reward)):
            raise ValueError("reward entries must be finite")
        if self.cost.n != n:
            raise ValueError("cost matrix does not match the state space")
        if not 0 <= self.x0 < n:
            raise ValueError(f"x0={self.x0} is not a state index")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def budget(self) -> float:
        return 0.0 if self.spec.setting == "none" else self.spec.budget

    def columns(self, x: int) -> np.ndarray | None:
        return None if self.successors is None else self.successors[x]

    def with_epsilon(self, epsilon: float) -> "Environment":
        return replace(self, spec=replace(self.spec, epsilon=float(epsilon)))

    def with_alpha(self, alpha: float) -> "Environment":
        return replace(self, spec=replace(self.spec, alpha=float(alpha)))

    def with_kernel(self, kernel: np.ndarray) -> "Environment":
        return replace(self, reference=kernel)

    def with_order(self, q: int) -> "Environment":
        """Same problem under Wasserstein order ``q`` (cost raised accordingly)."""
        spec = replace(self.spec, q=int(q))
        if spec.setting == "setting2":
            cost = cost_c2(self.states, spec.history, spec.q)
        else:
            cost = cost_c1(self.states, spec.q)
        return replace(self, spec=spec, cost=cost)

    def with_setting(self, setting: str) -> "Environment":
        return replace(self, spec=replace(self.spec, setting=setting))

    def validate(self) -> list[str]:
        return validate_kernel(self.reference)


def binomial_pmf(n: int, p: float) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return np.array([math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)])


# coin toss ---------------------------------------------------------------

COIN_ACTIONS = (-1, 0, 1)


def coin_toss_reward(n_coins: int = 10) -> np.ndarray:
    x = np.arange(n_coins + 1)[:, None, None]
    a = np.array(COIN_ACTIONS, dtype=float)[None, :, None]
    y = np.arange(n_coins + 1)[None, None, :]
    return a * (x < y) - a * (x > y) - np.abs(a) * (x == y)


def coin_toss_kernel(p: float, n_coins: int = 10) -> np.ndarray:
    row = binomial_pmf(n_coins, p)
    n = n_coins + 1
    return np.broadcast_to(row, (n, len(COIN_ACTIONS), n)).copy()


def coin_toss_env(epsilon: float = 0.0, alpha: float = 0.45, p_hat: float = 0.5,
                  n_coins: int = 10, x0: int = 0) -> Environment:
    """Bet on whether the number of heads among ``n_coins`` rises (+1), falls (-1) or skip (0)."""
    states = StateSpace(np.arange(n_coins + 1))
    return Environment(
        name="coin_toss",
        states=states,
        actions=ActionSpace(COIN_ACTIONS),
        reward=coin_toss_reward(n_coins),
        reference=coin_toss_kernel(p_hat, n_coins),
        spec=ProblemSpec(alpha=alpha, epsilon=epsilon, q=1, setting="setting1"),
        cost=cost_c1(states, 1),
        x0=x0,
        params={"p_hat": p_hat, "n_coins": n_coins},
    )


# self-exciting bandit ----------------------------------------------------

BANDIT_RETURNS = (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5)
BANDIT_AMOUNTS = (1, 2, 3, 4, 5)
BANDIT_ARMS = (1, 2)


def bandit_spaces() -> tuple[StateSpace, ActionSpace]:
    states = StateSpace(list(itertools.product(BANDIT_RETURNS, BANDIT_ARMS)))
    actions = ActionSpace(list(itertools.product(BANDIT_AMOUNTS, BANDIT_ARMS)))
    return states, actions


def bandit_kernel(p_hat: Sequence[float], excite: float) -> np.ndarray:
    """Win with p = p_hat[arm] + excite * sgn(last return) if the same arm is replayed."""
    states, actions = bandit_spaces()
    n, m = len(states), len(actions)
    kernel = np.zeros((n, m, n))
    for (x, (x1, x2)), (a, (a1, a2)) in itertools.product(
            enumerate(states.points), enumerate(actions.actions)):
        p = p_hat[int(a2) - 1] + excite * np.sign(x1) * (x2 == a2)
        if not -1e-12 <= p <= 1.0 + 1e-12:
            raise ValueError(f"success probability {p:.3f} outside [0, 1]")
        p = min(max(p, 0.0), 1.0)
        kernel[x, a, states.index((a1, a2))] += p
        kernel[x, a, states.index((-a1, a2))] += 1.0 - p
    return kernel


def bandit_env(p_hat: Sequence[float] = (0.4, 0.6), excite: float = 0.1,
               epsilon: float = 0.0, alpha: float = 0.45, x0: int = 0) -> Environment:
    states, actions = bandit_spaces()
    n, m = len(states), len(actions)
    # reward is the realised return x'_1 whatever the state and action
    reward = np.broadcast_to(states.points[:, 0], (n, m, n)).copy()
    return Environment(
        name="bandit",
        states=states,
        actions=actions,
        reward=reward,
        reference=bandit_kernel(p_hat, excite),
        spec=ProblemSpec(alpha=alpha, epsilon=epsilon, q=1, setting="setting1"),
        cost=cost_c1(states, 1),
        x0=x0,
        params={"p_hat": list(p_hat), "excite": excite},
    )


def mean_invested(env: Environment, policy: Sequence[int]) -> float:
    """Average first action component (amount invested) over all states."""
    return float(env.actions.actions[np.asarray(policy, dtype=int), 0].mean())


# stock movement prediction -----------------------------------------------

@dataclass(frozen=True, eq=False)
class ReturnSeries:
    encoded: np.ndarray
    raw: np.ndarray | None = None
    threshold: float = DEFAULT_THRESHOLD
    dates: list[str] | None = None

    def __post_init__(self):
        enc = np.asarray(self.encoded, dtype=int)
        if not np.all(np.isin(enc, SYMBOLS)):
            raise ValueError(f"encoded symbols must lie in {SYMBOLS}")
        object.__setattr__(self, "encoded", enc)

    def __len__(self) -> int:
        return len(self.encoded)

    def counts(self) -> dict[int, int]:
        return {s: int(np.sum(self.encoded == s)) for s in SYMBOLS}

    def split(self, n_train: int) -> tuple["ReturnSeries", "ReturnSeries"]:
        def part(sl):
            return ReturnSeries(self.encoded[sl], None if self.raw is None else self.raw[sl],
                                self.threshold, None if self.dates is None else self.dates[sl])
        return part(slice(0, n_train)), part(slice(n_train, None))


def encode_returns(raw: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> ReturnSeries:
    """Map returns to {-2, -1, 1, 2}; zero counts as slightly positive."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    r = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("returns must be finite")
    enc = np.where(r > threshold, 2,
                   np.where(r >= 0, 1, np.where(r >= -threshold, -1, -2)))
    return ReturnSeries(enc, r, threshold)


def decode_symbols(encoded: Sequence[int], threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Representative return for each symbol (re-encodes to the same symbol)."""
    rep = {2: 2.0 * threshold, 1: 0.5 * threshold, -1: -0.5 * threshold, -2: -2.0 * threshold}
    return np.array([rep[int(s)] for s in encoded])


def load_returns_csv(path: str | Path, threshold: float = DEFAULT_THRESHOLD) -> ReturnSeries:
    """Read ``return`` or ``date,return`` rows; a non-numeric first row is a header."""
    rows = [row for row in csv.reader(Path(path).read_text().splitlines()) if row]
    if not rows:
        raise ValueError(f"{path}: no rows")

    def numeric(s: str) -> bool:
        try:
            float(s)
            return True
        except ValueError:
            return False

    if not numeric(rows[0][-1]):
        rows = rows[1:]
    width = {len(r) for r in rows}
    if width not in ({1}, {2}):
        raise ValueError(f"{path}: expected 1 or 2 columns per row")
    raw = [float(r[-1]) for r in rows]
    dates = [r[0] for r in rows] if width == {2} else None
    series = encode_returns(raw, threshold)
    return ReturnSeries(series.encoded, series.raw, threshold, dates)


def symbol_codes(encoded: np.ndarray) -> np.ndarray:
    lookup = {s: i for i, s in enumerate(SYMBOLS)}
    return np.array([lookup[int(s)] for s in encoded], dtype=np.int64)


def window_counts(encoded: np.ndarray, h: int) -> np.ndarray:
    """Occurrences of each length-h window, indexed by its base-|T| code."""
    k = len(SYMBOLS)
    codes = symbol_codes(encoded)
    n_win = len(codes) - h + 1
    if n_win <= 0:
        return np.zeros(k**h, dtype=np.int64)
    win = np.zeros(n_win, dtype=np.int64)
    for offset in range(h):
        win = win * k + codes[offset:offset + n_win]
    return np.bincount(win, minlength=k**h)


def stock_states(h: int) -> StateSpace:
    return StateSpace(list(itertools.product(SYMBOLS, repeat=h)))


def stock_successors(h: int) -> np.ndarray:
    """Row x holds the |T| states (pi(x), i) for i in T, in symbol order."""
    k = len(SYMBOLS)
    n = k**h
    x = np.arange(n)
    return (x % k ** (h - 1))[:, None] * k + np.arange(k)[None, :]


def empirical_kernel(series: ReturnSeries, h: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Smoothed window-frequency transition matrix over T^h, shape (|T|^h, |T|^h).

    The next symbol after history x has probability
    (count(pi(x), i) + kappa/4) / (kappa + sum_j count(pi(x), j)).
    """
    if h < 2:
        raise ValueError("h must be >= 2")
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if len(series) < h:
        raise ValueError(f"series of length {len(series)} is shorter than h={h}")
    k = len(SYMBOLS)
    counts = window_counts(series.encoded, h).astype(float)
    succ = stock_successors(h)
    n = k**h
    c = counts[succ]  # (n, k)
    probs = (c + kappa / k) / (kappa + c.sum(axis=1, keepdims=True))
    kernel = np.zeros((n, n))
    kernel[np.arange(n)[:, None], succ] = probs
    return kernel


def stock_env(series: ReturnSeries, h: int = 5, kappa: float = DEFAULT_KAPPA,
              epsilon: float = 0.0, alpha: float = 0.45, x0: int = 0) -> Environment:
    states = stock_states(h)
    n, m = len(states), len(SYMBOLS)
    last = states.points[:, -1]
    reward = np.broadcast_to(
        (last[None, None, :] == np.array(SYMBOLS, dtype=float)[None, :, None]).astype(float),
        (n, m, n))
    kernel = np.broadcast_to(empirical_kernel(series, h, kappa)[:, None, :], (n, m, n))
    return Environment(
        name="stock",
        states=states,
        actions=ActionSpace(SYMBOLS),
        reward=reward,
        reference=kernel,
        spec=ProblemSpec(alpha=alpha, epsilon=epsilon, q=1, setting="setting2", history=h),
        cost=cost_c2(states, h, 1),
        x0=x0,
        successors=stock_successors(h),
        params={"h": h, "kappa": kappa, "threshold": series.threshold},
    )


def history_index(window: Sequence[int]) -> int:
    """State index of a length-h window of symbols."""
    idx = 0
    for code in symbol_codes(np.asarray(window)):
        idx = idx * len(SYMBOLS) + int(code)
    return idx


def backtest_accuracy(env: Environment, policy: Sequence[int], history: np.ndarray,
                      evaluation: np.ndarray) -> float:
    """Share of correct next-symbol predictions over ``evaluation``.

    Each prediction uses the h symbols preceding the target day; the first ones
    reach back into ``history``.
    """
    h = env.spec.history
    series = np.concatenate([np.asarray(history, dtype=int), np.asarray(evaluation, dtype=int)])
    start = len(history)
    if start < h:
        raise ValueError(f"need at least h={h} history symbols before the evaluation window")
    policy = np.asarray(policy, dtype=int)
    hits = 0
    for t in range(start, len(series)):
        x = history_index(series[t - h:t])
        hits += int(SYMBOLS[policy[x]] == series[t])
    return hits / (len(series) - start)


# rollouts ----------------------------------------------------------------

@numba.njit(cache=True)
def _walk(cdf, uniforms, x0, last_positive):
    states = np.empty(len(uniforms) + 1, dtype=np.int64)
    states[0] = x0
    x = x0
    n = cdf.shape[1]
    for t in range(len(uniforms)):
        j = np.searchsorted(cdf[x], uniforms[t], side="right")
        if j >= n:
            j = last_positive[x]
        x = j
        states[t + 1] = x
    return states


@dataclass
class Rollout:
    total: float
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray


def rollout(policy: Sequence[int], true_kernel: np.ndarray, reward: np.ndarray, steps: int,
            seed: int, x0: int = 0) -> Rollout:
    """Play a stationary policy for ``steps`` rounds under ``true_kernel``.

    Uses one uniform per round and the same inverse-CDF rule as ``sample_next``,
    so the path equals repeated ``sample_next`` calls on a generator seeded alike.
    """
    policy = np.asarray(policy, dtype=int)
    P = np.ascontiguousarray(policy_matrix(true_kernel, policy))
    cdf = np.cumsum(P, axis=1)
    last_positive = np.array([np.flatnonzero(row > 0)[-1] for row in P], dtype=np.int64)
    uniforms = make_rng(seed).random(steps)
    states = _walk(cdf, uniforms, int(x0), last_positive)
    acts = policy[states[:-1]]
    rewards = reward[states[:-1], acts, states[1:]]
    return Rollout(float(rewards.sum()), states, acts, rewards)

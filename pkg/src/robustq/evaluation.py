"""Exact expected profits used as oracles for Monte Carlo rollouts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import expected_reward, policy_matrix


@dataclass(frozen=True)
class Moments:
    """Mean and standard deviation of the total reward over ``rounds`` rounds."""

    rounds: int
    mean: float
    std: float

    @property
    def per_round(self) -> float:
        return self.mean / self.rounds

    def z_score(self, total: float) -> float:
        if self.std == 0.0:
            return 0.0 if total == self.mean else math.copysign(math.inf, total - self.mean)
        return (total - self.mean) / self.std


def iid_total_moments(policy: Sequence[int], reward: np.ndarray, pmf: np.ndarray,
                      rounds: int, x0: int = 0) -> Moments:
    """Exact moments of sum_t r(X_t, pi(X_t), X_{t+1}) when X_1, X_2, ... are i.i.d. ``pmf``.

    Consecutive terms share a state, so the variance carries a lag-1 covariance;
    the first term starts from the fixed state ``x0``.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    policy = np.asarray(policy, dtype=int)
    pmf = np.asarray(pmf, dtype=float)
    n = len(pmf)
    g = reward[np.arange(n), policy, :]          # g[x, y] = r(x, pi(x), y)
    mu_row = g @ pmf                              # E[g(x, Y)]
    mu_col = pmf @ g                              # E[g(X, y)]
    mu = float(pmf @ mu_row)
    var = float(pmf @ ((g**2) @ pmf)) - mu**2
    # Cov(g(X_t, X_{t+1}), g(X_{t+1}, X_{t+2})) for t >= 1
    cov = float(pmf @ (mu_col * mu_row)) - mu**2
    first = g[x0]
    mu0 = float(first @ pmf)
    var0 = float((first**2) @ pmf) - mu0**2
    cov0 = float(pmf @ (first * mu_row)) - mu0 * mu
    mean = mu0 + (rounds - 1) * mu
    variance = var0 + (rounds - 1) * var
    if rounds >= 2:
        variance += 2.0 * cov0 + 2.0 * (rounds - 2) * cov
    return Moments(rounds, mean, math.sqrt(max(variance, 0.0)))


def markov_expected_total(kernel: np.ndarray, reward: np.ndarray, policy: Sequence[int],
                          rounds: int, x0: int = 0) -> float:
    """Exact E[sum_{t < rounds} r(X_t, pi(X_t), X_{t+1})] from X_0 = x0."""
    P = policy_matrix(kernel, policy)
    r_bar = expected_reward(kernel, reward, policy)
    dist = np.zeros(len(r_bar))
    dist[x0] = 1.0
    total = 0.0
    for _ in range(rounds):
        total += float(dist @ r_bar)
        dist = dist @ P
    return total


def markov_per_round(kernel: np.ndarray, reward: np.ndarray, policy: Sequence[int],
                     rounds: int, x0: int = 0) -> float:
    return markov_expected_total(kernel, reward, policy, rounds, x0) / rounds

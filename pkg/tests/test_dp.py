import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustq.dp import (TIE_TOL, bellman_H, greedy_action, greedy_policy, iteration_bound,
                        top_two_gap, value_iteration)
from robustq.dual import DualInstance, primal_worst_case_lp
from robustq.envs import Environment, bandit_env, coin_toss_env, coin_toss_kernel
from robustq.mdp import ActionSpace, NumericFailure, ProblemSpec, StateSpace
from robustq.wasserstein import cost_c1


def small_env(seed, eps=0.3, alpha=0.7, n=3, m=2, q=1):
    rng = np.random.default_rng(seed)
    states = StateSpace(rng.normal(size=(n, 2)))
    return Environment(
        name="random",
        states=states,
        actions=ActionSpace(np.arange(m)),
        reward=rng.uniform(-1, 1, size=(n, m, n)),
        reference=rng.dirichlet(np.ones(n), size=(n, m)),
        spec=ProblemSpec(alpha=alpha, epsilon=eps, q=q, setting="setting1"),
        cost=cost_c1(states, q),
    )


class TestGreedy:
    def test_tie_goes_to_smallest_index(self):
        assert greedy_action(np.array([1.0, 1.0, 0.5])) == 0
        assert greedy_action(np.array([0.5, 1.0, 1.0 + TIE_TOL / 2])) == 1

    def test_clear_winner(self):
        assert greedy_action(np.array([0.0, 1.0 + 1e-9, 1.0])) == 1

    def test_policy_and_gap(self):
        q = np.array([[0.0, 2.0, 1.0], [3.0, 3.0, -1.0]])
        assert list(greedy_policy(q)) == [1, 0]
        assert list(top_two_gap(q)) == [1.0, 0.0]


class TestOperator:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(0, 10_000))
    def test_contraction(self, env_seed, q_seed):
        env = small_env(env_seed, eps=float(env_seed % 4) * 0.25)
        rng = np.random.default_rng(q_seed)
        q1, q2 = rng.normal(size=(2, 3, 2)) * 5
        lhs = np.max(np.abs(bellman_H(q1, env) - bellman_H(q2, env)))
        assert lhs <= env.spec.alpha * np.max(np.abs(q1 - q2)) + 1e-12

    def test_zero_radius_is_classical(self):
        env = small_env(1, eps=0.0)
        q = np.random.default_rng(2).normal(size=(3, 2))
        V = q.max(axis=1)
        classical = np.einsum("xay,xay->xa", env.reference, env.reward + env.spec.alpha * V)
        assert np.allclose(bellman_H(q, env), classical, atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_entries_equal_transport_lp(self, seed):
        env = small_env(seed, eps=0.4, q=1 + seed % 2)
        q = np.random.default_rng(seed).normal(size=(3, 2))
        H = bellman_H(q, env)
        V = q.max(axis=1)
        for x in range(3):
            for a in range(2):
                inst = DualInstance(env.reward[x, a] + env.spec.alpha * V, env.cost,
                                    env.reference[x, a], env.spec.epsilon, env.spec.q)
                assert H[x, a] == pytest.approx(primal_worst_case_lp(inst), abs=1e-9)

    def test_threads_are_deterministic(self):
        env = bandit_env(epsilon=0.5)
        q = np.random.default_rng(0).normal(size=(env.n_states, env.n_actions))
        assert np.array_equal(bellman_H(q, env, threads=1), bellman_H(q, env, threads=4))

    def test_setting_none_ignores_radius(self):
        env = small_env(4, eps=1.0)
        q = np.ones((3, 2))
        assert np.array_equal(bellman_H(q, env.with_setting("none")),
                              bellman_H(q, env.with_epsilon(0.0)))


class TestValueIteration:
    @pytest.mark.parametrize("seed", range(5))
    def test_fixed_point(self, seed):
        env = small_env(seed)
        res = value_iteration(env, tol=1e-12)
        assert np.max(np.abs(bellman_H(res.q, env) - res.q)) <= 1e-11

    def test_zero_reward_single_sweep(self):
        env = coin_toss_env(0.5)
        env = Environment(env.name, env.states, env.actions, np.zeros_like(env.reward),
                          env.reference, env.spec, env.cost)
        res = value_iteration(env)
        assert res.iterations == 1 and np.all(res.q == 0)

    def test_within_iteration_bound(self):
        env = small_env(7, alpha=0.9)
        first = np.max(np.abs(bellman_H(np.zeros((3, 2)), env)))
        res = value_iteration(env, tol=1e-10)
        assert res.iterations <= iteration_bound(first, 0.9, 1e-10)

    def test_iteration_bound_trivial(self):
        assert iteration_bound(1e-12, 0.5, 1e-10) == 1
        assert iteration_bound(1.0, 0.5, 0.25) == 4

    def test_monotone_in_radius(self):
        env = small_env(11)
        qs = [value_iteration(env.with_epsilon(e)).q for e in (0.0, 0.1, 0.5, 1.0, 3.0)]
        for lo, hi in zip(qs[1:], qs[:-1]):
            assert np.all(lo <= hi + 1e-9)

    def test_max_iter(self):
        with pytest.raises(NumericFailure) as info:
            value_iteration(coin_toss_env(0.0), max_iter=2)
        assert info.value.residual > 1e-10

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            value_iteration(small_env(0), tol=0)


class TestCoinToss:
    def test_zero_radius_closed_form(self, coin_qstar):
        # i.i.d. next states: Q(x, a) = m(x, a) + alpha E[V(Y)] with E[V] = E[max_a m] / (1 - alpha)
        p = coin_toss_kernel(0.5)[0, 0]
        env = coin_toss_env(0.0)
        m = env.reward @ p
        ev = p @ m.max(axis=1) / (1 - 0.45)
        assert np.allclose(coin_qstar(0.0), m + 0.45 * ev, atol=1e-9)

    @pytest.mark.parametrize("eps", [0.0, 0.5, 1.0, 2.0])
    def test_reflection_symmetry(self, coin_qstar, eps):
        # x -> 10 - x with a -> -a maps the fair game onto itself
        q = coin_qstar(eps)
        mirrored = q[::-1, ::-1]
        assert np.allclose(q, mirrored, atol=1e-9)
        best = [set(np.flatnonzero(row >= row.max() - 1e-9)) for row in q]
        for x in range(11):
            assert {2 - a for a in best[10 - x]} == best[x]

    def test_large_radius_value_is_zero(self, coin_qstar):
        q = coin_qstar(2.0)
        assert np.all(q.max(axis=1) >= -1e-12)
        assert np.all(q[:, 1] == pytest.approx(0.0, abs=1e-12))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustq.mdp import (ActionSpace, NumericFailure, ProblemSpec, StateSpace, draw_index,
                         evaluate_policy_exact, make_rng, policy_matrix, sample_next,
                         validate_kernel)


class TestSpaces:
    def test_index_roundtrip(self):
        s = StateSpace([[0, 0], [3, 4], [1, 2]])
        assert [s.index(p) for p in s.points] == [0, 1, 2]
        assert s.dim == 2

    def test_scalar_points_become_columns(self):
        assert StateSpace([1, 2, 3]).points.shape == (3, 1)

    @pytest.mark.parametrize("points", [[], [[0, 1], [0, 1]], [[0, 1], [np.inf, 0]]])
    def test_invalid_states(self, points):
        with pytest.raises(ValueError):
            StateSpace(points)

    def test_duplicate_actions(self):
        with pytest.raises(ValueError):
            ActionSpace([1, 1])

    def test_unknown_point(self):
        with pytest.raises(KeyError):
            StateSpace([0, 1]).index(5)


class TestProblemSpec:
    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.0), dict(alpha=0.5, epsilon=-1),
                                    dict(alpha=0.5, q=0), dict(alpha=0.5, q=1.5),
                                    dict(alpha=0.5, setting="other"),
                                    dict(alpha=0.5, setting="setting2")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ProblemSpec(**kw)

    def test_budget(self):
        assert ProblemSpec(0.5, epsilon=0.5, q=2).budget == 0.25


class TestValidateKernel:
    def test_simplex_point(self):
        assert validate_kernel([0.5, 0.5]) == []

    def test_row_sum(self):
        (msg,) = validate_kernel([0.5, 0.6])
        assert "row sum 1.1" in msg

    def test_negative(self):
        msgs = validate_kernel([-0.1, 1.1])
        assert any("negative weight" in m for m in msgs)

    def test_reports_every_row(self):
        k = np.full((2, 2, 2), 0.5)
        k[1, 0] = (0.2, 0.2)
        k[0, 1] = (0.7, 0.7)
        assert len(validate_kernel(k)) == 2

    def test_tolerance_is_1e12(self):
        assert validate_kernel([0.5, 0.5 + 5e-13]) == []
        assert validate_kernel([0.5, 0.5 + 5e-12]) != []


class TestSampling:
    def test_point_mass(self):
        k = np.zeros((1, 1, 5))
        k[0, 0, 3] = 1.0
        rng = make_rng(0)
        assert {sample_next(k, 0, 0, rng) for _ in range(100)} == {3}

    def test_fair_coin_frequency(self):
        k = np.full((1, 1, 2), 0.5)
        rng = make_rng(1)
        draws = [sample_next(k, 0, 0, rng) for _ in range(1_000_000)]
        assert abs(np.mean(np.array(draws) == 0) - 0.5) <= 0.002

    def test_same_seed_same_stream(self):
        k = np.full((1, 1, 4), 0.25)
        a = [sample_next(k, 0, 0, make_rng(42)) for _ in range(3)]
        r1, r2 = make_rng(42), make_rng(42)
        assert [sample_next(k, 0, 0, r1) for _ in range(50)] == \
            [sample_next(k, 0, 0, r2) for _ in range(50)]
        assert len(set(a)) == 1

    @pytest.mark.parametrize("x,a", [(-1, 0), (1, 0), (0, 2)])
    def test_bad_index(self, x, a):
        with pytest.raises(IndexError):
            sample_next(np.full((1, 2, 2), 0.5), x, a, make_rng(0))

    def test_rounding_gap_returns_last_positive(self):
        w = np.array([0.3, 0.3, 0.4 - 1e-15, 0.0])
        assert draw_index(w, 1.0 - 1e-17) == 2

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda w: sum(w) > 0),
           st.floats(0.0, 1.0, exclude_max=True))
    def test_draw_hits_positive_weight(self, w, u):
        w = np.array(w) / sum(w)
        assert w[draw_index(w, u)] > 0


class TestPolicyEvaluation:
    def test_zero_reward(self):
        k = np.full((3, 2, 3), 1 / 3)
        V = evaluate_policy_exact(k, np.zeros((3, 2, 3)), [0, 1, 0], 0.9)
        assert np.all(V == 0)

    def test_unit_reward(self):
        k = np.full((3, 2, 3), 1 / 3)
        V = evaluate_policy_exact(k, np.ones((3, 2, 3)), [0, 1, 0], 0.9)
        assert np.allclose(V, 10.0, atol=1e-10)

    def test_two_state_linear_solve(self):
        rng = np.random.default_rng(3)
        k = rng.dirichlet(np.ones(2), size=(2, 2))
        r = rng.normal(size=(2, 2, 2))
        pol = [1, 0]
        V = evaluate_policy_exact(k, r, pol, 0.5)
        P = policy_matrix(k, pol)
        rbar = np.array([P[x] @ r[x, pol[x]] for x in range(2)])
        assert np.allclose(V, np.linalg.solve(np.eye(2) - 0.5 * P, rbar), atol=1e-11)

    def test_residual_contract(self):
        rng = np.random.default_rng(5)
        k = rng.dirichlet(np.ones(6), size=(6, 3))
        r = rng.normal(size=(6, 3, 6))
        pol = rng.integers(3, size=6)
        V = evaluate_policy_exact(k, r, pol, 0.95)
        P = policy_matrix(k, pol)
        rbar = np.einsum("xy,xy->x", P, r[np.arange(6), pol])
        assert np.max(np.abs(V - (rbar + 0.95 * P @ V))) <= 1e-10

    def test_iteration_cap(self):
        k = np.full((2, 1, 2), 0.5)
        with pytest.raises(NumericFailure) as info:
            evaluate_policy_exact(k, np.ones((2, 1, 2)), [0, 0], 0.99, max_iter=3)
        assert info.value.residual > 0

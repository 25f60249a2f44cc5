import json

import numpy as np
import pytest

from robustq import config
from robustq.config import ConfigError, build_env, train_config
from robustq.envs import bandit_env, coin_toss_env
from robustq.io import (read_distribution, read_policy, read_qtable, report_csv, snapshot_csv,
                        write_distribution, write_policy, write_qtable)
from robustq.qlearning import Snapshot


class TestQTable:
    def test_roundtrip(self, tmp_path):
        env = coin_toss_env(0.5)
        q = np.random.default_rng(0).normal(size=(11, 3))
        write_qtable(tmp_path / "q.json", q, env, 1e-10, seed=3)
        back, data = read_qtable(tmp_path / "q.json")
        assert np.array_equal(back, q)
        assert data["meta"] == {"alpha": 0.45, "epsilon": 0.5, "q": 1, "setting": "setting1",
                                "tol": 1e-10, "seed": 3}
        assert data["states"][3] == [3.0] and data["actions"][0] == [-1.0]

    def test_shape_mismatch(self, tmp_path):
        p = tmp_path / "q.json"
        p.write_text(json.dumps({"states": [[0]], "actions": [[0], [1]], "q": [[0.0]],
                                 "meta": {}}))
        with pytest.raises(ValueError):
            read_qtable(p)

    def test_missing_key(self, tmp_path):
        p = tmp_path / "q.json"
        p.write_text(json.dumps({"states": [[0]]}))
        with pytest.raises(ValueError):
            read_qtable(p)


class TestPolicy:
    def test_coin_roundtrip(self, tmp_path):
        env = coin_toss_env()
        pol = np.random.default_rng(1).integers(3, size=11)
        write_policy(tmp_path / "p.csv", pol, env)
        text = (tmp_path / "p.csv").read_text().splitlines()
        assert text[0] == "state_index,action_value"
        assert np.array_equal(read_policy(tmp_path / "p.csv", env), pol)

    def test_bandit_vector_actions(self, tmp_path):
        env = bandit_env()
        pol = np.arange(20) % 10
        write_policy(tmp_path / "p.csv", pol, env)
        assert "0,1;1" in (tmp_path / "p.csv").read_text()
        assert np.array_equal(read_policy(tmp_path / "p.csv", env), pol)

    def test_wrong_length(self, tmp_path):
        write_policy(tmp_path / "p.csv", [1] * 11, coin_toss_env())
        with pytest.raises(ValueError):
            read_policy(tmp_path / "p.csv", bandit_env())

    def test_unknown_action(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("state_index,action_value\n" + "".join(f"{x},7\n" for x in range(11)))
        with pytest.raises(ValueError):
            read_policy(p, coin_toss_env())


class TestCsv:
    def test_snapshot_header(self):
        text = snapshot_csv([Snapshot(0, 1.5, 0.1, 2)])
        assert text == "t,sup_norm_error,epsilon_greedy,seed\n0,1.5,0.1,2\n"

    def test_report_keeps_precision(self):
        assert report_csv(["a"], [[1 / 3]]) == "a\n0.3333333333333333\n"

    def test_distribution_roundtrip(self, tmp_path):
        write_distribution(tmp_path / "d.csv", [0, 1, 2], [0.25, 0.5, 0.25])
        d = read_distribution(tmp_path / "d.csv")
        assert list(d.weights) == [0.25, 0.5, 0.25]
        (tmp_path / "e.csv").write_text("0,1\n")
        assert list(read_distribution(tmp_path / "e.csv").weights) == [1.0]

    def test_distribution_bad_rows(self, tmp_path):
        (tmp_path / "d.csv").write_text("support_value,weight\n0,0.5,1\n")
        with pytest.raises(ValueError):
            read_distribution(tmp_path / "d.csv")


class TestConfig:
    def test_defaults(self):
        cfg = config.load(None)
        assert cfg["alpha"] == 0.45 and cfg["steps"] == 50_000
        assert cfg["exploration"]["eps_tilde"] == 0.1 and cfg["schedule"]["beta"] == 1.0
        tc = train_config(cfg)
        assert tc.schedule.rate(0) == 1.0 and tc.eps_tilde == 0.1

    @pytest.mark.parametrize("raw", [{"alpah": 0.4}, {"alpha": 1.0}, {"epsilon": -1},
                                     {"exploration": {"eps": 0.1}},
                                     {"env": {"type": "coin_toss", "params": {"p": 0.4}}},
                                     {"env": {"type": "maze"}}, {"schedule": {"beta": 0.5}}])
    def test_rejects(self, raw):
        with pytest.raises(ConfigError):
            config.validate(raw)

    def test_unreadable(self, tmp_path):
        (tmp_path / "c.json").write_text("{not json")
        with pytest.raises(ConfigError):
            config.load(tmp_path / "c.json")
        with pytest.raises(ConfigError):
            config.load(tmp_path / "missing.json")

    def test_nested_merge(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"exploration": {"decay": 0.99}}))
        cfg = config.load(tmp_path / "c.json")
        assert cfg["exploration"] == {"eps_tilde": 0.1, "decay": 0.99}

    def test_build_bandit(self):
        cfg = config.validate({"env": {"type": "bandit", "params": {"p_hat": [0.5, 0.5]}},
                               "epsilon": 0.3})
        env = build_env(cfg)
        assert env.name == "bandit" and env.spec.epsilon == 0.3
        assert build_env(cfg, epsilon=1.0).spec.epsilon == 1.0

    def test_order_and_setting(self):
        env = build_env(config.validate({"q": 2, "epsilon": 0.5}))
        assert env.spec.q == 2 and env.cost.values[0, 3] == 9 and env.budget == 0.25
        assert build_env(config.validate({"setting": "none", "epsilon": 1.0})).budget == 0.0
        with pytest.raises(ConfigError):
            build_env(config.validate({"setting": "setting2"}))

    def test_stock_needs_csv(self, tmp_path):
        with pytest.raises(ConfigError):
            build_env(config.validate({"env": {"type": "stock"}}))
        (tmp_path / "r.csv").write_text("\n".join(str(v) for v in [0.02, -0.001, 0.003] * 10))
        cfg = config.validate({"env": {"type": "stock",
                                       "params": {"returns_csv": str(tmp_path / "r.csv"),
                                                  "h": 2, "train_rows": 20}}})
        env = build_env(cfg)
        assert env.n_states == 16 and env.spec.setting == "setting2"

    def test_bad_env_params_become_config_errors(self):
        cfg = config.validate({"env": {"type": "bandit",
                                       "params": {"p_hat": [0.95, 0.5], "excite": 0.1}}})
        with pytest.raises(ConfigError):
            build_env(cfg)

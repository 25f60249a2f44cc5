"""Run configuration: JSON in, schema-checked, defaults filled, environment built."""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .envs import Environment, bandit_env, coin_toss_env, load_returns_csv, stock_env
from .qlearning import Schedule, TrainConfig


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "env": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["coin_toss", "bandit", "stock"]},
                "params": {"type": "object"},
            },
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "epsilon": {"type": "number", "minimum": 0},
        "q": {"type": "integer", "minimum": 1},
        "setting": {"enum": ["none", "setting1", "setting2"]},
        "robust": {"type": "boolean"},
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["inv_visits"]},
                "beta": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 1},
            },
        },
        "exploration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps_tilde": _PROB,
                "decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "steps": {"type": "integer", "minimum": 0},
        "snapshot_every": {"type": "integer", "minimum": 1},
        "lambda_refresh": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "seeds": {"type": "integer", "minimum": 1},
        "x0": {"type": ["integer", "null"], "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "policy": {"type": "string"},
                "rounds": {"type": "integer", "minimum": 1},
                "p_true": {"oneOf": [_PROB, {"type": "array", "items": _PROB,
                                             "minItems": 2, "maxItems": 2}]},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "qtable": {"type": "string"},
                "policy": {"type": "string"},
                "snapshots": {"type": "string"},
                "report": {"type": "string"},
            },
        },
    },
}

_ENV_PARAMS = {
    "coin_toss": {"p_hat": _PROB, "n_coins": {"type": "integer", "minimum": 1}},
    "bandit": {"p_hat": {"type": "array", "items": _PROB, "minItems": 2, "maxItems": 2},
               "excite": _NUM},
    "stock": {"returns_csv": {"type": "string"}, "h": {"type": "integer", "minimum": 2},
              "kappa": {"type": "number", "exclusiveMinimum": 0},
              "threshold": {"type": "number", "exclusiveMinimum": 0},
              "train_rows": {"type": ["integer", "null"], "minimum": 1}},
}

DEFAULTS = {
    "env": {"type": "coin_toss", "params": {}},
    "alpha": 0.45,
    "epsilon": 0.0,
    "q": 1,
    "robust": True,
    "schedule": {"family": "inv_visits", "beta": 1.0},
    "exploration": {"eps_tilde": 0.1, "decay": 1.0},
    "steps": 50_000,
    "snapshot_every": 1000,
    "lambda_refresh": 1,
    "seed": 0,
    "seeds": 1,
    "x0": None,
    "tol": 1e-10,
    "max_iter": 10_000,
    "eval": {"rounds": 100_000},
    "outputs": {},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(raw: dict) -> dict:
    """Schema-check ``raw`` and return it merged over the defaults."""
    try:
        jsonschema.validate(raw, SCHEMA)
        cfg = _merge(DEFAULTS, raw)
        params_schema = {"type": "object", "additionalProperties": False,
                         "properties": _ENV_PARAMS[cfg["env"]["type"]]}
        jsonschema.validate(cfg["env"].get("params", {}), params_schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return cfg


def load(path: str | Path | None) -> dict:
    if path is None:
        return validate({})
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return validate(raw)


def build_env(cfg: dict, epsilon: float | None = None) -> Environment:
    params = dict(cfg["env"].get("params", {}))
    kind = cfg["env"]["type"]
    eps = cfg["epsilon"] if epsilon is None else epsilon
    x0 = cfg["x0"] or 0
    try:
        if kind == "coin_toss":
            env = coin_toss_env(eps, cfg["alpha"], x0=x0, **params)
        elif kind == "bandit":
            env = bandit_env(epsilon=eps, alpha=cfg["alpha"], x0=x0, **params)
        else:
            if "returns_csv" not in params:
                raise ConfigError("stock environment needs env.params.returns_csv")
            series = load_returns_csv(params.pop("returns_csv"),
                                      params.pop("threshold", 0.01))
            n_train = params.pop("train_rows", None)
            if n_train is not None:
                series, _ = series.split(n_train)
            env = stock_env(series, epsilon=eps, alpha=cfg["alpha"], x0=x0, **params)
        if cfg["q"] != env.spec.q:
            env = env.with_order(cfg["q"])
        setting = cfg.get("setting")
        if setting == "none":
            env = env.with_setting("none")
        elif setting is not None and setting != env.spec.setting:
            raise ConfigError(f"{kind} uses {env.spec.setting}, not {setting}")
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build environment: {exc}") from None
    return env


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        robust=cfg["robust"],
        eps_tilde=cfg["exploration"]["eps_tilde"],
        decay=cfg["exploration"]["decay"],
        schedule=Schedule(cfg["schedule"]["beta"], cfg["schedule"]["family"]),
        x0=cfg["x0"],
        snapshot_every=cfg["snapshot_every"],
        lambda_refresh=cfg["lambda_refresh"],
    )

"""Readers and writers for Q-tables, policies, snapshots, distributions and reports."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .envs import Environment
from .wasserstein import Distribution


def _text_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    # repr keeps full double precision and is stable across runs
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def qtable_dict(q: np.ndarray, env: Environment, tol: float | None = None, **extra) -> dict:
    meta = {"alpha": env.spec.alpha, "epsilon": env.spec.epsilon, "q": env.spec.q,
            "setting": env.spec.setting, "tol": tol}
    if env.spec.history is not None:
        meta["history"] = env.spec.history
    meta.update(extra)
    return {
        "states": env.states.points.tolist(),
        "actions": env.actions.actions.tolist(),
        "q": np.asarray(q, dtype=float).tolist(),
        "meta": meta,
    }


def write_qtable(path: str | Path, q: np.ndarray, env: Environment, tol: float | None = None,
                 **extra) -> None:
    Path(path).write_text(json.dumps(qtable_dict(q, env, tol, **extra), indent=1) + "\n")


def read_qtable(path: str | Path) -> tuple[np.ndarray, dict]:
    data = json.loads(Path(path).read_text())
    for key in ("states", "actions", "q", "meta"):
        if key not in data:
            raise ValueError(f"{path}: Q-table JSON lacks {key!r}")
    q = np.array(data["q"], dtype=float)
    if q.shape != (len(data["states"]), len(data["actions"])):
        raise ValueError(f"{path}: q has shape {q.shape}, expected "
                         f"{(len(data['states']), len(data['actions']))}")
    return q, data


def _action_label(action: np.ndarray) -> str:
    vals = [int(v) if float(v).is_integer() else float(v) for v in np.atleast_1d(action)]
    return str(vals[0]) if len(vals) == 1 else ";".join(str(v) for v in vals)


def policy_csv(policy: Sequence[int], env: Environment) -> str:
    rows = [(x, _action_label(env.actions.actions[a])) for x, a in enumerate(policy)]
    return _text_csv(("state_index", "action_value"), rows)


def write_policy(path: str | Path, policy: Sequence[int], env: Environment) -> None:
    Path(path).write_text(policy_csv(policy, env))


def read_policy(path: str | Path, env: Environment) -> np.ndarray:
    """Map a policy CSV back to action indices, checking it fits ``env``."""
    rows = list(csv.DictReader(Path(path).read_text().splitlines()))
    labels = {_action_label(a): i for i, a in enumerate(env.actions.actions)}
    if len(rows) != env.n_states:
        raise ValueError(f"policy has {len(rows)} rows, environment has {env.n_states} states")
    policy = np.empty(env.n_states, dtype=int)
    seen = set()
    for row in rows:
        try:
            x = int(row["state_index"])
            a = labels[row["action_value"].strip()]
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"bad policy row {row}") from exc
        if not 0 <= x < env.n_states or x in seen:
            raise ValueError(f"bad or repeated state index {x}")
        seen.add(x)
        policy[x] = a
    return policy


def snapshot_csv(snapshots) -> str:
    rows = [(s.t, _fmt(s.sup_norm_error), _fmt(s.epsilon_greedy), s.seed) for s in snapshots]
    return _text_csv(("t", "sup_norm_error", "epsilon_greedy", "seed"), rows)


def report_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    return _text_csv(header, [[_fmt(v) for v in row] for row in rows])


def read_distribution(path: str | Path) -> Distribution:
    """``support_value,weight`` rows; a non-numeric first row is a header."""
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    if not rows or any(len(r) != 2 for r in rows):
        raise ValueError(f"{path}: expected support_value,weight rows")
    support = [float(r[0]) for r in rows]
    weights = [float(r[1]) for r in rows]
    return Distribution(support, weights)


def write_distribution(path: str | Path, support: Sequence[float], weights: Sequence[float]) -> None:
    Path(path).write_text(_text_csv(("support_value", "weight"),
                                    [(_fmt(float(s)), _fmt(float(w)))
                                     for s, w in zip(support, weights)]))

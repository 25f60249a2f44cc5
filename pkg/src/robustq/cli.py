"""Batch command line: solve, train, eval, reproduce, wasserstein.

Exit codes: 0 success, 1 configuration / input / shape error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io as rio
from . import reproduce
from .dp import greedy_policy, value_iteration
from .envs import bandit_kernel, coin_toss_kernel, load_returns_csv, rollout
from .evaluation import iid_total_moments, markov_expected_total
from .mdp import NumericFailure
from .qlearning import train
from .simplex import LPError
from .wasserstein import CostMatrix, transport_lp, w_distance_1d, wasserstein

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(ValueError):
    pass


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=d(None), help="base seed")
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustq", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="exact robust value iteration")
    _global_flags(s, suppress=True)
    s.add_argument("--epsilon", type=float, help="override the ball radius")

    t = sub.add_parser("train", help="robust or classical Q-learning")
    _global_flags(t, suppress=True)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--steps", type=int)
    t.add_argument("--seeds", type=int, help="number of replicas (seed + index)")
    t.add_argument("--classical", action="store_true", help="non-robust baseline")
    t.add_argument("--no-oracle", action="store_true",
                   help="skip exact Q* and the sup-norm snapshots")

    e = sub.add_parser("eval", help="roll a policy out under a true kernel")
    _global_flags(e, suppress=True)
    e.add_argument("--policy", help="policy CSV (state_index,action_value)")
    e.add_argument("--p-true", type=float, nargs="+", help="coin: p; bandit: p1 p2")
    e.add_argument("--rounds", type=int)
    e.add_argument("--seeds", type=int)

    r = sub.add_parser("reproduce", help="regenerate an experiment table")
    _global_flags(r, suppress=True)
    r.add_argument("table", choices=["table1", "table2", "table4", "table5"])
    r.add_argument("--returns-csv", help="daily returns file (table5)")
    r.add_argument("--split-date", help="first evaluation date (table5)")
    r.add_argument("--eval-rows", type=int, default=100,
                   help="evaluation rows when no split date is given (table5)")
    r.add_argument("--trained", action="store_true",
                   help="table4: use Q-learning policies instead of exact ones")
    r.add_argument("--rounds", type=int, default=reproduce.ROUNDS)

    w = sub.add_parser("wasserstein", help="distance between two distribution CSVs")
    _global_flags(w, suppress=True)
    w.add_argument("p")
    w.add_argument("r")
    w.add_argument("--order", type=int, default=1)
    w.add_argument("--cost", help="CSV cost matrix (entries may be 'inf'); default |x-y|^order")
    return p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args) -> dict:
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _policy_line(env, policy) -> str:
    return " ".join(rio._action_label(env.actions.actions[a]) for a in policy)


def cmd_solve(args) -> int:
    cfg = _load_cfg(args)
    env = cfgmod.build_env(cfg, args.epsilon)
    res = value_iteration(env, tol=cfg["tol"], max_iter=cfg["max_iter"], threads=args.threads)
    out = _out_dir(args)
    outputs = cfg["outputs"]
    rio.write_qtable(out / outputs.get("qtable", "qtable.json"), res.q, env, cfg["tol"],
                     iterations=res.iterations, residual=res.residual)
    rio.write_policy(out / outputs.get("policy", "policy.csv"), res.policy, env)
    print(f"{env.name}: eps={env.spec.epsilon} converged in {res.iterations} sweeps "
          f"(residual {res.residual:.3g})")
    print("policy:", _policy_line(env, res.policy))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    for key in ("steps", "seeds"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.classical:
        cfg["robust"] = False
    env = cfgmod.build_env(cfg, args.epsilon)
    tcfg = cfgmod.train_config(cfg)
    q_star = None
    if not args.no_oracle:
        q_star = value_iteration(env, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                 threads=args.threads).q
    out = _out_dir(args)
    snaps = []
    for k in range(cfg["seeds"]):
        seed = cfg["seed"] + k
        res = train(env, cfg["steps"], seed, tcfg, q_star)
        snaps.extend(res.snapshots)
        policy = greedy_policy(res.q)
        rio.write_qtable(out / f"qtable_seed{seed}.json", res.q, env, None, seed=seed,
                         steps=cfg["steps"], robust=cfg["robust"])
        rio.write_policy(out / f"policy_seed{seed}.csv", policy, env)
        line = f"seed {seed}: " + _policy_line(env, policy)
        if q_star is not None:
            agree = int(np.sum(policy == greedy_policy(q_star)))
            line += f"  ({agree}/{env.n_states} states agree with greedy(Q*))"
        print(line)
    (out / cfg["outputs"].get("snapshots", "snapshots.csv")).write_text(rio.snapshot_csv(snaps))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    env = cfgmod.build_env(cfg)
    policy_path = args.policy or cfg["eval"].get("policy")
    if policy_path is None:
        raise InputError("eval needs --policy or eval.policy in the config")
    policy = rio.read_policy(policy_path, env)
    rounds = args.rounds or cfg["eval"]["rounds"]
    seeds = args.seeds or cfg["seeds"]
    p_true = args.p_true if args.p_true is not None else cfg["eval"].get("p_true")
    if env.name == "coin_toss":
        p = env.params["p_hat"] if p_true is None else np.atleast_1d(p_true)
        if np.size(p) != 1:
            raise InputError("coin toss takes a single --p-true")
        kernel = coin_toss_kernel(float(np.ravel(p)[0]), env.params["n_coins"])
        exact = iid_total_moments(policy, env.reward, kernel[0, 0], rounds, env.x0).mean
    elif env.name == "bandit":
        p = env.params["p_hat"] if p_true is None else list(np.atleast_1d(p_true))
        if len(p) != 2:
            raise InputError("bandit takes --p-true p1 p2")
        kernel = bandit_kernel(p, env.params["excite"])
        exact = markov_expected_total(kernel, env.reward, policy, rounds, env.x0)
    else:
        raise InputError("eval supports coin_toss and bandit; use `reproduce table5` for stock")
    totals = [rollout(policy, kernel, env.reward, rounds, cfg["seed"] + k, env.x0).total
              for k in range(seeds)]
    mean = float(np.mean(totals))
    std = float(np.std(totals, ddof=1)) if seeds > 1 else 0.0
    rows = [[cfg["seed"] + k, tot] for k, tot in enumerate(totals)]
    rows += [["mean", mean], ["std", std], ["exact", exact]]
    out = _out_dir(args)
    (out / cfg["outputs"].get("report", "eval_report.csv")).write_text(
        rio.report_csv(["seed", "total_reward"], rows))
    print(f"{seeds} seeds x {rounds} rounds: mean {mean:.6g} ± {std:.3g} (exact {exact:.6g})")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.table == "table1":
        rep = reproduce.table1(args.threads)
    elif args.table == "table2":
        rep = reproduce.table2(seed, args.rounds, args.threads)
    elif args.table == "table4":
        rep = reproduce.table4(seed, args.rounds, args.trained, args.threads)
    else:
        if not args.returns_csv:
            raise InputError(
                "table5 needs the daily returns file: pass --returns-csv PATH with one "
                "`return` or `date,return` row per day (decimal fractions); the evaluation "
                "window is the last --eval-rows rows or starts at --split-date")
        series = load_returns_csv(args.returns_csv)
        rep = reproduce.table5(series, args.split_date, args.eval_rows, seed=seed)
    print(rep.render())
    out = _out_dir(args)
    (out / f"{args.table}.csv").write_text(rio.report_csv(rep.header, rep.rows))
    return EXIT_OK


def cmd_wasserstein(args) -> int:
    p = rio.read_distribution(args.p)
    r = rio.read_distribution(args.r)
    if p.support.shape != r.support.shape or not np.array_equal(p.support, r.support):
        raise InputError("the two files must list the same support values in the same order")
    if args.cost:
        values = np.loadtxt(args.cost, delimiter=",", ndmin=2)
        total, _ = transport_lp(p.weights, r.weights, CostMatrix(values))
        dist = max(total, 0.0) ** (1.0 / args.order)
    elif args.order == 1 and np.all(np.diff(p.support[:, 0]) > 0):
        dist = w_distance_1d(p, r)
    else:
        dist = wasserstein(p, r, args.order)
    print(repr(float(dist)))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "train": cmd_train, "eval": cmd_eval,
            "reproduce": cmd_reproduce, "wasserstein": cmd_wasserstein}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericFailure as exc:
        print(f"numeric failure: {exc} (residual {exc.residual:.3g})", file=sys.stderr)
        return EXIT_NUMERIC
    except LPError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (cfgmod.ConfigError, InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

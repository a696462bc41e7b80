"""Command-line experiment driver.

Subcommands reproduce the paper-style studies at configurable scale: (p, tau)
sweeps against free-evolution baselines, multi-maze improvement averaging,
timing-noise robustness of a frozen policy, transient-timing scans,
cross-policy generalization, hyper-parameter random search, and exhaustive
oracle checks.  Outputs are plain CSV plus a JSON manifest; identical flags
and seeds reproduce every file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .agent import AgentConfig, QNetwork, save_policy
from .env import EpisodeConfig
from .errors import QMazeError
from .harness import (
    DEFAULT_P_GRID,
    DEFAULT_TAU_GRID,
    SweepConfig,
    TimingNoiseConfig,
    TransientConfig,
    baseline_surface,
    config_hash,
    cross_policy_eval,
    hyperparameter_search,
    mean_improvement_surface,
    timing_noise_eval,
    trained_surface,
    transient_eval,
)
from .maze import generate_perfect_maze, load_maze, save_maze
from .oracle import exhaustive_best_sequence

__all__ = ["main"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[key]) for key in header))
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(out: Path, command: str, config: dict, cells=None, extra=None) -> None:
    manifest = {
        "command": command,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "kernel_backend": BACKEND,
        "config": config,
        "config_hash": config_hash(config),
    }
    if cells is not None:
        manifest["cells"] = cells
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )


def _write_training_csv(path: Path, curves: dict) -> None:
    evals = dict(curves["target_evals"])
    lines = ["epoch,episode_reward,moving_avg,target_greedy_reward,epsilon"]
    latest = None
    for e, (r, m, eps) in enumerate(zip(curves["episode_rewards"],
                                        curves["moving_avg"], curves["epsilons"])):
        latest = evals.get(e, latest)
        tg = "" if latest is None else repr(latest)
        lines.append(f"{e},{r!r},{m!r},{tg},{eps!r}")
    path.write_text("\n".join(lines) + "\n")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _size(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _cell_name(row: dict) -> str:
    return f"{row['maze']}_p{row['p']!r}_tau{row['tau']!r}"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=Path("qmaze-results"),
                        help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=0, help="root RNG seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel worker processes for independent cells")
    parser.add_argument("--strict", action="store_true",
                        help="exit nonzero if any cell fails")


def _add_maze_args(parser: argparse.ArgumentParser, many: bool = False) -> None:
    parser.add_argument("--maze-size", type=_size, default=(6, 6),
                        metavar="WxH", help="grid size for generated mazes")
    if many:
        parser.add_argument("--maze-seed", type=_ints, default=(0,),
                            metavar="S0,S1,...", help="seeds of generated mazes")
        parser.add_argument("--maze-file", type=str, nargs="*", default=[],
                            help="paths of saved mazes (override seeds)")
    else:
        parser.add_argument("--maze-seed", type=int, default=0,
                            help="seed of the generated maze")
        parser.add_argument("--maze-file", type=str, default="",
                            help="path of a saved maze (overrides the seed)")


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=_floats, default=DEFAULT_P_GRID,
                        metavar="P0,P1,...", help="incoherence mixing grid")
    parser.add_argument("--tau", type=_floats, default=DEFAULT_TAU_GRID,
                        metavar="T0,T1,...", help="action spacing grid")
    parser.add_argument("--actions", type=int, default=8, metavar="N",
                        help="actions per episode")
    parser.add_argument("--epochs", type=int, default=1000,
                        help="training epochs per cell")
    parser.add_argument("--reps", type=int, default=1,
                        help="independent trainings per cell (best kept)")
    parser.add_argument("--budget", type=int, default=0,
                        help="hyper-parameter random-search budget per cell (0 = defaults)")


def _add_agent_args(parser: argparse.ArgumentParser) -> None:
    defaults = AgentConfig()
    parser.add_argument("--gamma", type=float, default=defaults.gamma)
    parser.add_argument("--eps-decay", type=float, default=defaults.eps_decay,
                        help="epochs scale of the exploration decay")
    parser.add_argument("--lr", type=float, default=defaults.learning_rate)
    parser.add_argument("--batch", type=int, default=defaults.batch_size)
    parser.add_argument("--memory", type=int, default=defaults.memory_capacity)
    parser.add_argument("--sync", type=int, default=defaults.target_sync,
                        help="target-network sync period (epochs)")
    parser.add_argument("--hidden", type=_ints, default=defaults.hidden_sizes,
                        metavar="H0,H1,...", help="hidden layer sizes")


def _agent_config(args) -> AgentConfig:
    return AgentConfig(
        gamma=args.gamma, eps_decay=args.eps_decay, learning_rate=args.lr,
        batch_size=args.batch, memory_capacity=args.memory,
        target_sync=args.sync, hidden_sizes=tuple(args.hidden),
    )


def _sweep_config(args, many_mazes: bool) -> SweepConfig:
    width, height = args.maze_size
    if many_mazes:
        seeds, files = tuple(args.maze_seed), tuple(args.maze_file)
    else:
        seeds = (args.maze_seed,)
        files = (args.maze_file,) if args.maze_file else ()
    return SweepConfig(
        p_grid=args.p, tau_grid=args.tau, n_actions=args.actions,
        maze_width=width, maze_height=height, maze_seeds=seeds, maze_files=files,
        epochs=args.epochs, repetitions=args.reps, search_budget=args.budget,
        seed=args.seed, workers=args.workers, agent=_agent_config(args),
    )


SURFACE_HEADER = ["p", "tau", "reward", "baseline", "seed"]


def _cmd_baseline(args) -> int:
    cfg = _sweep_config(args, many_mazes=True)
    rows = baseline_surface(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "surface.csv", SURFACE_HEADER, rows)
    cells = [{"maze": r["maze"], "p": r["p"], "tau": r["tau"], "seed": r["seed"],
              "config_hash": config_hash(cfg.to_dict())} for r in rows]
    _write_manifest(out, "baseline", cfg.to_dict(), cells)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _sweep_config(args, many_mazes=False)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        rows, curves, checkpoints, failures = trained_surface(cfg, strict=args.strict)
    except RuntimeError as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return 2
    _write_csv(out / "surface.csv", SURFACE_HEADER, rows)
    (out / "training").mkdir(exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    for row, curve, ckpt in zip(rows, curves, checkpoints):
        name = _cell_name(row)
        _write_training_csv(out / "training" / f"{name}.csv", curve)
        net = QNetwork(ckpt["layer_sizes"], weights=ckpt["weights"],
                       biases=ckpt["biases"])
        save_policy(out / "checkpoints" / f"{name}.npz", net, ckpt["meta"])
    if len(rows) == 1:
        _write_training_csv(out / "training.csv", curves[0])
    cells = [{"maze": r["maze"], "p": r["p"], "tau": r["tau"], "seed": r["seed"],
              "config_hash": config_hash(cfg.to_dict())} for r in rows]
    _write_manifest(out, "sweep", cfg.to_dict(), cells,
                    extra={"failures": failures})
    if failures:
        print(f"{len(failures)} cell(s) failed; see manifest.json", file=sys.stderr)
        return 2 if args.strict else 0
    return 0


def _cmd_mean_improve(args) -> int:
    cfg = _sweep_config(args, many_mazes=True)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        mean_rows, per_maze, failures = mean_improvement_surface(cfg, strict=args.strict)
    except RuntimeError as exc:
        print(f"mean-improve failed: {exc}", file=sys.stderr)
        return 2
    _write_csv(out / "improvement.csv",
               ["p", "tau", "mean_improvement", "min_improvement",
                "max_improvement", "n_mazes"], mean_rows)
    _write_csv(out / "improvement_per_maze.csv",
               ["maze", "p", "tau", "reward", "baseline", "improvement", "seed"],
               per_maze)
    cells = [{"maze": r["maze"], "p": r["p"], "tau": r["tau"], "seed": r["seed"],
              "config_hash": config_hash(cfg.to_dict())} for r in per_maze]
    _write_manifest(out, "mean-improve", cfg.to_dict(), cells,
                    extra={"failures": failures})
    if failures and args.strict:
        return 2
    return 0


def _cmd_noise_eval(args) -> int:
    cfg = TimingNoiseConfig(checkpoint=args.checkpoint, eta_grid=args.eta,
                            realizations=args.realizations, seed=args.seed)
    rows = timing_noise_eval(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "noise.csv", ["eta", "mean", "min", "max"], rows)
    _write_manifest(out, "noise-eval", cfg.to_dict())
    return 0


def _cmd_transient(args) -> int:
    width, height = args.maze_size
    cfg = TransientConfig(
        total_time=args.total_time, n_actions=args.actions, scan=args.scan,
        values=args.values, p_grid=args.p, maze_width=width, maze_height=height,
        maze_seed=args.maze_seed, maze_file=args.maze_file, epochs=args.epochs,
        seed=args.seed, workers=args.workers, agent=_agent_config(args),
    )
    rows = transient_eval(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "transient.csv", ["p", "value", "reward", "baseline", "seed"], rows)
    _write_manifest(out, "transient", cfg.to_dict())
    return 0


def _cmd_cross_eval(args) -> int:
    rows, sequences = cross_policy_eval(args.checkpoint, p_grid=args.p,
                                        tau_grid=args.tau)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "cross.csv", ["p", "tau", "reward", "sequence_id", "sequence"],
               rows)
    (out / "sequences.json").write_text(
        json.dumps({str(k): v for k, v in sequences.items()},
                   sort_keys=True, indent=2) + "\n"
    )
    config = {"checkpoint": args.checkpoint, "p_grid": list(args.p),
              "tau_grid": list(args.tau), "seed": args.seed}
    _write_manifest(out, "cross-eval", config,
                    extra={"distinct_sequences": len(sequences)})
    return 0


def _load_single_maze(args):
    if args.maze_file:
        return load_maze(args.maze_file)
    width, height = args.maze_size
    return generate_perfect_maze(width, height, args.maze_seed)


def _cmd_hypersearch(args) -> int:
    maze = _load_single_maze(args)
    env_cfg = EpisodeConfig.equally_spaced(maze, p=args.p, tau=args.tau,
                                           n_actions=args.actions)
    best_cfg, best_reward, rows = hyperparameter_search(
        env_cfg, budget=args.budget, seed=args.seed, epochs=args.epochs,
        base=_agent_config(args),
    )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for row in rows:
        entry = {"index": row["index"], "reward": row["reward"]}
        entry.update({k: (tuple(v) if isinstance(v, list) else v)
                      for k, v in row["agent"].items()})
        table.append(entry)
    header = ["index", "reward"] + list(rows[0]["agent"].keys())
    _write_csv(out / "hypersearch.csv", header, table)
    (out / "best_agent.json").write_text(
        json.dumps({"agent": best_cfg.to_dict(), "reward": best_reward},
                   sort_keys=True, indent=2) + "\n"
    )
    config = {"p": args.p, "tau": args.tau, "actions": args.actions,
              "epochs": args.epochs, "budget": args.budget, "seed": args.seed,
              "maze": {"size": list(args.maze_size), "seed": args.maze_seed,
                       "file": args.maze_file}}
    _write_manifest(out, "hypersearch", config)
    return 0


def _cmd_oracle_check(args) -> int:
    maze = _load_single_maze(args)
    env_cfg = EpisodeConfig.equally_spaced(maze, p=args.p, tau=args.tau,
                                           n_actions=args.actions)
    result = exhaustive_best_sequence(env_cfg, guard=args.guard)
    payload = {
        "best_sequence": list(result.best_sequence),
        "best_reward": result.best_reward,
        "n_evaluated": result.n_evaluated,
    }
    if args.checkpoint:
        from .agent import load_policy
        from .env import cumulative_reward, greedy_policy

        net, _ = load_policy(args.checkpoint)
        policy_reward = cumulative_reward(greedy_policy(net), env_cfg)
        payload["policy_reward"] = policy_reward
        payload["policy_over_oracle"] = (
            policy_reward / result.best_reward if result.best_reward > 0 else None
        )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    config = {"p": args.p, "tau": args.tau, "actions": args.actions,
              "guard": args.guard, "seed": args.seed,
              "maze": {"size": list(args.maze_size), "seed": args.maze_seed,
                       "file": args.maze_file},
              "checkpoint": args.checkpoint}
    _write_manifest(out, "oracle-check", config)
    print(f"oracle best reward {result.best_reward!r} over "
          f"{result.n_evaluated} sequences")
    return 0


def _cmd_gen_maze(args) -> int:
    width, height = args.maze_size
    maze = generate_perfect_maze(width, height, args.maze_seed)
    save_maze(maze, args.path)
    print(f"wrote {width}x{height} maze (seed {args.maze_seed}) to {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmaze",
        description="Deep-Q topology control for stochastic quantum walkers in mazes",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="train one agent per (p, tau) cell")
    _add_common(sweep)
    _add_maze_args(sweep)
    _add_grid_args(sweep)
    _add_agent_args(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    base = sub.add_parser("baseline", help="free-evolution surface, no training")
    _add_common(base)
    _add_maze_args(base, many=True)
    _add_grid_args(base)
    _add_agent_args(base)
    base.set_defaults(func=_cmd_baseline)

    mean = sub.add_parser("mean-improve",
                          help="mean trained-minus-baseline over several mazes")
    _add_common(mean)
    _add_maze_args(mean, many=True)
    _add_grid_args(mean)
    _add_agent_args(mean)
    mean.set_defaults(func=_cmd_mean_improve)

    noise = sub.add_parser("noise-eval",
                           help="frozen-policy robustness to action-timing jitter")
    _add_common(noise)
    noise.add_argument("--checkpoint", required=True, help="trained policy .npz")
    noise.add_argument("--eta", type=_floats, default=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
                       metavar="E0,E1,...", help="noise amplitude grid")
    noise.add_argument("--realizations", type=int, default=100)
    noise.set_defaults(func=_cmd_noise_eval)

    trans = sub.add_parser("transient",
                           help="scan free-evolution head/tail around the action window")
    _add_common(trans)
    _add_maze_args(trans)
    trans.add_argument("--p", type=_floats, default=(0.0, 1.0), metavar="P0,P1,...")
    trans.add_argument("--scan", choices=("t1", "t3"), default="t1")
    trans.add_argument("--values", type=_floats,
                       default=(0.0, 56.0, 112.0, 168.0, 200.0, 224.0),
                       metavar="V0,V1,...", help="head (or tail) lengths to scan")
    trans.add_argument("--total-time", type=float, default=224.0)
    trans.add_argument("--actions", type=int, default=8)
    trans.add_argument("--epochs", type=int, default=1000)
    _add_agent_args(trans)
    trans.set_defaults(func=_cmd_transient)

    cross = sub.add_parser("cross-eval",
                           help="evaluate one frozen policy over the whole grid")
    _add_common(cross)
    cross.add_argument("--checkpoint", required=True)
    cross.add_argument("--p", type=_floats, default=DEFAULT_P_GRID)
    cross.add_argument("--tau", type=_floats, default=DEFAULT_TAU_GRID)
    cross.set_defaults(func=_cmd_cross_eval)

    hyper = sub.add_parser("hypersearch", help="random search over agent settings")
    _add_common(hyper)
    _add_maze_args(hyper)
    hyper.add_argument("--p", type=float, default=0.4)
    hyper.add_argument("--tau", type=float, default=14.0)
    hyper.add_argument("--actions", type=int, default=8)
    hyper.add_argument("--epochs", type=int, default=1000)
    hyper.add_argument("--budget", type=int, default=8)
    _add_agent_args(hyper)
    hyper.set_defaults(func=_cmd_hypersearch)

    oracle = sub.add_parser("oracle-check",
                            help="exhaustive best action sequence on a tiny instance")
    _add_common(oracle)
    _add_maze_args(oracle)
    oracle.add_argument("--p", type=float, default=0.5)
    oracle.add_argument("--tau", type=float, default=14.0)
    oracle.add_argument("--actions", type=int, default=2)
    oracle.add_argument("--guard", type=int, default=10**6)
    oracle.add_argument("--checkpoint", default="",
                        help="optional policy to compare against the oracle")
    oracle.set_defaults(func=_cmd_oracle_check)

    gen = sub.add_parser("gen-maze", help="generate and save a perfect maze")
    gen.add_argument("path", type=Path)
    gen.add_argument("--maze-size", type=_size, default=(6, 6), metavar="WxH")
    gen.add_argument("--maze-seed", type=int, default=0)
    gen.set_defaults(func=_cmd_gen_maze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QMazeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

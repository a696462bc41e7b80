"""Experiment driver: sweeps, robustness and timing studies.

Every operation here is a deterministic function of its config: per-cell
seeds are derived from the root seed with spawn keys, aggregation folds in
cell-index order, and worker-pool execution returns exactly the same tables
as the serial path.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .agent import AgentConfig, load_policy, save_policy, train
from .env import EpisodeConfig, MazeEnv, baseline_reward, cumulative_reward, greedy_policy
from .lindblad import DEFAULT_H_MAX
from .maze import Maze, generate_perfect_maze, grid_candidate_edges, load_maze

__all__ = [
    "SweepConfig",
    "TimingNoiseConfig",
    "TransientConfig",
    "DEFAULT_P_GRID",
    "DEFAULT_TAU_GRID",
    "baseline_surface",
    "trained_surface",
    "mean_improvement_surface",
    "timing_noise_eval",
    "transient_eval",
    "cross_policy_eval",
    "hyperparameter_search",
    "perturb_schedule",
    "derive_seed",
    "config_hash",
    "maze_to_meta",
    "maze_from_meta",
    "env_config_to_meta",
    "env_config_from_meta",
]

DEFAULT_P_GRID = tuple(k / 10 for k in range(11))
DEFAULT_TAU_GRID = (1.0, 3.5, 7.0, 14.0, 28.0)

HYPER_RANGES = {
    "hidden_sizes": ((64, 32), (128, 64), (256, 128), (128, 128)),
    "learning_rate": (1e-4, 1e-2),  # log-uniform
    "batch_size": (32, 64, 128),
    "memory_capacity": (2000, 5000, 10000, 20000),
    "target_sync": (10, 20, 50),
    "eps_decay": (100.0, 200.0, 400.0),
}


def derive_seed(root: int, *key: int) -> int:
    """Stable per-task seed from the root seed and an index tuple."""
    return int(np.random.SeedSequence(root, spawn_key=tuple(key)).generate_state(1)[0])


def config_hash(payload) -> str:
    """Short stable hash of a JSON-able config payload."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def maze_to_meta(maze: Maze) -> dict:
    links = [[int(i), int(j)] for (i, j) in maze.candidate_edges
             if maze.adjacency[i, j]]
    return {
        "width": maze.width,
        "height": maze.height,
        "entrance": maze.entrance,
        "exit_node": maze.exit_node,
        "links": links,
    }


def maze_from_meta(meta: dict) -> Maze:
    width, height = meta["width"], meta["height"]
    n = width * height
    adj = np.zeros((n, n), dtype=np.int8)
    for i, j in meta["links"]:
        adj[i, j] = adj[j, i] = 1
    return Maze(width=width, height=height, adjacency=adj,
                entrance=meta["entrance"], exit_node=meta["exit_node"],
                candidate_edges=grid_candidate_edges(width, height))


def env_config_to_meta(cfg: EpisodeConfig) -> dict:
    return {
        "maze": maze_to_meta(cfg.maze),
        "p": cfg.p,
        "schedule": list(cfg.schedule),
        "total_time": cfg.total_time,
        "n_actions": cfg.n_actions,
        "observation_mode": cfg.observation_mode,
        "sink_rate": cfg.sink_rate,
        "h_max": cfg.h_max,
    }


def env_config_from_meta(meta: dict) -> EpisodeConfig:
    return EpisodeConfig(
        maze=maze_from_meta(meta["maze"]),
        p=meta["p"],
        schedule=tuple(meta["schedule"]),
        total_time=meta["total_time"],
        n_actions=meta["n_actions"],
        observation_mode=meta["observation_mode"],
        sink_rate=meta["sink_rate"],
        h_max=meta["h_max"],
    )


@dataclass(frozen=True)
class SweepConfig:
    """Grid study over (p, tau) cells on one or more mazes."""

    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    n_actions: int = 8
    maze_width: int = 6
    maze_height: int = 6
    maze_seeds: tuple[int, ...] = (0,)
    maze_files: tuple[str, ...] = ()
    epochs: int = 1000
    repetitions: int = 1
    search_budget: int = 0
    seed: int = 0
    workers: int = 1
    observation_mode: str = "full_rho"
    h_max: float = DEFAULT_H_MAX
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        if not self.p_grid or not self.tau_grid:
            raise ValueError("p and tau grids must be non-empty")
        if any(t <= 0 for t in self.tau_grid):
            raise ValueError("every tau must be positive")
        if not self.maze_seeds and not self.maze_files:
            raise ValueError("need at least one maze seed or file")

    def mazes(self) -> list[tuple[str, Maze]]:
        """(label, maze) pairs; files take precedence over seeds if given."""
        if self.maze_files:
            return [(path, load_maze(path)) for path in self.maze_files]
        return [
            (f"seed{seed}", generate_perfect_maze(self.maze_width, self.maze_height, seed))
            for seed in self.maze_seeds
        ]

    def cell_config(self, maze: Maze, p: float, tau: float) -> EpisodeConfig:
        return EpisodeConfig.equally_spaced(
            maze, p=p, tau=tau, n_actions=self.n_actions,
            observation_mode=self.observation_mode, h_max=self.h_max,
        )

    def to_dict(self) -> dict:
        out = {
            "p_grid": list(self.p_grid),
            "tau_grid": list(self.tau_grid),
            "n_actions": self.n_actions,
            "maze_width": self.maze_width,
            "maze_height": self.maze_height,
            "maze_seeds": list(self.maze_seeds),
            "maze_files": list(self.maze_files),
            "epochs": self.epochs,
            "repetitions": self.repetitions,
            "search_budget": self.search_budget,
            "seed": self.seed,
            "workers": self.workers,
            "observation_mode": self.observation_mode,
            "h_max": self.h_max,
            "agent": self.agent.to_dict(),
        }
        return out


@dataclass(frozen=True)
class TimingNoiseConfig:
    """Evaluate a frozen policy under jittered action instants."""

    checkpoint: str = ""
    eta_grid: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        if any(not 0.0 <= e <= 1.0 for e in self.eta_grid):
            raise ValueError("every eta must lie in [0, 1]")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")

    def to_dict(self) -> dict:
        return {
            "checkpoint": self.checkpoint,
            "eta_grid": list(self.eta_grid),
            "realizations": self.realizations,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TransientConfig:
    """Split T = head + N*tau + tail and scan the head (or tail) length."""

    total_time: float = 224.0
    n_actions: int = 8
    scan: str = "t1"  # "t1": vary the head with no tail; "t3": vary the tail
    values: tuple[float, ...] = (0.0, 56.0, 112.0, 168.0, 200.0, 224.0)
    p_grid: tuple[float, ...] = (0.0, 1.0)
    maze_width: int = 6
    maze_height: int = 6
    maze_seed: int = 0
    maze_file: str = ""
    epochs: int = 1000
    seed: int = 0
    workers: int = 1
    observation_mode: str = "full_rho"
    h_max: float = DEFAULT_H_MAX
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        if self.scan not in ("t1", "t3"):
            raise ValueError(f"scan must be 't1' or 't3', got {self.scan!r}")
        if any(v < 0 or v > self.total_time for v in self.values):
            raise ValueError("scan values must lie in [0, total_time]")

    def maze(self) -> Maze:
        if self.maze_file:
            return load_maze(self.maze_file)
        return generate_perfect_maze(self.maze_width, self.maze_height, self.maze_seed)

    def to_dict(self) -> dict:
        return {
            "total_time": self.total_time,
            "n_actions": self.n_actions,
            "scan": self.scan,
            "values": list(self.values),
            "p_grid": list(self.p_grid),
            "maze_width": self.maze_width,
            "maze_height": self.maze_height,
            "maze_seed": self.maze_seed,
            "maze_file": self.maze_file,
            "epochs": self.epochs,
            "seed": self.seed,
            "workers": self.workers,
            "observation_mode": self.observation_mode,
            "h_max": self.h_max,
            "agent": self.agent.to_dict(),
        }


def _run_jobs(worker, specs, workers: int):
    if workers <= 1 or len(specs) <= 1:
        return [worker(spec) for spec in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, specs))


def _baseline_cell(spec):
    env_config, label, p, tau, seed = spec
    value = baseline_reward(env_config)
    return {"maze": label, "p": p, "tau": tau, "reward": value, "baseline": value,
            "seed": seed}


def baseline_surface(cfg: SweepConfig):
    """Free-evolution escape probability per (maze, p, tau) cell."""
    specs = []
    for m_idx, (label, maze) in enumerate(cfg.mazes()):
        for i, p in enumerate(cfg.p_grid):
            for j, tau in enumerate(cfg.tau_grid):
                seed = derive_seed(cfg.seed, m_idx, i, j)
                specs.append((cfg.cell_config(maze, p, tau), label, p, tau, seed))
    return _run_jobs(_baseline_cell, specs, cfg.workers)


def _best_of_repetitions(env_config, agent_config, epochs, reps, budget, cell_seed):
    """Train `reps` independent agents (or run a hyper search) and keep the best."""
    if budget > 0:
        best_cfg, best_reward, rows = hyperparameter_search(
            env_config, budget=budget, seed=cell_seed, epochs=epochs, base=agent_config
        )
        best_row = max(rows, key=lambda r: r["reward"])
        return best_reward, best_row["training"], best_cfg
    best = None
    for rep in range(reps):
        result = train(env_config, agent_config, epochs=epochs,
                       seed=derive_seed(cell_seed, rep))
        if best is None or result.best_reward > best.best_reward:
            best = result
    return best.best_reward, best, agent_config


def _trained_cell(spec):
    env_config, label, p, tau, epochs, reps, budget, seed, agent_config = spec
    base = baseline_reward(env_config)
    reward, result, used_cfg = _best_of_repetitions(
        env_config, agent_config, epochs, reps, budget, seed
    )
    row = {"maze": label, "p": p, "tau": tau, "reward": reward, "baseline": base,
           "seed": seed}
    curves = {
        "episode_rewards": result.episode_rewards,
        "moving_avg": result.moving_avg,
        "epsilons": result.epsilons,
        "target_evals": result.target_evals,
        "final_reward": result.final_reward,
        "best_reward": result.best_reward,
    }
    net = result.best_policy
    payload = {
        "weights": [w for w in net.weights],
        "biases": [b for b in net.biases],
        "layer_sizes": net.layer_sizes,
        "meta": {
            "env": env_config_to_meta(env_config),
            "agent": used_cfg.to_dict(),
            "seed": seed,
            "greedy_reward": reward,
            "package_version": __version__,
        },
    }
    return row, curves, payload


def trained_surface(cfg: SweepConfig, strict: bool = False):
    """Train one agent per (maze, p, tau) cell; best-of-repetitions reward.

    Returns (rows, curves, checkpoints, failures); cells that raise are
    reported in ``failures`` and skipped unless ``strict``.
    """
    specs = []
    for m_idx, (label, maze) in enumerate(cfg.mazes()):
        for i, p in enumerate(cfg.p_grid):
            for j, tau in enumerate(cfg.tau_grid):
                seed = derive_seed(cfg.seed, m_idx, i, j)
                specs.append((cfg.cell_config(maze, p, tau), label, p, tau,
                              cfg.epochs, cfg.repetitions, cfg.search_budget,
                              seed, cfg.agent))
    rows, curves, checkpoints, failures = [], [], [], []
    for spec, outcome in zip(specs, _run_jobs(_trained_cell_safe, specs, cfg.workers)):
        if isinstance(outcome, dict) and "error" in outcome:
            failures.append({"maze": spec[1], "p": spec[2], "tau": spec[3],
                             "error": outcome["error"]})
            if strict:
                raise RuntimeError(
                    f"cell (maze={spec[1]}, p={spec[2]}, tau={spec[3]}) failed: "
                    f"{outcome['error']}"
                )
            continue
        row, curve, ckpt = outcome
        rows.append(row)
        curves.append(curve)
        checkpoints.append(ckpt)
    return rows, curves, checkpoints, failures


def _trained_cell_safe(spec):
    try:
        return _trained_cell(spec)
    except Exception as exc:  # noqa: BLE001 - survey must survive cell failures
        return {"error": f"{type(exc).__name__}: {exc}"}


def mean_improvement_surface(cfg: SweepConfig, strict: bool = False):
    """Per-cell mean of (trained - baseline) over the configured mazes.

    Returns (mean_rows, per_maze_rows, failures)."""
    if len(cfg.mazes()) < 2:
        raise ValueError("mean improvement needs at least 2 mazes")
    rows, _, _, failures = trained_surface(cfg, strict=strict)
    per_maze = []
    for row in rows:
        per_maze.append(dict(row, improvement=row["reward"] - row["baseline"]))
    mean_rows = []
    for p in cfg.p_grid:
        for tau in cfg.tau_grid:
            cell = [r["improvement"] for r in per_maze
                    if r["p"] == p and r["tau"] == tau]
            if not cell:
                continue
            mean_rows.append({
                "p": p,
                "tau": tau,
                "mean_improvement": float(np.mean(cell)),
                "min_improvement": float(np.min(cell)),
                "max_improvement": float(np.max(cell)),
                "n_mazes": len(cell),
            })
    return mean_rows, per_maze, failures


def perturb_schedule(schedule, total_time: float, eta: float, tau: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Jitter the instants by zero-mean uniform noise in [-eta*tau, eta*tau].

    The draw is mean-subtracted (total walker time fixed), then sorted,
    clamped into [0, T], and nudged into strict increase; the nudge (1e-9
    steps) only engages when clamping creates ties at the interval ends.
    """
    base = np.asarray(schedule, dtype=np.float64)
    n = len(base)
    noise = rng.uniform(-eta * tau, eta * tau, size=n)
    noise -= noise.mean()
    inst = np.sort(base + noise)
    inst = np.clip(inst, 0.0, total_time)
    eps = 1e-9
    for k in range(1, n):
        if inst[k] <= inst[k - 1]:
            inst[k] = inst[k - 1] + eps
    if inst[-1] > total_time:
        inst[-1] = total_time
    for k in range(n - 2, -1, -1):
        if inst[k] >= inst[k + 1]:
            inst[k] = inst[k + 1] - eps
    return inst


def timing_noise_eval(cfg: TimingNoiseConfig):
    """Greedy rollouts of a frozen policy on jittered schedules.

    Returns rows `eta -> {mean, min, max}` over the configured realizations,
    plus the unperturbed reward for reference."""
    net, meta = load_policy(cfg.checkpoint)
    env_config = env_config_from_meta(meta["env"])
    schedule = np.asarray(env_config.schedule)
    gaps = np.diff(schedule)
    tau = float(gaps[0]) if len(gaps) else env_config.total_time
    policy = greedy_policy(net)

    rows = []
    for e_idx, eta in enumerate(cfg.eta_grid):
        rewards = np.empty(cfg.realizations)
        for r in range(cfg.realizations):
            if eta == 0.0:
                perturbed = tuple(schedule)
            else:
                rng = np.random.default_rng(derive_seed(cfg.seed, e_idx, r))
                perturbed = tuple(perturb_schedule(schedule, env_config.total_time,
                                                   eta, tau, rng))
            run_cfg = EpisodeConfig(
                maze=env_config.maze, p=env_config.p, schedule=perturbed,
                total_time=env_config.total_time, n_actions=env_config.n_actions,
                observation_mode=env_config.observation_mode,
                sink_rate=env_config.sink_rate, h_max=env_config.h_max,
            )
            rewards[r] = cumulative_reward(policy, run_cfg)
        rows.append({
            "eta": eta,
            "mean": float(rewards.mean()),
            "min": float(rewards.min()),
            "max": float(rewards.max()),
        })
    return rows


def _transient_cell(spec):
    env_cfg, p, value, epochs, seed, agent_config, window = spec
    free = baseline_reward(env_cfg)
    if window == 0.0:
        # tau = 0: the actions get zero-length intervals, so every policy
        # yields the free-evolution value exactly; skip the vacuous training.
        reward = free
    else:
        result = train(env_cfg, agent_config, epochs=epochs, seed=seed)
        reward = result.best_reward
    return {"p": p, "value": value, "reward": reward, "baseline": free, "seed": seed}


def transient_eval(cfg: TransientConfig):
    """Train and evaluate across the transient split grid."""
    maze = cfg.maze()
    specs = []
    for i, p in enumerate(cfg.p_grid):
        for j, value in enumerate(cfg.values):
            head = value if cfg.scan == "t1" else 0.0
            tail = value if cfg.scan == "t3" else 0.0
            env_cfg = EpisodeConfig.with_transients(
                maze, p=p, total_time=cfg.total_time, head=head, tail=tail,
                n_actions=cfg.n_actions, observation_mode=cfg.observation_mode,
                h_max=cfg.h_max,
            )
            window = cfg.total_time - head - tail
            specs.append((env_cfg, p, value, cfg.epochs,
                          derive_seed(cfg.seed, i, j), cfg.agent, window))
    return _run_jobs(_transient_cell, specs, cfg.workers)


def cross_policy_eval(checkpoint: str, p_grid=DEFAULT_P_GRID, tau_grid=DEFAULT_TAU_GRID,
                      maze: Maze | None = None):
    """Greedy rollouts of one frozen policy over the whole (p, tau) grid.

    Returns (rows, sequences): rows carry the reward and a sequence id, and
    ``sequences`` maps each id to the distinct greedy action tuple."""
    from .env import observation_size  # local import to avoid cycle noise

    net, meta = load_policy(checkpoint)
    env_meta = meta["env"]
    maze = maze if maze is not None else maze_from_meta(env_meta["maze"])
    obs_dim = observation_size(maze, env_meta["observation_mode"])
    if obs_dim != net.input_dim:
        raise ValueError(
            f"checkpoint expects observations of length {net.input_dim}, "
            f"but this maze produces {obs_dim}"
        )
    policy = greedy_policy(net)
    rows = []
    seq_ids: dict[tuple, int] = {}
    for p in p_grid:
        for tau in tau_grid:
            run_cfg = EpisodeConfig.equally_spaced(
                maze, p=p, tau=tau, n_actions=env_meta["n_actions"],
                observation_mode=env_meta["observation_mode"],
                sink_rate=env_meta["sink_rate"], h_max=env_meta["h_max"],
            )
            env = MazeEnv(run_cfg)
            obs = env.reset()
            sequence = []
            while not env.done:
                act = policy(obs)
                sequence.append(act)
                obs = env.step(act).next_observation
            sequence = tuple(sequence)
            seq_id = seq_ids.setdefault(sequence, len(seq_ids))
            rows.append({"p": p, "tau": tau, "reward": env.escape_total,
                         "sequence_id": seq_id,
                         "sequence": "-".join(map(str, sequence))})
    sequences = {v: list(k) for k, v in seq_ids.items()}
    return rows, sequences


def sample_agent_config(rng: np.random.Generator, base: AgentConfig) -> AgentConfig:
    """One random draw from the documented hyper-parameter ranges."""
    lo, hi = HYPER_RANGES["learning_rate"]
    lr = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    pick = lambda options: options[int(rng.integers(len(options)))]  # noqa: E731
    return AgentConfig(
        gamma=base.gamma,
        eps_start=base.eps_start,
        eps_end=base.eps_end,
        eps_decay=float(pick(HYPER_RANGES["eps_decay"])),
        batch_size=int(pick(HYPER_RANGES["batch_size"])),
        learning_rate=lr,
        target_sync=int(pick(HYPER_RANGES["target_sync"])),
        hidden_sizes=tuple(pick(HYPER_RANGES["hidden_sizes"])),
        memory_capacity=int(pick(HYPER_RANGES["memory_capacity"])),
    )


def hyperparameter_search(env_config: EpisodeConfig, budget: int, seed: int,
                          epochs: int, base: AgentConfig | None = None):
    """Seeded random search; sample 0 is the base config itself.

    Returns (best config, best reward, rows) where rows carry every sample's
    config, reward and TrainingResult."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    base = base or AgentConfig()
    rows = []
    best_cfg, best_reward, best_result = None, -np.inf, None
    for i in range(budget):
        if i == 0:
            candidate = base
        else:
            candidate = sample_agent_config(
                np.random.default_rng(derive_seed(seed, i)), base
            )
        result = train(env_config, candidate, epochs=epochs,
                       seed=derive_seed(seed, i, 1))
        rows.append({"index": i, "agent": candidate.to_dict(),
                     "reward": result.best_reward, "training": result})
        if result.best_reward > best_reward:
            best_cfg, best_reward, best_result = candidate, result.best_reward, result
    return best_cfg, best_reward, rows

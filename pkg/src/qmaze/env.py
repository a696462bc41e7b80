"""Episodic MDP wrapper around the walker dynamics.

An episode schedules N action instants over the walker's evolution.  At each
instant the agent toggles one wall (or does nothing), the generator is
rebuilt, and the state evolves to the next instant; the reward is the
increment of the escape probability over that interval.  Schedules may start
after a free-evolution head and may end before a free-evolution tail folded
into the last step, which covers the transient-timing studies.

Observations are flat float vectors: the real upper triangle of rho
(including the diagonal), the imaginary strict upper triangle, the current
candidate-edge occupation bits, and the normalized step index.  ``diag_only``
mode keeps just the populations instead of the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import lindblad
from .errors import ProtocolError
from .lindblad import DEFAULT_H_MAX
from .maze import Maze, WallAction, apply_action

__all__ = [
    "EpisodeConfig",
    "Transition",
    "MazeEnv",
    "observation_size",
    "cumulative_reward",
    "baseline_reward",
    "greedy_policy",
    "null_policy",
    "export_episode_trace",
]

OBSERVATION_MODES = ("full_rho", "diag_only")


@dataclass(frozen=True)
class EpisodeConfig:
    """One episode's physics and scheduling parameters.

    ``schedule`` holds the N action instants; ``total_time`` is the final
    time T >= schedule[-1].  Instants may coincide (zero-length intervals are
    legal; they cover the degenerate tau=0 transient endpoint) but must be
    non-decreasing and start at t >= 0.
    """

    maze: Maze
    p: float
    schedule: tuple[float, ...]
    total_time: float
    n_actions: int = 8
    observation_mode: str = "full_rho"
    sink_rate: float = 1.0
    h_max: float = DEFAULT_H_MAX

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.n_actions != len(self.schedule):
            raise ValueError(
                f"n_actions={self.n_actions} but schedule has {len(self.schedule)} instants"
            )
        if self.observation_mode not in OBSERVATION_MODES:
            raise ValueError(f"unknown observation mode {self.observation_mode!r}")
        if self.schedule:
            if self.schedule[0] < 0:
                raise ValueError("schedule must start at t >= 0")
            if any(b < a for a, b in zip(self.schedule, self.schedule[1:])):
                raise ValueError("schedule must be non-decreasing")
            if self.total_time < self.schedule[-1]:
                raise ValueError("total_time must not precede the last action instant")
        elif self.total_time < 0:
            raise ValueError("total_time must be non-negative")

    @classmethod
    def equally_spaced(cls, maze: Maze, p: float, tau: float, n_actions: int = 8,
                       **kwargs) -> "EpisodeConfig":
        """Instants t_k = k*tau for k = 0..N-1, with T = N*tau."""
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        schedule = tuple(k * tau for k in range(n_actions))
        return cls(maze=maze, p=p, schedule=schedule, total_time=n_actions * tau,
                   n_actions=n_actions, **kwargs)

    @classmethod
    def with_transients(cls, maze: Maze, p: float, total_time: float, head: float,
                        tail: float, n_actions: int = 8, **kwargs) -> "EpisodeConfig":
        """Free evolution over ``head``, N actions spaced over what remains
        after ``tail``, free evolution to ``total_time``."""
        if head < 0 or tail < 0 or head + tail > total_time:
            raise ValueError("head/tail must be non-negative and fit inside total_time")
        window = total_time - head - tail
        tau = window / n_actions
        schedule = tuple(head + k * tau for k in range(n_actions))
        return cls(maze=maze, p=p, schedule=schedule, total_time=total_time,
                   n_actions=n_actions, **kwargs)

    def with_maze(self, maze: Maze) -> "EpisodeConfig":
        return replace(self, maze=maze)


@dataclass(frozen=True)
class Transition:
    """One step record for replay memory."""

    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool


def observation_size(maze: Maze, mode: str = "full_rho") -> int:
    d = maze.n_nodes + 1
    if mode == "full_rho":
        state_part = d * (d + 1) // 2 + d * (d - 1) // 2
    elif mode == "diag_only":
        state_part = d
    else:
        raise ValueError(f"unknown observation mode {mode!r}")
    return state_part + maze.n_candidate_edges + 1


class MazeEnv:
    """Stateful single-episode environment (gym-style reset/step)."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        n = config.maze.n_nodes
        edges = np.asarray(config.maze.candidate_edges, dtype=np.intp)
        self._edge_rows = edges[:, 0]
        self._edge_cols = edges[:, 1]
        dim = n + 1
        self._triu = np.triu_indices(dim)
        self._triu1 = np.triu_indices(dim, 1)
        self._maze = None
        self._obs = None
        self.done = True

    @property
    def action_count(self) -> int:
        """Toggles for every candidate edge plus the null action."""
        return self.config.maze.n_candidate_edges + 1

    @property
    def noop_index(self) -> int:
        return self.config.maze.n_candidate_edges

    @property
    def maze(self) -> Maze:
        return self._maze

    @property
    def escape_total(self) -> float:
        """Escape probability accumulated so far (head evolution included)."""
        return lindblad.escape_probability(self._rho)

    def action_from_index(self, index: int) -> WallAction:
        if not 0 <= index <= self.noop_index:
            raise ValueError(f"action index {index} out of range 0..{self.noop_index}")
        if index == self.noop_index:
            return WallAction.noop()
        return WallAction.toggle(index)

    def _observe(self) -> np.ndarray:
        rho = self._rho
        if self.config.observation_mode == "full_rho":
            state_part = np.concatenate(
                [rho[self._triu].real, rho[self._triu1].imag]
            )
        else:
            state_part = np.diagonal(rho).real.copy()
        bits = self._maze.adjacency[self._edge_rows, self._edge_cols].astype(np.float64)
        frac = np.array([self._k / self.config.n_actions if self.config.n_actions else 1.0])
        return np.concatenate([state_part, bits, frac])

    def reset(self, seed=None) -> np.ndarray:
        """Restore the initial maze and walker, evolve the free head if any."""
        cfg = self.config
        self._maze = cfg.maze
        self._gen = lindblad.build_generator(self._maze, cfg.p, cfg.sink_rate)
        self._rho = lindblad.initial_state(self._maze)
        self._k = 0
        self._t = 0.0
        head = cfg.schedule[0] if cfg.schedule else cfg.total_time
        if head > 0:
            self._rho = lindblad.evolve(self._gen, self._rho, head, h_max=cfg.h_max)
            self._t = head
        self.done = cfg.n_actions == 0
        self._obs = self._observe()
        return self._obs

    def step(self, action) -> Transition:
        """Apply the action, evolve to the next instant, return the record."""
        if self._maze is None:
            raise ProtocolError("step() before reset()")
        if self.done:
            raise ProtocolError("step() after the episode ended")
        cfg = self.config
        if isinstance(action, WallAction):
            wall = action
            index = self.noop_index if wall.is_noop else wall.edge_index
        else:
            index = int(action)
            wall = self.action_from_index(index)

        obs = self._obs
        before = self.escape_total
        self._maze = apply_action(self._maze, wall)
        self._gen = lindblad.build_generator(self._maze, cfg.p, cfg.sink_rate)
        k = self._k
        t_next = cfg.schedule[k + 1] if k + 1 < cfg.n_actions else cfg.total_time
        self._rho = lindblad.evolve(self._gen, self._rho, t_next - self._t, h_max=cfg.h_max)
        self._t = t_next
        self._k = k + 1
        self.done = self._k == cfg.n_actions
        self._obs = self._observe()
        reward = self.escape_total - before
        return Transition(
            observation=obs,
            action=index,
            reward=reward,
            next_observation=self._obs,
            done=self.done,
        )


def null_policy(env: MazeEnv):
    """Policy that always chooses the null action of the given environment."""
    noop = env.noop_index
    return lambda obs: noop


def greedy_policy(net):
    """Wrap a Q-network into a deterministic argmax policy."""
    return lambda obs: int(np.argmax(net.forward(obs)))


def cumulative_reward(policy, config: EpisodeConfig) -> float:
    """Roll one episode under the policy; return the final escape probability.

    Equal to the sum of step rewards plus the (policy-independent) escape
    accumulated during the free head; with the default schedule the head is
    empty and this is exactly the telescoped reward sum.
    """
    env = MazeEnv(config)
    obs = env.reset()
    while not env.done:
        obs = env.step(policy(obs)).next_observation
    return env.escape_total


def baseline_reward(config: EpisodeConfig) -> float:
    """Free-evolution escape probability for the same (maze, p, T)."""
    env = MazeEnv(config)
    env.reset()
    while not env.done:
        env.step(env.noop_index)
    return env.escape_total


def export_episode_trace(policy, config: EpisodeConfig, path) -> float:
    """Roll one episode and write `k, t_k, action_index, reward, p_exit_cum`."""
    env = MazeEnv(config)
    obs = env.reset()
    lines = ["k,t_k,action_index,reward,p_exit_cum"]
    k = 0
    while not env.done:
        t_k = config.schedule[k]
        tr = env.step(policy(obs))
        obs = tr.next_observation
        lines.append(
            f"{k},{t_k!r},{tr.action},{tr.reward!r},{env.escape_total!r}"
        )
        k += 1
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return env.escape_total

"""Independent ground truth for the learner and the simulator.

Exhaustive action-sequence search bounds what any policy can achieve on tiny
instances, and a standalone classical rate-equation integrator provides the
p=1 limit without going through the quantum kernels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .env import EpisodeConfig, MazeEnv
from .errors import CapabilityError
from .lindblad import DEFAULT_H_MAX
from .maze import Maze

__all__ = ["OracleResult", "exhaustive_best_sequence", "classical_ctmc_solve"]


@dataclass(frozen=True)
class OracleResult:
    best_sequence: tuple[int, ...]
    best_reward: float
    n_evaluated: int


def _rollout(config: EpisodeConfig, sequence) -> float:
    env = MazeEnv(config)
    env.reset()
    for action in sequence:
        env.step(action)
    return env.escape_total


def exhaustive_best_sequence(config: EpisodeConfig, guard: int = 10**6) -> OracleResult:
    """Evaluate every action sequence; ties break to the lexicographically
    smallest sequence, so the result is independent of enumeration order."""
    env = MazeEnv(config)
    n_actions = env.action_count
    total = n_actions**config.n_actions
    if total > guard:
        raise CapabilityError(
            f"{n_actions}^{config.n_actions} = {total} sequences exceeds the guard {guard}"
        )
    best_seq = None
    best_reward = -np.inf
    for seq in itertools.product(range(n_actions), repeat=config.n_actions):
        reward = _rollout(config, seq)
        if reward > best_reward or (reward == best_reward and seq < best_seq):
            best_reward = reward
            best_seq = seq
    return OracleResult(best_sequence=best_seq, best_reward=float(best_reward),
                        n_evaluated=total)


def classical_ctmc_solve(maze: Maze, total_time: float, h_max: float = DEFAULT_H_MAX,
                         sink_rate: float = 1.0):
    """Integrate the classical continuous-time Markov chain on the maze.

    Hop rate (A_ij/d_j)^2 from node j to node i, drain rate 2*sink_rate from
    the exit into the sink; fixed-step RK4 at the same step policy as the
    quantum integrator.  Returns (times, populations) with populations of
    shape (steps+1, n+1) including the sink column.
    """
    if total_time < 0:
        raise ValueError(f"total_time must be non-negative, got {total_time}")
    n = maze.n_nodes
    adj = maze.adjacency.astype(np.float64)
    deg = adj.sum(axis=0)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    rates = np.zeros((n + 1, n + 1))
    rates[:n, :n] = adj * (inv_deg**2)[None, :]
    rates[n, maze.exit_node] = 2.0 * sink_rate
    generator = rates - np.diag(rates.sum(axis=0))

    pops = np.zeros(n + 1)
    pops[maze.entrance] = 1.0
    if total_time == 0:
        return np.array([0.0]), pops[None, :].copy()

    steps = int(np.ceil(total_time / h_max))
    h = total_time / steps
    times = np.linspace(0.0, total_time, steps + 1)
    out = np.empty((steps + 1, n + 1))
    out[0] = pops
    for s in range(steps):
        k1 = generator @ pops
        k2 = generator @ (pops + 0.5 * h * k1)
        k3 = generator @ (pops + 0.5 * h * k2)
        k4 = generator @ (pops + h * k3)
        pops = pops + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[s + 1] = pops
    return times, out

import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from qmaze.env import EpisodeConfig, MazeEnv, baseline_reward
from qmaze.errors import CapabilityError
from qmaze.lindblad import build_generator, evolve, initial_state
from qmaze.maze import generate_perfect_maze
from qmaze.oracle import classical_ctmc_solve, exhaustive_best_sequence, _rollout


def test_zero_actions_returns_free_evolution(maze3x3):
    config = EpisodeConfig(maze=maze3x3, p=0.5, schedule=(), total_time=14.0,
                           n_actions=0)
    result = exhaustive_best_sequence(config)
    assert result.n_evaluated == 1
    assert result.best_sequence == ()
    g = build_generator(maze3x3, p=0.5)
    free = evolve(g, initial_state(maze3x3), 14.0)[-1, -1].real
    assert result.best_reward == pytest.approx(free, abs=1e-9)


def test_noop_wins_on_two_node_chain(chain2):
    # breaking the single link traps the walker, so doing nothing wins
    config = EpisodeConfig.equally_spaced(chain2, p=0.5, tau=14.0, n_actions=1)
    result = exhaustive_best_sequence(config)
    assert result.n_evaluated == 2  # (1 edge + noop) ^ 1
    assert result.best_sequence == (1,)


def test_oracle_bounds_null_sequence(tiny_config):
    result = exhaustive_best_sequence(tiny_config)
    env = MazeEnv(tiny_config)
    assert result.best_reward >= baseline_reward(tiny_config) - 1e-12
    assert result.n_evaluated == env.action_count ** tiny_config.n_actions


def test_oracle_enumeration_order_invariance(tiny_config):
    result = exhaustive_best_sequence(tiny_config)
    env = MazeEnv(tiny_config)
    best_seq, best_reward = None, -np.inf
    ordered = itertools.product(range(env.action_count), repeat=tiny_config.n_actions)
    for seq in reversed(list(ordered)):
        reward = _rollout(tiny_config, seq)
        if reward > best_reward or (reward == best_reward and seq < best_seq):
            best_seq, best_reward = seq, reward
    assert best_seq == result.best_sequence
    assert best_reward == result.best_reward


def test_oracle_guard(maze6x6):
    config = EpisodeConfig.equally_spaced(maze6x6, p=0.5, tau=1.0, n_actions=8)
    with pytest.raises(CapabilityError):
        exhaustive_best_sequence(config)


def test_ctmc_zero_adjacency_freezes_entrance(chain2):
    from qmaze.maze import WallAction, apply_action

    trapped = apply_action(chain2, WallAction.toggle(0))
    times, pops = classical_ctmc_solve(trapped, 10.0)
    assert pops[-1, 0] == pytest.approx(1.0)
    assert np.abs(pops[-1, 1:]).max() == 0.0


def test_ctmc_single_cell_closed_form():
    # entrance == exit: a single linear drain, sink = 1 - exp(-2T)
    maze = generate_perfect_maze(1, 1, seed=0)
    for total in (0.5, 2.0, 5.0):
        _, pops = classical_ctmc_solve(maze, total)
        assert pops[-1, 1] == pytest.approx(1.0 - np.exp(-2.0 * total), abs=1e-9)


def test_ctmc_conserves_probability(maze3x3):
    _, pops = classical_ctmc_solve(maze3x3, 28.0)
    totals = pops.sum(axis=1)
    assert np.abs(totals - 1.0).max() <= 1e-9
    assert (pops >= -1e-12).all()


def test_ctmc_matches_matrix_exponential(maze3x3):
    # independent closed-form route: exponential of the rate matrix
    n = maze3x3.n_nodes
    adj = maze3x3.adjacency.astype(float)
    deg = adj.sum(axis=0)
    rates = np.zeros((n + 1, n + 1))
    rates[:n, :n] = adj / np.where(deg > 0, deg, 1.0) ** 2
    rates[n, maze3x3.exit_node] = 2.0
    gen = rates - np.diag(rates.sum(axis=0))
    start = np.zeros(n + 1)
    start[0] = 1.0
    expected = expm(gen * 28.0) @ start
    _, pops = classical_ctmc_solve(maze3x3, 28.0)
    assert np.abs(pops[-1] - expected).max() <= 1e-9


def test_ctmc_matches_quantum_classical_limit(maze3x3):
    g = build_generator(maze3x3, p=1.0)
    rho = initial_state(maze3x3)
    rho = evolve(g, rho, 28.0)
    _, pops = classical_ctmc_solve(maze3x3, 28.0)
    assert np.abs(np.diagonal(rho).real - pops[-1]).max() <= 1e-6


def test_ctmc_zero_time(maze3x3):
    times, pops = classical_ctmc_solve(maze3x3, 0.0)
    assert times.tolist() == [0.0]
    assert pops[0, 0] == 1.0

import numpy as np
import pytest

from qmaze.env import EpisodeConfig
from qmaze.maze import generate_perfect_maze


@pytest.fixture
def chain2():
    """1x2 maze: a 2-node chain, exit at node 1, sink appended as node 2."""
    return generate_perfect_maze(2, 1, seed=0)


@pytest.fixture
def maze3x3():
    return generate_perfect_maze(3, 3, seed=1)


@pytest.fixture
def maze6x6():
    return generate_perfect_maze(6, 6, seed=7)


@pytest.fixture
def tiny_config():
    """2x2 maze, 2 actions; cheap enough for training tests."""
    maze = generate_perfect_maze(2, 2, seed=1)
    return EpisodeConfig.equally_spaced(maze, p=0.5, tau=3.5, n_actions=2)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None):
    """Random valid density matrix as a mixture of random pure states."""
    rank = rank or dim
    rho = np.zeros((dim, dim), dtype=np.complex128)
    weights = rng.random(rank)
    weights /= weights.sum()
    for w in weights:
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        rho += w * np.outer(psi, psi.conj())
    return rho

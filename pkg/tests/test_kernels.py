"""Backend equivalence: the compiled kernel and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_density_matrix
from qmaze import _backend, _kernels_py
from qmaze.lindblad import build_generator, initial_state
from qmaze.maze import WallAction, apply_action, generate_perfect_maze

compiled = pytest.importorskip("qmaze._kernels", reason="compiled kernel not built")


def _cases():
    rng = np.random.default_rng(0)
    for size, p in [((2, 1), 0.0), ((2, 2), 0.5), ((3, 3), 1.0), ((4, 4), 0.3)]:
        maze = generate_perfect_maze(*size, seed=3)
        if maze.n_candidate_edges:
            maze = apply_action(
                maze, WallAction.toggle(int(rng.integers(maze.n_candidate_edges)))
            )
        gen = build_generator(maze, p)
        yield gen, random_density_matrix(gen.dim, rng)
        yield gen, initial_state(maze)


def test_rhs_parity():
    for gen, rho in _cases():
        args = (rho, gen.hamiltonian, gen.coherent_weight, gen.pump, gen.decay)
        a = compiled.lindblad_rhs(*args)
        b = _kernels_py.lindblad_rhs(*args)
        assert np.abs(a - b).max() < 1e-13


def test_rk4_parity():
    for gen, rho in _cases():
        args = (rho, gen.hamiltonian, gen.coherent_weight, gen.pump, gen.decay)
        a = compiled.rk4_evolve(*args, 700, 0.005)
        b = _kernels_py.rk4_evolve(*args, 700, 0.005)
        assert np.abs(a - b).max() < 1e-12


def test_default_backend_is_compiled():
    assert _backend.BACKEND == "cython"


def test_env_var_forces_python_fallback():
    env = dict(os.environ, QMAZE_KERNEL="python")
    out = subprocess.run(
        [sys.executable, "-c", "import qmaze; print(qmaze.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "python"


def test_env_var_rejects_unknown_value():
    env = dict(os.environ, QMAZE_KERNEL="fortran")
    out = subprocess.run(
        [sys.executable, "-c", "import qmaze"],
        capture_output=True, text=True, env=env,
    )
    assert out.returncode != 0
    assert "QMAZE_KERNEL" in out.stderr

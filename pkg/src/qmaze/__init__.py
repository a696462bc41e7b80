"""Deep-Q topology control for stochastic quantum walkers escaping grid mazes."""

from ._backend import BACKEND
from .errors import CapabilityError, NumericalInstabilityError, ProtocolError, QMazeError
from .maze import (
    Maze,
    WallAction,
    apply_action,
    degree,
    generate_perfect_maze,
    load_maze,
    save_maze,
)
from .lindblad import (
    DEFAULT_H_MAX,
    Generator,
    apply_generator,
    build_generator,
    escape_probability,
    evolve,
    exact_evolve,
    initial_state,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CapabilityError",
    "DEFAULT_H_MAX",
    "Generator",
    "Maze",
    "NumericalInstabilityError",
    "ProtocolError",
    "QMazeError",
    "WallAction",
    "apply_action",
    "apply_generator",
    "build_generator",
    "degree",
    "escape_probability",
    "evolve",
    "exact_evolve",
    "generate_perfect_maze",
    "initial_state",
    "load_maze",
    "save_maze",
    "__version__",
]

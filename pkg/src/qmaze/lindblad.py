"""Stochastic-quantum-walk dynamics on a maze with an absorbing sink.

The walker state is a density matrix over the maze nodes plus one appended
sink state (index n, 0-based).  Its evolution interpolates a coherent quantum
walk and an incoherent classical random walk, weighted (1-p) and p, plus an
irreversible transfer from the exit node into the sink:

    drho/dt = (1-p) * (-i [A, rho])
            + p * sum_ij ( L_ij rho L_ij^+ - 1/2 {L_ij^+ L_ij, rho} ),   L_ij = (A_ij / d_j) |i><j|
            + sink_rate * ( 2 |s><e| rho |e><s| - {|e><e|, rho} )

with A the 0/1 adjacency matrix (extended by zeros to the sink), d_j the
degree of node j (terms with d_j = 0 vanish), e the exit node and s the sink.
The sink population is the cumulative escape probability.

``evolve`` integrates with fixed-step RK4 through the selected kernel
backend; ``exact_evolve`` is an independent ground-truth route that builds
the full Liouvillian matrix from the operator sum above and exponentiates it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._backend import lindblad_rhs as _rhs_kernel
from ._backend import rk4_evolve as _rk4_kernel
from .errors import CapabilityError, NumericalInstabilityError
from .maze import Maze

__all__ = [
    "DEFAULT_H_MAX",
    "Generator",
    "build_generator",
    "apply_generator",
    "evolve",
    "exact_evolve",
    "escape_probability",
    "initial_state",
    "check_density_matrix",
    "liouvillian_matrix",
    "dump_trajectory",
]

# RK4 step ceiling.  Chosen so that evolve matches the matrix-exponential
# oracle elementwise to well under 1e-6 over the longest single interval used
# anywhere (dt = 28) on every graph up to paper scale; see the integrator
# fidelity tests.
DEFAULT_H_MAX = 0.005

TRACE_TOL = 1e-6
HERMITICITY_TOL = 1e-9
PSD_TOL = 1e-6


@dataclass(frozen=True)
class Generator:
    """Assembled Lindblad generator for one (maze, p, sink_rate) triple.

    ``hamiltonian`` is the adjacency matrix extended by a zero sink row and
    column; ``pump`` holds the incoherent in-hopping rates p*(A_ij/d_j)^2
    plus the 2*sink_rate feed at [sink, exit]; ``decay`` is the column-sum
    vector of ``pump``, so the right-hand side is traceless by construction.
    """

    dim: int
    p: float
    sink_rate: float
    exit_node: int
    hamiltonian: np.ndarray
    pump: np.ndarray
    decay: np.ndarray
    adjacency: np.ndarray

    @property
    def sink(self) -> int:
        return self.dim - 1

    @property
    def coherent_weight(self) -> float:
        return 1.0 - self.p


def build_generator(maze: Maze, p: float, sink_rate: float = 1.0) -> Generator:
    """Precompute the generator pieces for the current maze topology.

    ``sink_rate`` defaults to 1 and sets the time unit; 0 disconnects the
    sink entirely (useful for the closed-system limits).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if sink_rate < 0.0:
        raise ValueError(f"sink_rate must be non-negative, got {sink_rate}")
    n = maze.n_nodes
    dim = n + 1
    adj = maze.adjacency.astype(np.float64)

    ham = np.zeros((dim, dim))
    ham[:n, :n] = adj

    deg = adj.sum(axis=0)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    pump = np.zeros((dim, dim))
    pump[:n, :n] = p * adj * (inv_deg**2)[None, :]
    pump[dim - 1, maze.exit_node] += 2.0 * sink_rate
    decay = pump.sum(axis=0)

    return Generator(
        dim=dim,
        p=float(p),
        sink_rate=float(sink_rate),
        exit_node=maze.exit_node,
        hamiltonian=ham,
        pump=pump,
        decay=decay,
        adjacency=maze.adjacency.copy(),
    )


def initial_state(maze: Maze) -> np.ndarray:
    """Pure state on the entrance node, in the node+sink space."""
    dim = maze.n_nodes + 1
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[maze.entrance, maze.entrance] = 1.0
    return rho


def escape_probability(rho: np.ndarray) -> float:
    """Sink population = 2 * integral of the exit-node population so far."""
    return float(rho[-1, -1].real)


def check_density_matrix(
    rho: np.ndarray,
    trace_tol: float = TRACE_TOL,
    herm_tol: float = HERMITICITY_TOL,
    psd_tol: float = PSD_TOL,
) -> None:
    """Raise ValueError unless rho is Hermitian, trace-one and PSD within tolerance."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.isfinite(rho).all():
        raise ValueError("density matrix contains NaN/Inf")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"hermiticity violation {herm:.3e} > {herm_tol:.1e}")
    tr = abs(np.trace(rho).real - 1.0)
    if tr > trace_tol:
        raise ValueError(f"trace deviates from 1 by {tr:.3e} > {trace_tol:.1e}")
    lo = float(np.linalg.eigvalsh(rho).min())
    if lo < -psd_tol:
        raise ValueError(f"minimum eigenvalue {lo:.3e} < -{psd_tol:.1e}")


def apply_generator(g: Generator, rho: np.ndarray) -> np.ndarray:
    """Evaluate drho/dt once.  Output is Hermitian and exactly traceless."""
    if rho.shape != (g.dim, g.dim):
        raise ValueError(f"state shape {rho.shape} does not match generator dim {g.dim}")
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    return _rhs_kernel(rho, g.hamiltonian, g.coherent_weight, g.pump, g.decay)


def evolve(g: Generator, rho: np.ndarray, dt: float, h_max: float = DEFAULT_H_MAX) -> np.ndarray:
    """Propagate rho over dt by fixed-step RK4 with step dt/ceil(dt/h_max).

    Raises NumericalInstabilityError if the result has NaN/Inf entries or an
    eigenvalue below -1e-6; instabilities are never silently repaired.
    """
    if rho.shape != (g.dim, g.dim):
        raise ValueError(f"state shape {rho.shape} does not match generator dim {g.dim}")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if h_max <= 0:
        raise ValueError(f"h_max must be positive, got {h_max}")
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if dt == 0:
        return rho.copy()
    steps = int(np.ceil(dt / h_max))
    h = dt / steps
    out = _rk4_kernel(rho, g.hamiltonian, g.coherent_weight, g.pump, g.decay, steps, h)
    if not np.isfinite(out).all():
        raise NumericalInstabilityError(
            f"NaN/Inf after evolving dt={dt} (steps={steps}, h={h:.3e})"
        )
    lo = float(np.linalg.eigvalsh(out).min())
    if lo < -PSD_TOL:
        raise NumericalInstabilityError(
            f"minimum eigenvalue {lo:.3e} < -{PSD_TOL:.1e} after evolving dt={dt}"
        )
    return out


def _dissipator_matrix(jump: np.ndarray) -> np.ndarray:
    # Row-major vectorization: vec(A X B) = kron(A, B.T) vec(X).
    d = jump.shape[0]
    eye = np.eye(d)
    jj = jump.conj().T @ jump
    return (
        np.kron(jump, jump.conj())
        - 0.5 * np.kron(jj, eye)
        - 0.5 * np.kron(eye, jj.T)
    )


def liouvillian_matrix(g: Generator) -> np.ndarray:
    """Dense (dim^2, dim^2) matrix form of the generator, built literally from
    the operator sum (commutator, one jump operator per ordered node pair,
    sink transfer).  Independent of the reduced form used by the kernels."""
    d = g.dim
    n = d - 1
    eye = np.eye(d)
    ham = g.hamiltonian.astype(np.complex128)
    liou = -1j * g.coherent_weight * (np.kron(ham, eye) - np.kron(eye, ham.T))

    deg = g.adjacency.astype(np.float64).sum(axis=0)
    for i in range(n):
        for j in range(n):
            if g.adjacency[i, j] and deg[j] > 0:
                jump = np.zeros((d, d), dtype=np.complex128)
                jump[i, j] = g.adjacency[i, j] / deg[j]
                liou += g.p * _dissipator_matrix(jump)

    sink_jump = np.zeros((d, d), dtype=np.complex128)
    sink_jump[g.sink, g.exit_node] = np.sqrt(2.0 * g.sink_rate)
    liou += _dissipator_matrix(sink_jump)
    return liou


def exact_evolve(g: Generator, rho: np.ndarray, dt: float, max_dim: int = 16) -> np.ndarray:
    """Ground-truth propagation by exponentiating the full Liouvillian.

    Cost grows as dim^6; guarded at max_dim (default 16).
    """
    if g.dim > max_dim:
        raise CapabilityError(f"exact_evolve guarded at dim <= {max_dim}, got {g.dim}")
    if rho.shape != (g.dim, g.dim):
        raise ValueError(f"state shape {rho.shape} does not match generator dim {g.dim}")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    rho = rho.astype(np.complex128)
    prop = expm(liouvillian_matrix(g) * dt)
    return (prop @ rho.reshape(-1)).reshape(g.dim, g.dim)


def dump_trajectory(g: Generator, rho: np.ndarray, total_time: float, path, samples: int = 100,
                    h_max: float = DEFAULT_H_MAX) -> None:
    """Debug CSV of the node populations: t, rho_diag_0..rho_diag_n, p_exit."""
    header = ["t"] + [f"rho_diag_{i}" for i in range(g.dim)] + ["p_exit"]
    times = np.linspace(0.0, total_time, samples + 1)
    lines = [",".join(header)]
    current = rho
    for idx, t in enumerate(times):
        if idx > 0:
            current = evolve(g, current, times[idx] - times[idx - 1], h_max=h_max)
        diag = np.diagonal(current).real
        fields = [repr(float(t))] + [repr(float(v)) for v in diag]
        fields.append(repr(escape_probability(current)))
        lines.append(",".join(fields))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_density_matrix
from qmaze.errors import CapabilityError, NumericalInstabilityError
from qmaze.lindblad import (
    apply_generator,
    build_generator,
    check_density_matrix,
    dump_trajectory,
    escape_probability,
    evolve,
    exact_evolve,
    initial_state,
    liouvillian_matrix,
)
from qmaze.maze import WallAction, apply_action, generate_perfect_maze


def test_generator_pieces_two_node_chain(chain2):
    g = build_generator(chain2, p=0.3)
    assert g.dim == 3
    assert g.sink == 2
    # unit degrees: incoherent amplitude (A_ij/d_j) = 1 -> rate 1, scaled by p
    assert g.pump[0, 1] == pytest.approx(0.3)
    assert g.pump[1, 0] == pytest.approx(0.3)
    # sink feed 2*sink_rate from the exit node
    assert g.pump[2, 1] == pytest.approx(2.0)
    assert g.decay[1] == pytest.approx(0.3 + 2.0)
    assert g.decay[2] == 0.0
    # hamiltonian is the adjacency extended by a zero sink row/column
    assert g.hamiltonian[0, 1] == 1.0
    assert (g.hamiltonian[2, :] == 0).all()


def test_generator_isolated_node_has_no_incoherent_hops():
    maze = generate_perfect_maze(2, 1, seed=0)
    maze = apply_action(maze, WallAction.toggle(0))  # remove the only link
    g = build_generator(maze, p=1.0)
    assert (g.pump[:2, :2] == 0).all()
    assert g.decay[0] == 0.0


def test_generator_validates_arguments(chain2):
    with pytest.raises(ValueError):
        build_generator(chain2, p=-0.1)
    with pytest.raises(ValueError):
        build_generator(chain2, p=1.1)
    with pytest.raises(ValueError):
        build_generator(chain2, p=0.5, sink_rate=-1.0)


def test_rhs_p_limits(maze3x3):
    rng = np.random.default_rng(0)
    rho = random_density_matrix(maze3x3.n_nodes + 1, rng)
    quantum = build_generator(maze3x3, p=0.0)
    classical = build_generator(maze3x3, p=1.0)
    # p=0: no incoherent pumping beyond the sink feed
    assert (quantum.pump[:-1, :] == 0).all()
    # p=1: the commutator term vanishes; a diagonal state stays diagonal
    diag = np.diag(np.diag(rho)).astype(np.complex128)
    diag /= np.trace(diag).real
    out = apply_generator(classical, diag)
    off = out - np.diag(np.diag(out))
    assert np.abs(off).max() < 1e-15


def test_rhs_sink_state_is_fixed_point(chain2):
    g = build_generator(chain2, p=0.5)
    rho = np.zeros((3, 3), dtype=np.complex128)
    rho[2, 2] = 1.0
    assert np.abs(apply_generator(g, rho)).max() == 0.0


def test_rhs_traceless_and_hermitian(maze3x3):
    rng = np.random.default_rng(1)
    g = build_generator(maze3x3, p=0.5)
    for _ in range(5):
        rho = random_density_matrix(g.dim, rng)
        out = apply_generator(g, rho)
        assert abs(np.trace(out)) < 1e-12
        assert np.abs(out - out.conj().T).max() < 1e-12


def test_rhs_hand_derived_three_level_case(chain2):
    # 2-node chain + sink at p=0 from |0><0|: populations frozen at t=0,
    # the commutator feeds the coherence d(rho_01)/dt = +i*(1-p)
    g = build_generator(chain2, p=0.0)
    rho = initial_state(chain2)
    out = apply_generator(g, rho)
    assert out[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert out[0, 1].imag == pytest.approx(1.0)
    assert out[1, 0].imag == pytest.approx(-1.0)
    # and against the independent superoperator route
    vec = (liouvillian_matrix(g) @ rho.reshape(-1)).reshape(3, 3)
    assert np.abs(out - vec).max() < 1e-12


def test_rhs_matches_liouvillian_matrix(maze3x3):
    rng = np.random.default_rng(2)
    for p in (0.0, 0.3, 1.0):
        g = build_generator(maze3x3, p=p)
        rho = random_density_matrix(g.dim, rng)
        direct = apply_generator(g, rho)
        via_matrix = (liouvillian_matrix(g) @ rho.reshape(-1)).reshape(g.dim, g.dim)
        assert np.abs(direct - via_matrix).max() < 1e-12


def test_rhs_rejects_dimension_mismatch(chain2):
    g = build_generator(chain2, p=0.5)
    with pytest.raises(ValueError):
        apply_generator(g, np.eye(4, dtype=np.complex128))


def test_evolve_zero_time_is_identity(chain2):
    g = build_generator(chain2, p=0.5)
    rho = initial_state(chain2)
    out = evolve(g, rho, 0.0)
    assert (out == rho).all()
    assert out is not rho


def test_evolve_rabi_oscillation(chain2):
    # closed two-level system: population transfers as sin^2(t)
    g = build_generator(chain2, p=0.0, sink_rate=0.0)
    rho = initial_state(chain2)
    out = evolve(g, rho, np.pi / 2)
    assert out[1, 1].real == pytest.approx(1.0, abs=1e-6)
    for t in (0.3, 1.0, 2.2):
        out = evolve(g, initial_state(chain2), t)
        assert out[1, 1].real == pytest.approx(np.sin(t) ** 2, abs=1e-6)
        assert out[0, 0].real == pytest.approx(np.cos(t) ** 2, abs=1e-6)


def test_evolve_classical_limit_matches_rate_equation(chain2):
    # p=1 diagonal dynamics vs the exact exponential of the classical rate
    # matrix (hop rates 1 between the two nodes, drain 2 from the exit)
    g = build_generator(chain2, p=1.0)
    rho = initial_state(chain2)
    out = evolve(g, rho, 1.0)
    rates = np.array([
        [-1.0, 1.0, 0.0],
        [1.0, -3.0, 0.0],
        [0.0, 2.0, 0.0],
    ])
    expected = expm(rates * 1.0) @ np.array([1.0, 0.0, 0.0])
    assert np.abs(np.diagonal(out).real - expected).max() < 1e-6


def test_evolve_preserves_physicality(maze3x3):
    g = build_generator(maze3x3, p=0.2)
    rho = initial_state(maze3x3)
    total = 0.0
    while total < 224.0:
        rho = evolve(g, rho, 22.4)
        total += 22.4
        check_density_matrix(rho)


def test_evolve_purity_conserved_in_closed_quantum_limit(maze3x3):
    g = build_generator(maze3x3, p=0.0, sink_rate=0.0)
    rho = initial_state(maze3x3)
    out = evolve(g, rho, 50.0)
    purity = np.trace(out @ out).real
    assert purity == pytest.approx(1.0, abs=1e-6)


def test_evolve_raises_on_instability(chain2):
    g = build_generator(chain2, p=0.0)
    rho = initial_state(chain2)
    with pytest.raises(NumericalInstabilityError):
        evolve(g, rho, 200.0, h_max=1.9)


def test_evolve_rejects_bad_arguments(chain2):
    g = build_generator(chain2, p=0.5)
    rho = initial_state(chain2)
    with pytest.raises(ValueError):
        evolve(g, rho, -1.0)
    with pytest.raises(ValueError):
        evolve(g, rho, 1.0, h_max=0.0)
    with pytest.raises(ValueError):
        evolve(g, np.eye(5, dtype=np.complex128), 1.0)


def test_exact_evolve_identity_and_trace(maze3x3):
    rng = np.random.default_rng(3)
    g = build_generator(maze3x3, p=0.5)
    rho = random_density_matrix(g.dim, rng)
    out0 = exact_evolve(g, rho, 0.0)
    assert np.abs(out0 - rho).max() < 1e-12
    out = exact_evolve(g, rho, 17.0)
    assert abs(np.trace(out).real - 1.0) < 1e-10


def test_exact_evolve_guard():
    maze = generate_perfect_maze(4, 4, seed=0)
    g = build_generator(maze, p=0.5)
    with pytest.raises(CapabilityError):
        exact_evolve(g, initial_state(maze), 1.0)
    # raising the guard admits the dimension
    out = exact_evolve(g, initial_state(maze), 0.5, max_dim=17)
    assert out.shape == (17, 17)


def test_evolve_matches_exact_on_random_graph():
    # 4-node graph with an extra toggled edge, the documented oracle case
    maze = generate_perfect_maze(2, 2, seed=5)
    maze = apply_action(maze, WallAction.toggle(2))
    g = build_generator(maze, p=0.5)
    rho = initial_state(maze)
    a = evolve(g, rho, 5.0)
    b = exact_evolve(g, rho, 5.0)
    assert np.abs(a - b).max() < 1e-6


def test_sink_population_is_monotone(maze3x3):
    g = build_generator(maze3x3, p=0.5)
    rho = initial_state(maze3x3)
    prev = 0.0
    for _ in range(100):
        rho = evolve(g, rho, 0.5)
        current = escape_probability(rho)
        assert current >= prev - 1e-12
        prev = current


def test_escape_probability_examples(chain2):
    rho = initial_state(chain2)
    assert escape_probability(rho) == 0.0
    sink = np.zeros((3, 3), dtype=np.complex128)
    sink[2, 2] = 1.0
    assert escape_probability(sink) == 1.0
    # connected graphs drain completely at long times
    g = build_generator(chain2, p=0.5)
    late = exact_evolve(g, rho, 200.0)
    assert escape_probability(late) >= 0.999


def test_initial_state_examples(maze3x3):
    rho = initial_state(maze3x3)
    assert rho.shape == (10, 10)
    assert np.trace(rho).real == 1.0
    assert np.trace(rho @ rho).real == 1.0
    assert rho[0, 0] == 1.0
    assert np.abs(rho).sum() == 1.0
    one_cell = generate_perfect_maze(1, 1, seed=0)
    assert initial_state(one_cell).shape == (2, 2)


def test_classical_limit_keeps_diagonal_states_diagonal(maze3x3):
    g = build_generator(maze3x3, p=1.0)
    rho = initial_state(maze3x3)
    for _ in range(10):
        rho = evolve(g, rho, 2.8)
        off = rho - np.diag(np.diag(rho))
        assert np.abs(off).max() <= 1e-10


def test_check_density_matrix_rejections():
    good = np.eye(3, dtype=np.complex128) / 3
    check_density_matrix(good)
    bad_herm = good.copy()
    bad_herm[0, 1] = 0.1
    with pytest.raises(ValueError):
        check_density_matrix(bad_herm)
    with pytest.raises(ValueError):
        check_density_matrix(good * 1.5)
    not_psd = np.diag([1.1, -0.1, 0.0]).astype(np.complex128)
    with pytest.raises(ValueError):
        check_density_matrix(not_psd)
    with pytest.raises(ValueError):
        check_density_matrix(good * np.nan)
    with pytest.raises(ValueError):
        check_density_matrix(np.ones((2, 3), dtype=np.complex128))


def test_dump_trajectory(tmp_path, chain2):
    g = build_generator(chain2, p=0.5)
    path = tmp_path / "traj.csv"
    dump_trajectory(g, initial_state(chain2), 5.0, path, samples=10)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,rho_diag_0,rho_diag_1,rho_diag_2,p_exit"
    assert len(lines) == 12
    last = [float(tok) for tok in lines[-1].split(",")]
    assert last[0] == 5.0
    assert last[3] == pytest.approx(last[4])  # sink diagonal == p_exit
    assert sum(last[1:4]) == pytest.approx(1.0, abs=1e-6)

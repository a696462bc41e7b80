import numpy as np
import pytest

from qmaze.maze import (
    Maze,
    WallAction,
    apply_action,
    degree,
    generate_perfect_maze,
    grid_candidate_edges,
    load_maze,
    save_maze,
)


@pytest.mark.parametrize("width,height", [(1, 1), (2, 1), (2, 2), (3, 3), (6, 6), (4, 7)])
@pytest.mark.parametrize("seed", [0, 1, 42])
def test_generation_is_a_spanning_tree(width, height, seed):
    maze = generate_perfect_maze(width, height, seed)
    n = width * height
    assert maze.n_nodes == n
    assert maze.n_links == n - 1
    assert maze.is_connected()
    adj = maze.adjacency
    assert (adj == adj.T).all()
    assert (np.diag(adj) == 0).all()
    assert set(np.unique(adj)) <= {0, 1}
    # links only between grid-adjacent cells
    edge_set = set(maze.candidate_edges)
    for i, j in zip(*np.nonzero(np.triu(adj))):
        assert (int(i), int(j)) in edge_set


def test_candidate_edge_count():
    for width, height in [(1, 1), (2, 1), (6, 6), (3, 5)]:
        edges = grid_candidate_edges(width, height)
        assert len(edges) == height * (width - 1) + width * (height - 1)
        assert all(i < j for i, j in edges)
    assert len(grid_candidate_edges(6, 6)) == 60


def test_generation_deterministic():
    a = generate_perfect_maze(6, 6, seed=7)
    b = generate_perfect_maze(6, 6, seed=7)
    assert (a.adjacency == b.adjacency).all()
    c = generate_perfect_maze(6, 6, seed=8)
    assert (a.adjacency != c.adjacency).any()


def test_single_cell_maze():
    maze = generate_perfect_maze(1, 1, seed=0)
    assert maze.n_nodes == 1
    assert maze.n_links == 0
    assert maze.entrance == maze.exit_node == 0


def test_entrance_exit_corners():
    maze = generate_perfect_maze(6, 6, seed=3)
    assert maze.entrance == 0
    assert maze.exit_node == 35


def test_generation_rejects_bad_dimensions():
    for width, height in [(0, 3), (3, 0), (-1, 2)]:
        with pytest.raises(ValueError):
            generate_perfect_maze(width, height, seed=0)


def test_degree_matches_column_sum(maze6x6):
    for j in range(maze6x6.n_nodes):
        assert degree(maze6x6, j) == int(maze6x6.adjacency[:, j].sum())


def test_degree_examples(chain2, maze6x6):
    assert degree(chain2, 0) == 1
    # fresh spanning-tree interior node degree stays within grid bounds
    for j in range(maze6x6.n_nodes):
        assert 1 <= degree(maze6x6, j) <= 4
    # isolate node 0 by building all its walls
    maze = maze6x6
    for e, (i, j) in enumerate(maze.candidate_edges):
        if 0 in (i, j) and maze.adjacency[i, j]:
            maze = apply_action(maze, WallAction.toggle(e))
    assert degree(maze, 0) == 0


def test_degree_rejects_out_of_range(chain2):
    with pytest.raises(ValueError):
        degree(chain2, 2)


def test_toggle_is_involution(maze6x6):
    for e in [0, 17, 59]:
        once = apply_action(maze6x6, WallAction.toggle(e))
        twice = apply_action(once, WallAction.toggle(e))
        assert (twice.adjacency == maze6x6.adjacency).all()
        assert (once.adjacency != maze6x6.adjacency).any()


def test_noop_returns_identical_adjacency(maze6x6):
    after = apply_action(maze6x6, WallAction.noop())
    assert (after.adjacency == maze6x6.adjacency).all()


def test_toggle_absent_edge_adds_link(maze6x6):
    assert maze6x6.n_links == 35
    absent = next(
        e for e, (i, j) in enumerate(maze6x6.candidate_edges)
        if not maze6x6.adjacency[i, j]
    )
    after = apply_action(maze6x6, WallAction.toggle(absent))
    assert after.n_links == 36


def test_actions_preserve_symmetry_and_diagonal(maze6x6):
    rng = np.random.default_rng(0)
    maze = maze6x6
    for _ in range(50):
        e = int(rng.integers(maze.n_candidate_edges + 1))
        action = WallAction.noop() if e == maze.n_candidate_edges else WallAction.toggle(e)
        maze = apply_action(maze, action)
        assert (maze.adjacency == maze.adjacency.T).all()
        assert (np.diag(maze.adjacency) == 0).all()


def test_apply_action_does_not_mutate_input(maze6x6):
    before = maze6x6.adjacency.copy()
    apply_action(maze6x6, WallAction.toggle(0))
    assert (maze6x6.adjacency == before).all()


def test_apply_action_rejects_bad_edge(maze6x6):
    with pytest.raises(ValueError):
        apply_action(maze6x6, WallAction.toggle(60))
    with pytest.raises(ValueError):
        apply_action(maze6x6, WallAction.toggle(-1))


def test_save_load_round_trip(tmp_path, maze6x6):
    path = tmp_path / "maze.txt"
    save_maze(maze6x6, path)
    loaded = load_maze(path)
    assert loaded.width == maze6x6.width
    assert loaded.height == maze6x6.height
    assert loaded.entrance == maze6x6.entrance
    assert loaded.exit_node == maze6x6.exit_node
    assert (loaded.adjacency == maze6x6.adjacency).all()


def test_save_load_round_trip_after_actions(tmp_path, maze6x6):
    maze = apply_action(maze6x6, WallAction.toggle(5))
    maze = apply_action(maze, WallAction.toggle(40))
    path = tmp_path / "maze.txt"
    save_maze(maze, path)
    assert (load_maze(path).adjacency == maze.adjacency).all()


def test_loader_validates(tmp_path):
    bad_header = tmp_path / "a.txt"
    bad_header.write_text("2 2 0\n")
    with pytest.raises(ValueError):
        load_maze(bad_header)

    non_adjacent = tmp_path / "b.txt"
    non_adjacent.write_text("2 2 0 3\n0 3\n")
    with pytest.raises(ValueError):
        load_maze(non_adjacent)

    duplicate = tmp_path / "c.txt"
    duplicate.write_text("2 2 0 3\n0 1\n0 1\n")
    with pytest.raises(ValueError):
        load_maze(duplicate)

    out_of_range = tmp_path / "d.txt"
    out_of_range.write_text("2 2 0 4\n0 1\n")
    with pytest.raises(ValueError):
        load_maze(out_of_range)

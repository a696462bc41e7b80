"""Grid mazes as graphs with a mutable wall topology.

A maze on a ``width x height`` grid is a symmetric 0/1 adjacency matrix over
the row-major cell indices.  A freshly generated maze is a *perfect* maze,
i.e. a spanning tree of the grid graph: every pair of cells is joined by
exactly one path.  Wall actions toggle single grid links and are allowed to
disconnect the graph (dead ends are part of the game).

The walker's sink is *not* part of the adjacency matrix; it is appended as an
extra basis state by the dynamics module and can never be walled off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Maze",
    "WallAction",
    "generate_perfect_maze",
    "degree",
    "apply_action",
    "save_maze",
    "load_maze",
    "grid_candidate_edges",
]


def grid_candidate_edges(width: int, height: int) -> tuple[tuple[int, int], ...]:
    """All grid-adjacent node pairs (i, j) with i < j, in row-major cell order.

    For each cell the east link is listed before the south link, so the
    ordering is stable and independent of any maze instance.  The count is
    height*(width-1) + width*(height-1).
    """
    edges = []
    for r in range(height):
        for c in range(width):
            i = r * width + c
            if c < width - 1:
                edges.append((i, i + 1))
            if r < height - 1:
                edges.append((i, i + width))
    return tuple(edges)


@dataclass(frozen=True)
class Maze:
    """Immutable snapshot of a maze topology.

    ``adjacency`` is an (n, n) int8 matrix, n = width*height, symmetric with
    zero diagonal; entry 1 means the wall between two grid-adjacent cells is
    open.  ``apply_action`` returns a new Maze rather than mutating.
    """

    width: int
    height: int
    adjacency: np.ndarray
    entrance: int
    exit_node: int
    candidate_edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.width * self.height

    @property
    def n_links(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def n_candidate_edges(self) -> int:
        return len(self.candidate_edges)

    def is_connected(self) -> bool:
        """BFS reachability of every node from the entrance."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        seen[self.entrance] = True
        frontier = [self.entrance]
        while frontier:
            nxt = []
            for node in frontier:
                for nbr in np.nonzero(self.adjacency[node])[0]:
                    if not seen[nbr]:
                        seen[nbr] = True
                        nxt.append(int(nbr))
            frontier = nxt
        return bool(seen.all())


@dataclass(frozen=True)
class WallAction:
    """Toggle one candidate edge, or do nothing.

    ``edge_index`` is an index into ``maze.candidate_edges``; None means the
    null action.  Toggling an open link builds a wall, toggling a closed one
    breaks through.
    """

    edge_index: int | None = None

    @classmethod
    def toggle(cls, edge_index: int) -> "WallAction":
        return cls(edge_index=edge_index)

    @classmethod
    def noop(cls) -> "WallAction":
        return cls(edge_index=None)

    @property
    def is_noop(self) -> bool:
        return self.edge_index is None


# Neighbour scan order for the DFS carving; fixed so generation is a pure
# function of (width, height, seed).
_OFFSETS = ((0, 1), (1, 0), (0, -1), (-1, 0))


def generate_perfect_maze(width: int, height: int, seed: int = 0) -> Maze:
    """Carve a random spanning tree of the grid by randomized depth-first search.

    Entrance is the top-left cell (node 0), exit the bottom-right cell
    (node n-1).  Deterministic given the seed.
    """
    if width < 1 or height < 1:
        raise ValueError(f"maze dimensions must be positive, got {width}x{height}")
    rng = np.random.default_rng(seed)
    n = width * height
    adj = np.zeros((n, n), dtype=np.int8)
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    stack = [0]
    while stack:
        node = stack[-1]
        r, c = divmod(node, width)
        nbrs = []
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width and not visited[rr * width + cc]:
                nbrs.append(rr * width + cc)
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        adj[node, nxt] = adj[nxt, node] = 1
        visited[nxt] = True
        stack.append(nxt)
    return Maze(
        width=width,
        height=height,
        adjacency=adj,
        entrance=0,
        exit_node=n - 1,
        candidate_edges=grid_candidate_edges(width, height),
    )


def degree(maze: Maze, j: int) -> int:
    """Number of open links attached to node j (column sum of the adjacency)."""
    if not 0 <= j < maze.n_nodes:
        raise ValueError(f"node index {j} out of range for {maze.n_nodes} nodes")
    return int(maze.adjacency[:, j].sum())


def apply_action(maze: Maze, action: WallAction) -> Maze:
    """Return the maze after one wall action; the input maze is untouched."""
    if action.is_noop:
        return maze
    e = action.edge_index
    if not 0 <= e < maze.n_candidate_edges:
        raise ValueError(
            f"edge index {e} out of range for {maze.n_candidate_edges} candidate edges"
        )
    i, j = maze.candidate_edges[e]
    adj = maze.adjacency.copy()
    adj[i, j] = adj[j, i] = 1 - adj[i, j]
    return Maze(
        width=maze.width,
        height=maze.height,
        adjacency=adj,
        entrance=maze.entrance,
        exit_node=maze.exit_node,
        candidate_edges=maze.candidate_edges,
    )


def save_maze(maze: Maze, path) -> None:
    """Write the text format: `width height entrance exit`, then one `i j` per link."""
    lines = [f"{maze.width} {maze.height} {maze.entrance} {maze.exit_node}"]
    n = maze.n_nodes
    for i in range(n):
        for j in range(i + 1, n):
            if maze.adjacency[i, j]:
                lines.append(f"{i} {j}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_maze(path) -> Maze:
    """Read the text format back, validating every structural invariant."""
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows or len(rows[0]) != 4:
        raise ValueError(f"{path}: malformed header, expected 'width height entrance exit'")
    width, height, entrance, exit_node = (int(tok) for tok in rows[0])
    if width < 1 or height < 1:
        raise ValueError(f"{path}: non-positive maze dimensions {width}x{height}")
    n = width * height
    if not (0 <= entrance < n and 0 <= exit_node < n):
        raise ValueError(f"{path}: entrance/exit out of range")
    edges = grid_candidate_edges(width, height)
    edge_set = set(edges)
    adj = np.zeros((n, n), dtype=np.int8)
    for row in rows[1:]:
        if len(row) != 2:
            raise ValueError(f"{path}: malformed link line {row!r}")
        i, j = int(row[0]), int(row[1])
        if (i, j) not in edge_set:
            raise ValueError(f"{path}: ({i}, {j}) is not a grid-adjacent pair")
        if adj[i, j]:
            raise ValueError(f"{path}: duplicate link ({i}, {j})")
        adj[i, j] = adj[j, i] = 1
    return Maze(
        width=width,
        height=height,
        adjacency=adj,
        entrance=entrance,
        exit_node=exit_node,
        candidate_edges=edges,
    )

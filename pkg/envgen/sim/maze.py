import logging

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from envgen.core import Domain, Environment, wall_count
from envgen.errors import DegenerateMazeError, DomainError
from .graph import UNREACHABLE, GridGraph

logger = logging.getLogger(__name__)

Coord = Tuple[int, int]

# sources per breadth-first-search batch
CHUNK = 256


@dataclass(frozen=True)
class MazeMetrics:
    solvable: int
    start: Coord
    goal: Coord
    path_length: int
    wall_count: int


def horizon_bound(env: Environment) -> int:
    """Episode length granted to a maze agent, 2 * width * height (648 for 18x18)"""
    return 2 * env.width * env.height


def _diameter(graph: GridGraph, cells: np.ndarray) -> Tuple[int, int, int]:
    best, pair = -1, (int(cells[0]), int(cells[1]))
    for lo in range(0, cells.size, CHUNK):
        sources = cells[lo : lo + CHUNK]
        dist = graph.distances(sources)[:, cells]
        # only pairs (a, b) with b after a, so the first maximum is the lexicographically smallest pair
        dist[np.tril_indices(sources.size, k=lo, m=cells.size)] = UNREACHABLE
        row_max = dist.max(axis=1)
        i = int(np.argmax(row_max))
        if row_max[i] > best:
            best = int(row_max[i])
            pair = (int(sources[i]), int(cells[int(np.argmax(dist[i]))]))
    return best, pair[0], pair[1]


def maze_metrics(env: Environment, start: Optional[Coord] = None, goal: Optional[Coord] = None) -> MazeMetrics:
    """
    Solvability, path length and wall count of a bordered maze.

    Without an explicit start and goal these are the two ends of the longest shortest path,
    found by breadth-first search from every traversable tile. A maze whose traversable tiles
    are all isolated is unsolvable with path length 0.
    """
    if env.domain is not Domain.MAZE:
        raise DomainError(f'Maze metrics need a maze, got {env.domain.value}')
    graph = GridGraph(env)
    cells = graph.cells
    if cells.size < 2:
        raise DegenerateMazeError(f'{env!r} has {cells.size} traversable tile(s), need at least 2')
    walls = wall_count(env)

    if start is None or goal is None:
        length, a, b = _diameter(graph, cells)
        solvable = int(length > 0)
        return MazeMetrics(solvable, graph.coord(a), graph.coord(b), max(length, 0), walls)

    a = start[0] * env.width + start[1]
    b = goal[0] * env.width + goal[1]
    if not (graph.traversable[a] and graph.traversable[b]):
        return MazeMetrics(0, tuple(start), tuple(goal), 0, walls)
    d = int(graph.distance_from(a)[b])
    if d == UNREACHABLE:
        return MazeMetrics(0, tuple(start), tuple(goal), 0, walls)
    return MazeMetrics(1, tuple(start), tuple(goal), d, walls)

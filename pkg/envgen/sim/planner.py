"""
Windowed prioritized planning.

Each agent runs a space-time A* over (cell, time, goals completed) against a reservation
table holding the paths of the agents planned before it. Search ends at the window
boundary, or earlier once every queued goal is done and the final cell stays free until
the boundary. An agent whose search fails waits in place; planned agents that collide
with such a wait are re-planned after it.
"""
import heapq
import logging

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .graph import UNREACHABLE, GridGraph
from .tasks import Task

logger = logging.getLogger(__name__)

Path = List[int]


class ReservationTable:
    def __init__(self):
        self.vertices: Set[Tuple[int, int]] = set()
        self.edges: Set[Tuple[int, int, int]] = set()

    def vertex_free(self, cell: int, t: int) -> bool:
        return (cell, t) not in self.vertices

    def move_free(self, src: int, dst: int, t: int) -> bool:
        """Moving src -> dst, arriving at t, neither lands on a reserved cell nor swaps with an agent"""
        return (dst, t) not in self.vertices and (dst, src, t) not in self.edges

    def reserve(self, path: Path):
        for t in range(1, len(path)):
            self.vertices.add((path[t], t))
            self.edges.add((path[t - 1], path[t], t))

    def release(self, path: Path):
        for t in range(1, len(path)):
            self.vertices.discard((path[t], t))
            self.edges.discard((path[t - 1], path[t], t))

    def conflicts(self, path: Path, other: Path) -> bool:
        for t in range(1, min(len(path), len(other))):
            if path[t] == other[t] or (path[t] == other[t - 1] and path[t - 1] == other[t]):
                return True
        return False


@dataclass
class PlanRequest:
    start: int
    goals: Sequence[Task]
    dwell_left: int = 0


class _Heuristic:
    """Exact remaining cost ignoring other agents: distance to the next goal plus the chained goal legs"""

    def __init__(self, graph: GridGraph, goals: Sequence[Task]):
        self.dists = [graph.distance_from(g.cell) for g in goals]
        self.tail = [0] * (len(goals) + 1)
        for k in range(len(goals) - 1, -1, -1):
            leg = 0
            if k + 1 < len(goals):
                leg = int(self.dists[k + 1][goals[k].cell])
                if leg == UNREACHABLE:
                    leg = 0
            self.tail[k] = goals[k].dwell + leg + self.tail[k + 1]

    def __call__(self, cell: int, k: int) -> Optional[int]:
        if k >= len(self.dists):
            return 0
        d = int(self.dists[k][cell])
        if d == UNREACHABLE:
            return None
        return d + self.tail[k]


def plan_agent(
    graph: GridGraph, table: ReservationTable, request: PlanRequest, window: int, max_expansions: int = 20_000
) -> Optional[Path]:
    """Space-time A* for one agent; returns the cells occupied at t = 0..window or None"""
    goals = list(request.goals)
    n_goals = len(goals)
    h = _Heuristic(graph, goals)

    prefix = [request.start]
    t0 = min(request.dwell_left, window)
    for t in range(1, t0 + 1):
        if not table.vertex_free(request.start, t):
            return None
        prefix.append(request.start)

    h0 = h(request.start, 0)
    if h0 is None:
        return None
    extra0 = max(0, request.dwell_left - window)

    counter = 0
    # (f, -t, counter, cell, t, k, extra)
    open_heap = [(t0 + h0 + extra0, -t0, counter, request.start, t0, 0, extra0)]
    parents: Dict[Tuple[int, int, int], Tuple[Optional[Tuple[int, int, int]], List[int]]] = {
        (request.start, t0, 0): (None, prefix)
    }
    closed = set()
    expansions = 0

    while open_heap:
        f, _, _, cell, t, k, extra = heapq.heappop(open_heap)
        key = (cell, t, k)
        if key in closed:
            continue
        closed.add(key)

        if t >= window or (k == n_goals and _free_until(table, cell, t, window)):
            return _unwind(parents, key, window)

        expansions += 1
        if expansions > max_expansions:
            logger.debug(f'Planner gave up after {expansions} expansions from cell {request.start}')
            return None

        for nxt in [cell, *graph.neighbours[cell]]:
            t1 = t + 1
            if not table.move_free(cell, nxt, t1):
                continue
            k1, t_end, segment, over = k, t1, [nxt], 0
            if k < n_goals and nxt == goals[k].cell:
                k1 = k + 1
                dwell = goals[k].dwell
                t_end = min(t1 + dwell, window)
                over = t1 + dwell - t_end
                if any(not table.vertex_free(nxt, tt) for tt in range(t1 + 1, t_end + 1)):
                    continue
                segment += [nxt] * (t_end - t1)
            nkey = (nxt, t_end, k1)
            if nkey in closed or nkey in parents:
                continue
            hn = h(nxt, k1)
            if hn is None:
                continue
            parents[nkey] = (key, segment)
            counter += 1
            heapq.heappush(open_heap, (t_end + hn + over, -t_end, counter, nxt, t_end, k1, over))
    return None


def _free_until(table: ReservationTable, cell: int, t: int, window: int) -> bool:
    return all(table.vertex_free(cell, tt) for tt in range(t + 1, window + 1))


def _unwind(parents, key, window: int) -> Path:
    segments = []
    while key is not None:
        parent, segment = parents[key]
        segments.append(segment)
        key = parent
    path = [c for segment in reversed(segments) for c in segment]
    path.extend([path[-1]] * (window + 1 - len(path)))
    return path[: window + 1]


def plan_window(
    graph: GridGraph,
    requests: Sequence[PlanRequest],
    window: int,
    rng: np.random.Generator,
    max_expansions: int = 20_000,
) -> Tuple[List[Path], List[bool]]:
    """
    Conflict-free paths of ``window`` steps for all agents under a random priority order.
    Returns the paths and, per agent, whether its search failed so that it waits in place.
    """
    n = len(requests)
    table = ReservationTable()
    paths: List[Optional[Path]] = [None] * n
    failed = [False] * n
    queue = deque(int(i) for i in rng.permutation(n))

    while queue:
        i = queue.popleft()
        req = requests[i]
        path = plan_agent(graph, table, req, window, max_expansions)
        if path is not None:
            table.reserve(path)
            paths[i] = path
            continue

        failed[i] = True
        wait = [req.start] * (window + 1)
        for j in range(n):
            if paths[j] is not None and not failed[j] and table.conflicts(wait, paths[j]):
                table.release(paths[j])
                paths[j] = None
                queue.append(j)
        table.reserve(wait)
        paths[i] = wait
    return paths, failed

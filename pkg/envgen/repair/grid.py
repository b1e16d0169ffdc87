"""Flat-index grid helpers shared by the repair backends"""
from typing import List, Optional, Sequence

import numpy as np

from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from envgen.core.metrics import FOUR_NEIGHBOURS, neighbour_table

# corridor step cost, keeps free moves non-zero for csgraph and prefers short corridors
STEP = 1e-3


def neighbour_count(mask: np.ndarray) -> np.ndarray:
    """Number of set 4-neighbours per cell"""
    m = mask.astype(np.int32)
    out = np.zeros_like(m)
    out[1:, :] += m[:-1, :]
    out[:-1, :] += m[1:, :]
    out[:, 1:] += m[:, :-1]
    out[:, :-1] += m[:, 1:]
    return out


def components(free: np.ndarray):
    labels, count = ndimage.label(free, structure=FOUR_NEIGHBOURS)
    return labels, int(count)


def main_component(labels: np.ndarray, count: int) -> int:
    """Largest component label, lowest label on ties"""
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    return int(np.argmax(sizes)) + 1


def is_connected(free: np.ndarray) -> bool:
    return components(free)[1] <= 1


def locally_removable(free: np.ndarray, r: int, c: int) -> bool:
    """
    Whether the free neighbours of (r, c) stay connected through its 3x3 ring once the cell
    is blocked. Sufficient for global connectivity to survive, not necessary.
    """
    h, w = free.shape
    ring = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    cells = []
    for dr, dc in ring:
        rr, cc = r + dr, c + dc
        cells.append(0 <= rr < h and 0 <= cc < w and bool(free[rr, cc]))
    orth = [cells[i] for i in (1, 3, 5, 7)]
    if sum(orth) <= 1:
        return True
    # walk the ring, 8 positions, counting runs of free cells that contain an orthogonal neighbour
    runs = 0
    start = next((i for i in range(8) if not cells[i]), None)
    if start is None:
        return True
    in_run, has_orth = False, False
    for k in range(1, 9):
        i = (start + k) % 8
        if cells[i]:
            in_run = True
            # diagonal ring cells only link orthogonal neighbours, so a run is unbroken only along the ring
            has_orth |= i % 2 == 1
        elif in_run:
            runs += has_orth
            in_run, has_orth = False, False
    if in_run:
        runs += has_orth
    return runs <= 1


def carve_path(
    blocked: np.ndarray,
    enter_cost: np.ndarray,
    sources: np.ndarray,
    targets: np.ndarray,
) -> Optional[List[int]]:
    """
    Cheapest path from any source cell to any target cell where entering a cell costs
    ``enter_cost`` (inf marks impassable cells). Returns flat indices from target back to
    the source, or None when no target is reachable.
    """
    h, w = blocked.shape
    n = h * w
    table = neighbour_table((h, w))
    rows, cols = np.nonzero(table >= 0)
    dst = table[rows, cols]
    cost = enter_cost.ravel()[dst] + STEP
    ok = np.isfinite(cost)
    graph = csr_matrix((cost[ok], (rows[ok], dst[ok])), shape=(n, n))

    src = np.flatnonzero(sources.ravel())
    dist, pred, _ = dijkstra(graph, directed=True, indices=src, return_predecessors=True, min_only=True)
    tgt = np.flatnonzero(targets.ravel())
    reach = tgt[np.isfinite(dist[tgt])]
    if reach.size == 0:
        return None
    # lowest cost, lowest index on ties
    best = int(reach[np.lexsort((reach, dist[reach]))[0]])
    path = [best]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path


def rank_keys(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random but seeded tie-break rank per cell"""
    return rng.permutation(n)


def lexsort_cells(cells: Sequence[int], *keys) -> List[int]:
    """Sort flat cell indices by the given per-cell keys, first key most significant"""
    cells = np.asarray(cells, dtype=np.int64)
    if cells.size == 0:
        return []
    order = np.lexsort(tuple(np.asarray(k)[cells] for k in reversed(keys)))
    return cells[order].tolist()

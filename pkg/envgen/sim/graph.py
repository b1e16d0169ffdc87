from typing import Dict, List

import numpy as np

from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from envgen.core import Environment
from envgen.core.metrics import neighbour_table

# distance value of unreachable cells
UNREACHABLE = -1


class GridGraph:
    """4-neighbour movement graph over the traversable tiles of an environment, on flat cell indices"""

    def __init__(self, env: Environment):
        self.shape = env.tiles.shape
        self.traversable = env.traversable.ravel().copy()
        table = neighbour_table(self.shape)
        self.neighbours: List[List[int]] = [
            [int(n) for n in row if n >= 0 and self.traversable[n]] if self.traversable[i] else []
            for i, row in enumerate(table)
        ]
        rows, cols = np.nonzero((table >= 0) & self.traversable[:, None])
        dst = table[rows, cols]
        ok = self.traversable[dst]
        n = self.traversable.size
        self.matrix = csr_matrix((np.ones(int(ok.sum())), (rows[ok], dst[ok])), shape=(n, n))
        self._cache: Dict[int, np.ndarray] = {}

    @property
    def cells(self) -> np.ndarray:
        return np.flatnonzero(self.traversable)

    def distances(self, sources) -> np.ndarray:
        """Hop distances from each source (rows) to every cell, UNREACHABLE where there is no path"""
        dist = shortest_path(self.matrix, directed=False, unweighted=True, indices=np.atleast_1d(sources))
        out = np.where(np.isfinite(dist), dist, UNREACHABLE).astype(np.int64)
        return out

    def distance_from(self, cell: int) -> np.ndarray:
        """Cached single-source distances, used as the exact planner heuristic"""
        if (d := self._cache.get(cell)) is None:
            d = self._cache[cell] = self.distances(cell)[0]
        return d

    def coord(self, cell: int):
        return divmod(int(cell), self.shape[1])

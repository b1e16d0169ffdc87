import enum
import logging
import math

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ribs.archives import GridArchive

from envgen.errors import ConfigError, DimensionError, NumericalFailure

logger = logging.getLogger(__name__)

# per-elite bookkeeping stored next to solution/objective/measures in both archives
METADATA_FIELDS = {
    'f_res': ((), np.float64),
    'similarity': ((), np.float64),
    'success_rate': ((), np.float64),
    'eval_seed': ((), np.int64),
    'eval_index': ((), np.int64),
    'env_hash': ((), np.int64),
}


@dataclass(frozen=True)
class ArchiveSpec:
    dims: Tuple[int, ...]
    ranges: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        if not dims or len(dims) != len(ranges):
            raise ConfigError(f'Archive needs one range per dimension, got dims={dims} ranges={ranges}')
        if any(d < 1 for d in dims):
            raise ConfigError(f'Archive dimensions must be positive, got {dims}')
        if any(not lo < hi for lo, hi in ranges):
            raise ConfigError(f'Archive ranges need lo < hi, got {ranges}')
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'ranges', ranges)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @classmethod
    def from_config(cls, config: dict) -> 'ArchiveSpec':
        return cls(tuple(config['dims']), tuple(tuple(r) for r in config['ranges']))

    @classmethod
    def of(cls, archive: GridArchive) -> 'ArchiveSpec':
        return cls(tuple(archive.dims), tuple(zip(archive.lower_bounds, archive.upper_bounds)))

    def archive(
        self,
        solution_dim: int,
        learning_rate: Optional[float] = None,
        threshold_min: float = -math.inf,
        seed=None,
    ) -> GridArchive:
        """
        ribs grid archive over this spec. Without a learning rate the archive keeps the best
        objective per cell; with one, acceptance follows the annealed cell thresholds.
        """
        if learning_rate is not None and not 0 < learning_rate <= 1:
            raise ConfigError(f'Archive learning rate must be in (0, 1], got {learning_rate}')
        if threshold_min == -math.inf and learning_rate not in (None, 1.0):
            raise ConfigError('An unbounded threshold floor needs learning rate 1')
        return GridArchive(
            solution_dim=solution_dim,
            dims=self.dims,
            ranges=self.ranges,
            learning_rate=learning_rate,
            threshold_min=threshold_min,
            seed=seed,
            extra_fields=METADATA_FIELDS,
        )


class AddStatus(enum.IntEnum):
    """Status codes of ``GridArchive.add``"""

    REJECTED = 0
    REPLACED = 1
    INSERTED = 2


def _check_measures(archive: GridArchive, measures) -> np.ndarray:
    m = np.asarray(measures, dtype=np.float64)
    if m.shape != (archive.measure_dim,):
        raise DimensionError(f'Expected {archive.measure_dim} measures, got {m.shape}')
    if not np.all(np.isfinite(m)):
        raise NumericalFailure(f'Non-finite measures {m.tolist()}')
    return m


def archive_index(archive: GridArchive, measures: Sequence[float]) -> Tuple[int, ...]:
    """Cell of ``measures``; out-of-range values clamp to the boundary bins"""
    index = archive.index_of_single(_check_measures(archive, measures))
    return tuple(int(i) for i in archive.int_to_grid_index([index])[0])


def flat_index(archive: GridArchive, cell: Sequence[int]) -> int:
    return int(archive.grid_to_int_index([list(cell)])[0])


def _fields(metadata: Optional[Dict[str, object]]) -> dict:
    metadata = metadata or {}
    return {name: metadata.get(name, 0) for name in METADATA_FIELDS}


def result_add(archive: GridArchive, solution, objective: float, measures, metadata=None) -> AddStatus:
    """Insert into an empty cell, replace only on a strictly higher objective"""
    if not math.isfinite(objective):
        raise NumericalFailure(f'Non-finite objective {objective}')
    info = archive.add_single(solution, objective, _check_measures(archive, measures), **_fields(metadata))
    return AddStatus(int(info['status']))


def annealed_add(archive: GridArchive, solution, objective: float, measures, metadata=None) -> Tuple[bool, float]:
    """Returns (accepted, improvement over the cell threshold before the add)"""
    if not math.isfinite(objective):
        raise NumericalFailure(f'Non-finite objective {objective}')
    info = archive.add_single(solution, objective, _check_measures(archive, measures), **_fields(metadata))
    return int(info['status']) > 0, float(info['value'])


@dataclass
class Elite:
    index: int
    cell: Tuple[int, ...]
    solution: np.ndarray
    objective: float
    measures: Tuple[float, ...]
    metadata: Dict[str, object] = field(default_factory=dict)


def elites(archive: GridArchive) -> List[Elite]:
    """Occupied cells ordered by cell index"""
    if archive.empty:
        return []
    data = archive.data()
    order = np.argsort(data['index'], kind='stable')
    cells = archive.int_to_grid_index(data['index'][order])
    out = []
    for row, cell in zip(order, cells):
        metadata = {name: data[name][row].item() for name in METADATA_FIELDS}
        out.append(
            Elite(
                int(data['index'][row]),
                tuple(int(c) for c in cell),
                np.array(data['solution'][row]),
                float(data['objective'][row]),
                tuple(float(m) for m in data['measures'][row]),
                metadata,
            )
        )
    return out


def best_elite(archive: GridArchive) -> Optional[Elite]:
    """Highest objective, lowest cell index on ties"""
    best = None
    for elite in elites(archive):
        if best is None or elite.objective > best.objective:
            best = elite
    return best


def thresholds(archive: GridArchive) -> Dict[int, float]:
    """Threshold per occupied cell of an archive with a learning rate"""
    if archive.empty:
        return {}
    data = archive.data(['index', 'threshold'])
    return {int(i): float(t) for i, t in zip(data['index'], data['threshold'])}


def qd_score(archive: GridArchive) -> float:
    return float(archive.stats.qd_score)


def coverage(archive: GridArchive) -> float:
    return float(archive.stats.coverage)

import logging

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from scipy import ndimage

from envgen.errors import DimensionError
from .environment import Environment, warehouse_template
from .metrics import FOUR_NEIGHBOURS
from .tiles import STATIONS, Domain, ManufacturingTile, WarehouseTile

logger = logging.getLogger(__name__)

Coord = Tuple[int, int]

# constraint ids
CONNECTIVITY = 'connectivity'
SHELF_ENDPOINT = 'shelf-endpoint-adjacency'
SHELF_COUNT = 'shelf-count'
FROZEN_REGION = 'frozen-region'
STATION_ENDPOINT = 'station-endpoint-adjacency'
STATION_TYPES = 'station-types'


@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str
    tiles: Tuple[Coord, ...] = ()


@dataclass(frozen=True)
class ValidityReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def constraints(self):
        return sorted(set(v.constraint for v in self.violations))

    def __str__(self):
        if self.is_valid:
            return 'valid'
        return '; '.join(f'[{v.constraint}] {v.detail}' for v in self.violations)


def neighbour_any(mask: np.ndarray) -> np.ndarray:
    """True where at least one 4-neighbour is set in ``mask``"""
    out = np.zeros_like(mask, dtype=bool)
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    return out


def _coords(mask: np.ndarray, limit: int = 20) -> Tuple[Coord, ...]:
    return tuple((int(r), int(c)) for r, c in np.argwhere(mask)[:limit])


def _check_connected(free: np.ndarray, what: str) -> Optional[Violation]:
    labels, count = ndimage.label(free, structure=FOUR_NEIGHBOURS)
    if count <= 1:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    main = int(np.argmax(sizes)) + 1
    stray = (labels != main) & free
    return Violation(CONNECTIVITY, f'{what} form {count} components instead of one', _coords(stray))


def _check_mutual(a: np.ndarray, b: np.ndarray, constraint: str, a_name: str, b_name: str) -> List[Violation]:
    out = []
    lonely_a = a & ~neighbour_any(b)
    if lonely_a.any():
        out.append(Violation(constraint, f'{int(lonely_a.sum())} {a_name} without adjacent {b_name}', _coords(lonely_a)))
    lonely_b = b & ~neighbour_any(a)
    if lonely_b.any():
        out.append(Violation(constraint, f'{int(lonely_b.sum())} {b_name} without adjacent {a_name}', _coords(lonely_b)))
    return out


def _validate_warehouse(env: Environment, n_shelves: Optional[int], spacing: int) -> List[Violation]:
    tiles = env.tiles
    shelves = tiles == WarehouseTile.SHELF
    endpoints = tiles == WarehouseTile.ENDPOINT
    violations = []

    if v := _check_connected(~shelves, 'non-shelf tiles'):
        violations.append(v)
    violations.extend(_check_mutual(shelves, endpoints, SHELF_ENDPOINT, 'shelves', 'endpoints'))

    if n_shelves is not None and int(shelves.sum()) != n_shelves:
        violations.append(Violation(SHELF_COUNT, f'{int(shelves.sum())} shelves, expected {n_shelves}'))

    try:
        template = warehouse_template(env.width, env.height, spacing)
    except DimensionError as e:
        violations.append(Violation(FROZEN_REGION, str(e)))
    else:
        frozen = template.frozen_mask
        changed = frozen & (tiles != template.tiles)
        if changed.any() or not np.array_equal(frozen, env.frozen_mask):
            violations.append(
                Violation(FROZEN_REGION, f'{int(changed.sum())} tiles of the non-storage area changed', _coords(changed))
            )
    return violations


def _validate_manufacturing(env: Environment) -> List[Violation]:
    tiles = env.tiles
    stations = np.isin(tiles, STATIONS)
    endpoints = tiles == ManufacturingTile.ENDPOINT
    violations = []

    if v := _check_connected(~stations, 'empty and endpoint tiles'):
        violations.append(v)
    violations.extend(_check_mutual(endpoints, stations, STATION_ENDPOINT, 'endpoints', 'workstations'))

    missing = [t.name for t in STATIONS if not (tiles == t).any()]
    if missing:
        violations.append(Violation(STATION_TYPES, f'missing workstation types: {", ".join(missing)}'))
    return violations


def validate(env: Environment, n_shelves: Optional[int] = None, spacing: int = 3) -> ValidityReport:
    """Check the domain constraints. The warehouse shelf count is only checked when ``n_shelves`` is given."""
    if env.domain.is_warehouse:
        violations = _validate_warehouse(env, n_shelves, spacing)
    elif env.domain is Domain.MANUFACTURING:
        violations = _validate_manufacturing(env)
    else:
        violations = []

    report = ValidityReport(violations)
    if not report.is_valid:
        logger.debug(f'{env!r} invalid: {report}')
    return report

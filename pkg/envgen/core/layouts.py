"""Hand-built baseline layouts (shelf rows flanked by endpoint rows)"""
import logging

from typing import Optional

import numpy as np

from envgen.errors import DimensionError, InfeasibleRepairError
from .environment import WAREHOUSE_BORDER, Environment, warehouse_template
from .tiles import STATIONS, Domain, ManufacturingTile, WarehouseTile

logger = logging.getLogger(__name__)


def _block_rows(height: int, width: int, block: int):
    """Yield (row, columns) of obstacle rows: period of 4 rows (aisle, endpoint, obstacle, endpoint)"""
    cols = [c for c in range(width) if c % (block + 1) != 0]
    for row in range(2, height - 1, 4):
        yield row, cols


def human_warehouse(
    width: int, height: int, n_shelves: int, block: int = 5, spacing: int = 3, domain=Domain.WAREHOUSE_EVEN
) -> Environment:
    template = warehouse_template(width, height, spacing)
    storage = np.zeros((height, width - 2 * WAREHOUSE_BORDER), dtype=np.uint8)

    placed = 0
    for row, cols in _block_rows(*storage.shape, block):
        for col in cols:
            if placed == n_shelves:
                break
            storage[row, col] = WarehouseTile.SHELF
            placed += 1
    if placed < n_shelves:
        raise InfeasibleRepairError(f'Human layout of {width}x{height} holds only {placed} of {n_shelves} shelves')

    shelves = storage == WarehouseTile.SHELF
    around = np.zeros_like(shelves)
    around[:-1, :] |= shelves[1:, :]
    around[1:, :] |= shelves[:-1, :]
    storage[around & ~shelves] = WarehouseTile.ENDPOINT

    tiles = template.tiles.copy()
    tiles[:, WAREHOUSE_BORDER : width - WAREHOUSE_BORDER] = storage
    return Environment(Domain.parse(domain), tiles, template.frozen_mask)


def human_manufacturing(width: int, height: int, block: int = 5) -> Environment:
    tiles = np.zeros((height, width), dtype=np.uint8)
    kinds = 0
    for row, cols in _block_rows(height, width, block):
        for i, col in enumerate(cols):
            tiles[row, col] = STATIONS[(i + kinds) % len(STATIONS)]
        kinds += 1
    stations = np.isin(tiles, STATIONS)
    if not all((tiles == t).any() for t in STATIONS):
        raise DimensionError(f'Manufacturing layout of {width}x{height} is too small for all station types')
    around = np.zeros_like(stations)
    around[:-1, :] |= stations[1:, :]
    around[1:, :] |= stations[:-1, :]
    tiles[around & ~stations] = ManufacturingTile.ENDPOINT
    return Environment.create(Domain.MANUFACTURING, tiles)


def human_layout(domain, width: int, height: int, n_shelves: Optional[int] = None, **kwargs) -> Environment:
    domain = Domain.parse(domain)
    if domain.is_warehouse:
        if n_shelves is None:
            raise ValueError('Warehouse layouts need a shelf count')
        return human_warehouse(width, height, n_shelves, domain=domain, **kwargs)
    if domain is Domain.MANUFACTURING:
        return human_manufacturing(width, height, **kwargs)
    raise ValueError(f'No human-designed layout for the {domain.value} domain')

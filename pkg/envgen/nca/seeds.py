import numpy as np

from envgen.core import WAREHOUSE_BORDER, Domain, Environment, warehouse_template
from envgen.errors import SeedSizeError

BLOCK = 2


def make_seed(domain, width: int, height: int, spacing: int = 3) -> Environment:
    """Central 2x2 block of the domain's seed tile on an Empty grid (warehouses keep their template border)"""
    domain = Domain.parse(domain)
    if width < BLOCK or height < BLOCK:
        raise SeedSizeError(f'Seed needs at least {BLOCK}x{BLOCK} tiles, got {width}x{height}')

    if domain.is_warehouse:
        if width - 2 * WAREHOUSE_BORDER < BLOCK:
            raise SeedSizeError(f'Warehouse of width {width} has no room for the seed block')
        template = warehouse_template(width, height, spacing)
        tiles, mask = template.tiles.copy(), template.frozen_mask
    else:
        tiles = np.zeros((height, width), dtype=np.uint8)
        mask = np.zeros((height, width), dtype=bool)

    top, left = (height - BLOCK) // 2, (width - BLOCK) // 2
    tiles[top : top + BLOCK, left : left + BLOCK] = domain.seed_tile
    return Environment(domain, tiles, mask)

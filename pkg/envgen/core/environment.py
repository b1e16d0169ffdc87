import hashlib
import logging

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from envgen.errors import DimensionError, FormatError
from .tiles import Domain, MazeTile, WarehouseTile, char_map

logger = logging.getLogger(__name__)

# columns of fixed non-storage area on each side of a warehouse
WAREHOUSE_BORDER = 2


@dataclass(frozen=True, eq=False)
class Environment:
    """Rectangular tile grid of one domain. ``tiles`` is indexed [row, col] and never mutated."""

    domain: Domain
    tiles: np.ndarray
    frozen_mask: np.ndarray

    def __post_init__(self):
        domain = Domain.parse(self.domain)
        tiles = np.array(self.tiles, dtype=np.uint8, copy=True)
        mask = np.array(self.frozen_mask, dtype=bool, copy=True)
        if tiles.ndim != 2 or tiles.size == 0:
            raise DimensionError(f'Environment tiles must be a non-empty 2-D grid, got shape {tiles.shape}')
        if mask.shape != tiles.shape:
            raise DimensionError(f'Frozen mask shape {mask.shape} does not match tiles {tiles.shape}')
        if tiles.max() >= domain.n_types:
            raise ValueError(f'Tile value {int(tiles.max())} is not a {domain.value} tile')
        tiles.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, 'domain', domain)
        object.__setattr__(self, 'tiles', tiles)
        object.__setattr__(self, 'frozen_mask', mask)

    @classmethod
    def create(cls, domain, tiles, warehouse_spacing: int = 3) -> 'Environment':
        """Build an environment with the domain's frozen mask"""
        domain = Domain.parse(domain)
        tiles = np.asarray(tiles, dtype=np.uint8)
        if domain.is_warehouse:
            mask = warehouse_template(tiles.shape[1], tiles.shape[0], warehouse_spacing).frozen_mask
        else:
            mask = np.zeros(tiles.shape, dtype=bool)
        return cls(domain, tiles, mask)

    @property
    def width(self) -> int:
        return self.tiles.shape[1]

    @property
    def height(self) -> int:
        return self.tiles.shape[0]

    @property
    def size(self) -> int:
        return self.tiles.size

    @property
    def traversable(self) -> np.ndarray:
        return ~np.isin(self.tiles, self.domain.blocked)

    def with_tiles(self, tiles) -> 'Environment':
        return Environment(self.domain, tiles, self.frozen_mask)

    def count(self, *tile_values) -> int:
        return int(np.isin(self.tiles, tile_values).sum())

    def digest(self) -> str:
        h = hashlib.sha1()
        h.update(f'{self.domain.value}:{self.width}x{self.height}:'.encode())
        h.update(self.tiles.tobytes())
        return h.hexdigest()

    def hash_key(self) -> int:
        """First 60 bits of ``digest()``, small enough for an int64 archive field"""
        return int(self.digest()[:15], 16)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.tiles.shape == other.tiles.shape
            and np.array_equal(self.tiles, other.tiles)
            and np.array_equal(self.frozen_mask, other.frozen_mask)
        )

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self):
        return f'<Environment {self.domain.value} {self.width}x{self.height} {self.digest()[:8]}>'

    def to_text(self) -> str:
        chars = char_map(self.domain)
        rows = [''.join(chars[v] for v in row) for row in self.tiles]
        return '\n'.join([f'{self.domain.value} {self.width} {self.height}', *rows]) + '\n'

    @classmethod
    def from_text(cls, text: str) -> 'Environment':
        lines = [line.rstrip('\r') for line in text.splitlines() if line.strip()]
        if not lines:
            raise FormatError('Empty environment file')
        header = lines[0].split()
        if len(header) != 3:
            raise FormatError(f'Malformed header "{lines[0]}", expected "<domain> <width> <height>"')
        try:
            domain = Domain.parse(header[0])
            width, height = int(header[1]), int(header[2])
        except ValueError as e:
            raise FormatError(f'Malformed header "{lines[0]}": {e}') from None

        rows = lines[1:]
        if len(rows) != height or any(len(r) != width for r in rows):
            raise FormatError(f'Grid does not match header dimensions {width}x{height}')
        lookup = {c: i for i, c in enumerate(char_map(domain))}
        try:
            tiles = [[lookup[c] for c in row] for row in rows]
        except KeyError as e:
            raise FormatError(f'Unknown tile character {e} for domain {domain.value}') from None
        return cls.create(domain, tiles)


def warehouse_template(width: int, height: int, spacing: int = 3) -> Environment:
    """Fixed non-storage area: two columns per side, workstations on the outer column every ``spacing`` rows"""
    if width <= 2 * WAREHOUSE_BORDER or height < 1:
        raise DimensionError(f'Warehouse of width {width} has no storage area')
    tiles = np.full((height, width), WarehouseTile.EMPTY, dtype=np.uint8)
    rows = np.arange(1, height, max(1, spacing)) if height > 1 else np.array([0])
    tiles[rows, 0] = WarehouseTile.WORKSTATION
    tiles[rows, width - 1] = WarehouseTile.WORKSTATION
    mask = np.zeros((height, width), dtype=bool)
    mask[:, :WAREHOUSE_BORDER] = True
    mask[:, width - WAREHOUSE_BORDER :] = True
    return Environment(Domain.WAREHOUSE_EVEN, tiles, mask)


def storage_mask(env: Environment) -> np.ndarray:
    """Cells the generator and repair may change"""
    return ~env.frozen_mask


def add_maze_border(env: Environment) -> Environment:
    """Surround a maze interior with a ring of walls"""
    tiles = np.pad(env.tiles, 1, mode='constant', constant_values=MazeTile.WALL)
    return Environment.create(env.domain, tiles)


def maze_interior(env: Environment) -> Environment:
    if env.width < 3 or env.height < 3:
        raise DimensionError(f'Maze {env.width}x{env.height} has no interior')
    return Environment.create(env.domain, env.tiles[1:-1, 1:-1])


def read_environment(path: Union[str, Path]) -> Environment:
    with open(path, encoding='utf-8') as f:
        return Environment.from_text(f.read())


def write_environment(env: Environment, path: Union[str, Path], comment: Optional[str] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(env.to_text())
    logger.debug(f'Wrote {env!r} to {path}' + (f' ({comment})' if comment else ''))

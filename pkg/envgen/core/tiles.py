import enum

from typing import Dict, Tuple, Type


class WarehouseTile(enum.IntEnum):
    EMPTY = 0
    SHELF = 1
    ENDPOINT = 2
    WORKSTATION = 3


class ManufacturingTile(enum.IntEnum):
    EMPTY = 0
    ENDPOINT = 1
    STATION_R = 2
    STATION_G = 3
    STATION_Y = 4


class MazeTile(enum.IntEnum):
    EMPTY = 0
    WALL = 1


STATIONS = (ManufacturingTile.STATION_R, ManufacturingTile.STATION_G, ManufacturingTile.STATION_Y)


class Domain(str, enum.Enum):
    WAREHOUSE_EVEN = 'warehouse_even'
    WAREHOUSE_UNEVEN = 'warehouse_uneven'
    MANUFACTURING = 'manufacturing'
    MAZE = 'maze'

    @classmethod
    def parse(cls, value) -> 'Domain':
        if isinstance(value, Domain):
            return value
        try:
            return cls(str(value).strip().lower().replace('-', '_'))
        except ValueError:
            raise ValueError(f'Unknown domain "{value}", expected one of {[d.value for d in cls]}') from None

    @property
    def is_warehouse(self) -> bool:
        return self in (Domain.WAREHOUSE_EVEN, Domain.WAREHOUSE_UNEVEN)

    @property
    def tiles(self) -> Type[enum.IntEnum]:
        if self.is_warehouse:
            return WarehouseTile
        if self is Domain.MANUFACTURING:
            return ManufacturingTile
        return MazeTile

    @property
    def n_types(self) -> int:
        return len(self.tiles)

    @property
    def channels(self) -> Tuple[int, ...]:
        """Tile values the NCA can produce, in channel order (channel 0 is always Empty)"""
        if self.is_warehouse:
            return (WarehouseTile.EMPTY, WarehouseTile.SHELF, WarehouseTile.ENDPOINT)
        return tuple(self.tiles)

    @property
    def seed_tile(self) -> int:
        if self.is_warehouse:
            return WarehouseTile.SHELF
        if self is Domain.MANUFACTURING:
            return ManufacturingTile.ENDPOINT
        return MazeTile.WALL

    @property
    def blocked(self) -> Tuple[int, ...]:
        """Tile values agents cannot occupy"""
        if self.is_warehouse:
            return (WarehouseTile.SHELF,)
        if self is Domain.MANUFACTURING:
            return STATIONS
        return (MazeTile.WALL,)


_CHARS: Dict[str, str] = {
    'warehouse': '.@ew',
    'manufacturing': '.ergy',
    'maze': '.#',
}


def char_map(domain: Domain) -> str:
    """Characters of the text format, indexed by tile value"""
    if domain.is_warehouse:
        return _CHARS['warehouse']
    return _CHARS[domain.value]

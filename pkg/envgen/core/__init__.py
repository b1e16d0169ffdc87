from .tiles import STATIONS, Domain, ManufacturingTile, MazeTile, WarehouseTile, char_map
from .environment import (
    WAREHOUSE_BORDER,
    Environment,
    add_maze_border,
    maze_interior,
    read_environment,
    storage_mask,
    warehouse_template,
    write_environment,
)
from .metrics import (
    SimilarityWeights,
    connected_shelf_components,
    environment_entropy,
    similarity,
    wall_count,
    weighted_distance,
    workstation_count,
)
from .validity import ValidityReport, Violation, neighbour_any, validate
from .layouts import human_layout

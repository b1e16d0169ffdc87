import math

from dataclasses import dataclass

import numpy as np

from scipy import ndimage

from envgen.errors import DimensionError, DomainError
from .environment import Environment
from .tiles import STATIONS, Domain, MazeTile, WarehouseTile

# 4-neighbour structuring element for scipy.ndimage.label
FOUR_NEIGHBOURS = ndimage.generate_binary_structure(2, 1)


def neighbour_table(shape) -> np.ndarray:
    """(n, 4) flat indices of the 4-neighbours (up, down, left, right), -1 outside the grid"""
    h, w = shape
    idx = np.arange(h * w).reshape(h, w)
    table = np.full((h, w, 4), -1, dtype=np.int64)
    table[1:, :, 0] = idx[:-1, :]
    table[:-1, :, 1] = idx[1:, :]
    table[:, 1:, 2] = idx[:, :-1]
    table[:, :-1, 3] = idx[:, 1:]
    return table.reshape(h * w, 4)


@dataclass(frozen=True, eq=False)
class SimilarityWeights:
    """Per-tile weights p_i of the similarity score, derived from the unrepaired environment"""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.size == 0 or np.any(w <= 0):
            raise ValueError('Similarity weights must be positive')
        w.setflags(write=False)
        object.__setattr__(self, 'weights', w)

    @property
    def normalizer(self) -> float:
        """P = n * max_i p_i"""
        return float(self.weights.size * self.weights.max())

    @classmethod
    def uniform(cls, shape) -> 'SimilarityWeights':
        return cls(np.ones(shape))

    @classmethod
    def for_environment(cls, x_in: Environment, station_weight: float = 5.0) -> 'SimilarityWeights':
        if x_in.domain is Domain.MANUFACTURING:
            return cls(np.where(np.isin(x_in.tiles, STATIONS), station_weight, 1.0))
        return cls.uniform(x_in.tiles.shape)


def environment_entropy(env: Environment, storage_only: bool = False) -> float:
    """Normalized Shannon entropy of the overlapping 2x2 tile patterns"""
    tiles = env.tiles
    if storage_only and env.frozen_mask.any():
        cols = np.flatnonzero(~env.frozen_mask.all(axis=0))
        tiles = tiles[:, cols.min() : cols.max() + 1]
    h, w = tiles.shape
    if h < 2 or w < 2:
        raise DimensionError(f'Entropy needs at least a 2x2 grid, got {w}x{h}')

    n = env.domain.n_types
    t = tiles.astype(np.int64)
    codes = ((t[:-1, :-1] * n + t[:-1, 1:]) * n + t[1:, :-1]) * n + t[1:, 1:]
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    entropy = float(-(p * np.log(p)).sum())
    return min(1.0, max(0.0, entropy / (4 * math.log(n))))


def similarity(x_in: Environment, x_out: Environment, weights: SimilarityWeights = None) -> float:
    if x_in.tiles.shape != x_out.tiles.shape or x_in.domain != x_out.domain:
        raise DimensionError(
            f'Cannot compare {x_in.domain.value} {x_in.width}x{x_in.height} '
            f'with {x_out.domain.value} {x_out.width}x{x_out.height}'
        )
    if weights is None:
        weights = SimilarityWeights.for_environment(x_in)
    if weights.weights.shape != x_in.tiles.shape:
        raise DimensionError(f'Weights shape {weights.weights.shape} does not match {x_in.tiles.shape}')
    same = x_in.tiles == x_out.tiles
    return float(weights.weights[same].sum() / weights.normalizer)


def weighted_distance(x_in: Environment, x_out: Environment, weights: SimilarityWeights) -> float:
    """Weighted hamming distance, the quantity repair minimizes"""
    return float(weights.weights[x_in.tiles != x_out.tiles].sum())


def connected_shelf_components(env: Environment) -> int:
    if not env.domain.is_warehouse:
        raise DomainError(f'Shelf components are only defined for warehouses, got {env.domain.value}')
    _, count = ndimage.label(env.tiles == WarehouseTile.SHELF, structure=FOUR_NEIGHBOURS)
    return int(count)


def workstation_count(env: Environment) -> int:
    if env.domain is not Domain.MANUFACTURING:
        raise DomainError(f'Workstation count is only defined for manufacturing, got {env.domain.value}')
    return env.count(*STATIONS)


def wall_count(env: Environment) -> int:
    """Walls inside the appended boundary ring"""
    if env.domain is not Domain.MAZE:
        raise DomainError(f'Wall count is only defined for mazes, got {env.domain.value}')
    return int((env.tiles[1:-1, 1:-1] == MazeTile.WALL).sum())

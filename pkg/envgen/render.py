import logging

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ribs.archives import GridArchive  # noqa: E402
from ribs.visualize import grid_archive_heatmap  # noqa: E402

from envgen.core import Domain, Environment  # noqa: E402
from envgen.errors import DimensionError  # noqa: E402
from envgen.qd import elites  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WHITE = (255, 255, 255)
BACKGROUND = WHITE

# RGB per tile value
PALETTES = {
    'warehouse': [WHITE, (0, 0, 0), (30, 100, 230), (255, 105, 180)],
    'manufacturing': [WHITE, (30, 100, 230), (220, 30, 30), (40, 170, 60), (250, 210, 20)],
    'maze': [WHITE, (128, 128, 128)],
}


def palette(domain: Domain) -> np.ndarray:
    key = 'warehouse' if domain.is_warehouse else domain.value
    return np.array(PALETTES[key], dtype=np.uint8)


def environment_rgb(env: Environment, cell_size: int = 1) -> np.ndarray:
    """(H * cell_size, W * cell_size, 3) uint8 raster"""
    rgb = palette(env.domain)[env.tiles]
    if cell_size > 1:
        rgb = rgb.repeat(cell_size, axis=0).repeat(cell_size, axis=1)
    return rgb


def render_environment(env: Environment, path: PathLike, cell_size: int = 10):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.imsave(path, environment_rgb(env, cell_size))
    logger.debug(f'Rendered {env!r} to {path}')


def archive_grid(archive: GridArchive) -> np.ndarray:
    """Objective per cell of a 2-D archive [measure 0, measure 1], NaN where empty"""
    if archive.measure_dim != 2:
        raise DimensionError(f'Heatmaps need a 2-D archive, got {archive.measure_dim} dimensions')
    grid = np.full(tuple(archive.dims), np.nan)
    for elite in elites(archive):
        grid[elite.cell] = elite.objective
    return grid


def heatmap_rgb(values: np.ndarray, cmap: str = 'viridis', vmin=None, vmax=None) -> np.ndarray:
    """Color-mapped uint8 raster; NaN cells take the background color"""
    finite = np.isfinite(values)
    lo = vmin if vmin is not None else (float(np.nanmin(values)) if finite.any() else 0.0)
    hi = vmax if vmax is not None else (float(np.nanmax(values)) if finite.any() else 1.0)
    scaled = np.zeros_like(values, dtype=np.float64)
    if hi > lo:
        scaled[finite] = (values[finite] - lo) / (hi - lo)
    rgb = (matplotlib.colormaps[cmap](scaled)[..., :3] * 255).round().astype(np.uint8)
    rgb[~finite] = BACKGROUND
    return rgb


def archive_rgb(archive, cmap: str = 'viridis') -> np.ndarray:
    """Raster with one pixel per cell, measure 0 along the columns and measure 1 upwards"""
    grid = archive_grid(archive)
    return np.flipud(heatmap_rgb(grid.T, cmap))


def render_archive(
    archive: GridArchive, path: PathLike, labels: Sequence[str] = ('measure 0', 'measure 1'), cmap='viridis'
):
    if archive.measure_dim != 2:
        raise DimensionError(f'Heatmaps need a 2-D archive, got {archive.measure_dim} dimensions')
    fig, ax = plt.subplots(figsize=(6, 5))
    grid_archive_heatmap(archive, ax=ax, cmap=cmap)
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(f'{len(archive)} elites')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)


def tile_usage_rgb(usage: np.ndarray, cell_size: int = 1, cmap: str = 'Reds') -> np.ndarray:
    rgb = heatmap_rgb(np.asarray(usage, dtype=np.float64), cmap, vmin=0.0)
    if cell_size > 1:
        rgb = rgb.repeat(cell_size, axis=0).repeat(cell_size, axis=1)
    return rgb


def render_tile_usage(usage: np.ndarray, path: PathLike, cell_size: int = 10, env: Environment = None):
    """Visit frequency per tile; blocked tiles of ``env`` are drawn in its palette"""
    rgb = tile_usage_rgb(usage, cell_size)
    if env is not None:
        if env.tiles.shape != np.shape(usage):
            raise DimensionError(f'Usage grid {np.shape(usage)} does not match {env!r}')
        blocked = ~env.traversable
        if cell_size > 1:
            blocked = blocked.repeat(cell_size, axis=0).repeat(cell_size, axis=1)
        rgb[blocked] = environment_rgb(env, cell_size)[blocked]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.imsave(path, rgb)


def render_trace(frames: Sequence[Environment], path: PathLike, columns: int = 10):
    """Generation sequence, one panel per NCA iteration"""
    rows = -(-len(frames) // columns)
    fig, axes = plt.subplots(rows, columns, figsize=(columns * 1.5, rows * 1.5), squeeze=False)
    for ax in axes.flat:
        ax.axis('off')
    for i, (ax, frame) in enumerate(zip(axes.flat, frames)):
        ax.imshow(environment_rgb(frame), interpolation='nearest')
        ax.set_title(str(i), fontsize=7)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches='tight')
    plt.close(fig)

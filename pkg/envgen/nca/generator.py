import logging

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from numpy.lib.stride_tricks import sliding_window_view

from envgen.core import Domain, Environment
from envgen.errors import ChannelMismatchError, FormatError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PADDING_MODES = ('zeros', 'wrap')


@dataclass(frozen=True)
class NcaArchitecture:
    """Three 3x3 convolutions (ReLU, ReLU, Sigmoid), stride 1, padding 1"""

    in_channels: int
    hidden_channels: int = 32
    kernel_size: int = 3

    def __post_init__(self):
        if self.in_channels < 1 or self.hidden_channels < 1:
            raise ValueError(f'Channel counts must be positive, got {self.in_channels}/{self.hidden_channels}')
        if self.kernel_size != 3:
            raise ValueError('Only 3x3 kernels are supported')

    @property
    def layers(self) -> List[Tuple[int, int]]:
        """(in, out) channels per layer"""
        return [
            (self.in_channels, self.hidden_channels),
            (self.hidden_channels, self.hidden_channels),
            (self.hidden_channels, self.in_channels),
        ]

    @classmethod
    def for_domain(cls, domain, hidden_channels: int = 32) -> 'NcaArchitecture':
        return cls(len(Domain.parse(domain).channels), hidden_channels)


def param_count(arch: NcaArchitecture) -> int:
    k = arch.kernel_size * arch.kernel_size
    return sum(c_in * c_out * k + c_out for c_in, c_out in arch.layers)


def _unpack(arch: NcaArchitecture, theta: np.ndarray):
    """Split theta layer by layer: weights (out, in, row, col) followed by the layer's biases"""
    params, offset = [], 0
    k = arch.kernel_size
    for c_in, c_out in arch.layers:
        n = c_out * c_in * k * k
        weights = theta[offset : offset + n].reshape(c_out, c_in, k, k)
        offset += n
        bias = theta[offset : offset + c_out]
        offset += c_out
        params.append((weights, bias))
    return params


@dataclass(frozen=True, eq=False)
class NcaGenerator:
    domain: Domain
    arch: NcaArchitecture
    theta: np.ndarray
    padding_mode: str = 'zeros'
    # repair and simulation seed of the evaluation the generator was archived with
    seed: Optional[int] = None
    _params: list = field(init=False, repr=False)

    def __post_init__(self):
        domain = Domain.parse(self.domain)
        theta = np.array(self.theta, dtype=np.float32, copy=True).ravel()
        if theta.size != param_count(self.arch):
            raise ValueError(f'theta has {theta.size} entries, architecture needs {param_count(self.arch)}')
        if len(domain.channels) != self.arch.in_channels:
            raise ChannelMismatchError(
                f'{domain.value} has {len(domain.channels)} generatable tiles, architecture has {self.arch.in_channels}'
            )
        if self.padding_mode not in PADDING_MODES:
            raise ValueError(f'Unknown padding mode "{self.padding_mode}"')
        theta.setflags(write=False)
        object.__setattr__(self, 'domain', domain)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, '_params', _unpack(self.arch, theta))

    @classmethod
    def from_theta(
        cls, domain, theta, hidden_channels: int = 32, padding_mode: str = 'zeros', seed: Optional[int] = None
    ) -> 'NcaGenerator':
        return cls(domain, NcaArchitecture.for_domain(domain, hidden_channels), theta, padding_mode, seed)

    def __repr__(self):
        return f'<NcaGenerator {self.domain.value} hidden={self.arch.hidden_channels} params={self.theta.size}>'


def encode(env: Environment) -> np.ndarray:
    """One-hot float32 tensor [row, col, channel]; tiles the NCA cannot produce encode as all zeros"""
    channels = np.asarray(env.domain.channels, dtype=np.uint8)
    return (env.tiles[:, :, None] == channels[None, None, :]).astype(np.float32)


def decode(grid: np.ndarray, template: Environment) -> Environment:
    """Argmax back to tiles; frozen cells take the template's tiles"""
    channels = np.asarray(template.domain.channels, dtype=np.uint8)
    tiles = channels[np.argmax(grid, axis=-1)]
    tiles = np.where(template.frozen_mask, template.tiles, tiles)
    return template.with_tiles(tiles)


def _conv(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, padding_mode: str) -> np.ndarray:
    if padding_mode == 'wrap':
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode='wrap')
    else:
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode='constant')
    windows = sliding_window_view(xp, (3, 3), axis=(0, 1))  # (H, W, in, 3, 3)
    out = np.tensordot(windows, weights, axes=([2, 3, 4], [1, 2, 3]))
    return (out + bias).astype(np.float32, copy=False)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over='ignore'):
        return (1.0 / (1.0 + np.exp(-x))).astype(np.float32, copy=False)


def forward_step(gen: NcaGenerator, grid: np.ndarray, template: Optional[Environment] = None) -> np.ndarray:
    """One NCA update of a one-hot grid. With a template, its frozen cells are restored afterwards."""
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 3 or grid.shape[-1] != gen.arch.in_channels:
        raise ChannelMismatchError(f'Expected an H x W x {gen.arch.in_channels} grid, got shape {grid.shape}')

    x = grid
    last = len(gen._params) - 1
    for i, (weights, bias) in enumerate(gen._params):
        x = _conv(x, weights, bias, gen.padding_mode)
        x = _sigmoid(x) if i == last else np.maximum(x, 0, dtype=np.float32)

    out = np.zeros_like(grid)
    idx = np.argmax(x, axis=-1)
    np.put_along_axis(out, idx[:, :, None], 1.0, axis=-1)
    if template is not None and template.frozen_mask.any():
        out[template.frozen_mask] = encode(template)[template.frozen_mask]
    return out


def generate(gen: NcaGenerator, seed: Environment, iterations: int, trace: bool = False):
    """Run the NCA for ``iterations`` steps from ``seed``. With ``trace`` also returns every intermediate environment."""
    if iterations < 0:
        raise ValueError(f'iterations must be non-negative, got {iterations}')
    if seed.domain.tiles is not gen.domain.tiles:
        raise ChannelMismatchError(f'Cannot run a {gen.domain.value} generator on a {seed.domain.value} seed')

    frames = [seed]
    grid = encode(seed)
    for _ in range(iterations):
        grid = forward_step(gen, grid, seed)
        if trace:
            frames.append(decode(grid, seed))

    env = decode(grid, seed) if iterations else seed
    if trace:
        return env, frames
    return env


def save_generator(gen: NcaGenerator, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = {} if gen.seed is None else {'seed': np.int64(gen.seed)}
    with open(path, 'wb') as f:
        np.savez(
            f,
            format_version=np.int64(FORMAT_VERSION),
            domain=np.array(gen.domain.value),
            in_channels=np.int64(gen.arch.in_channels),
            hidden_channels=np.int64(gen.arch.hidden_channels),
            kernel_size=np.int64(gen.arch.kernel_size),
            padding_mode=np.array(gen.padding_mode),
            theta=gen.theta,
            **extra,
        )
    logger.debug(f'Saved {gen!r} to {path}')


def load_generator(path: Union[str, Path]) -> NcaGenerator:
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data['format_version'])
            if version != FORMAT_VERSION:
                raise FormatError(f'Unsupported generator format version {version} in {path}')
            arch = NcaArchitecture(int(data['in_channels']), int(data['hidden_channels']), int(data['kernel_size']))
            theta = data['theta']
            if theta.dtype != np.float32 or theta.size != param_count(arch):
                raise FormatError(f'{path}: theta does not match the stored architecture')
            seed = int(data['seed']) if 'seed' in data.files else None
            return NcaGenerator(str(data['domain']), arch, theta, str(data['padding_mode']), seed)
    except KeyError as e:
        raise FormatError(f'{path} is missing generator field {e}') from None

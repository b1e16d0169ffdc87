import copy
import hashlib
import logging
import os

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import toml

from envgen.core import Domain
from envgen.errors import ConfigError
from envgen.qd import OPTIMIZERS, ArchiveSpec

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent.parent / 'data' / 'presets'

ENV_OVERRIDES = {
    'ENVGEN_WORKERS': ('runtime', 'workers', int),
    'ENVGEN_OUTPUT_DIR': ('runtime', 'output_dir', str),
}

# archive defaults per domain, used when the [archive] section is missing
DEFAULT_ARCHIVES = {
    Domain.WAREHOUSE_EVEN: {'dims': [100, 100], 'ranges': [[140, 240], [0, 1]]},
    Domain.WAREHOUSE_UNEVEN: {'dims': [100, 100], 'ranges': [[140, 240], [0, 1]]},
    Domain.MANUFACTURING: {'dims': [100, 100], 'ranges': [[0, 600], [0, 1]]},
    Domain.MAZE: {'dims': [256, 162], 'ranges': [[0, 256], [0, 648]]},
}

Size = Tuple[int, int]


def _merge(base: dict, other: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in other.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(raw: str):
    try:
        return toml.loads(f'v = {raw}')['v']
    except toml.TomlDecodeError:
        return raw


def apply_override(config: dict, override: str):
    """Apply one ``section.key=value`` override; the value is read as a TOML literal, else as a string"""
    path, sep, raw = override.partition('=')
    keys = [k.strip() for k in path.split('.') if k.strip()]
    if not sep or not keys:
        raise ConfigError(f'Malformed override "{override}", expected section.key=value')
    node = config
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f'Override "{override}" descends into non-table "{key}"')
    node[keys[-1]] = _parse_value(raw.strip())


def preset_path(name: str) -> Path:
    path = Path(name)
    if path.suffix == '.toml' and path.exists():
        return path
    path = PRESET_DIR / f'{name}.toml'
    if not path.exists():
        known = sorted(p.stem for p in PRESET_DIR.glob('*.toml'))
        raise ConfigError(f'Unknown preset "{name}", available: {known}')
    return path


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (), preset: Optional[str] = None
) -> dict:
    """
    Resolve the configuration dict.

    Order of precedence, lowest first: preset (from the ``preset`` key or argument), the
    config file, ``--set`` overrides, then the ENVGEN_* environment variables.
    """
    config = {}
    if path:
        try:
            config = toml.load(path)
        except (OSError, toml.TomlDecodeError) as e:
            raise ConfigError(f'Could not read config "{path}": {e}') from None

    overrides = list(overrides)
    for override in overrides:
        if override.split('=', 1)[0].strip() == 'preset':
            preset = str(_parse_value(override.split('=', 1)[1].strip()))
    if preset := preset or config.get('preset'):
        logger.debug(f'Using preset "{preset}"')
        config = _merge(toml.load(preset_path(preset)), config)
        config['preset'] = preset

    for override in overrides:
        apply_override(config, override)

    for var, (section, key, cast) in ENV_OVERRIDES.items():
        if (value := os.environ.get(var)) is not None:
            try:
                config.setdefault(section, {})[key] = cast(value)
            except ValueError:
                raise ConfigError(f'{var}={value!r} is not a valid {cast.__name__}') from None
    return config


def orient_size(domain: Domain, size) -> Size:
    """(width, height); warehouse and manufacturing sizes are normalized to width >= height"""
    try:
        width, height = (int(v) for v in size)
    except (TypeError, ValueError):
        raise ConfigError(f'Size must be [width, height], got {size!r}') from None
    if width < 1 or height < 1:
        raise ConfigError(f'Size must be positive, got {width}x{height}')
    if domain is not Domain.MAZE and height > width:
        logger.warning(f'Reading size {width}x{height} as {height}x{width} (width >= height)')
        width, height = height, width
    return width, height


def canonical(config: dict) -> dict:
    return {k: canonical(v) if isinstance(v, dict) else v for k, v in sorted(config.items())}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated view on the resolved configuration; ``raw`` keeps every section for the components"""

    raw: dict
    domain: Domain
    size: Size
    eval_size: Size
    iterations: int
    eval_iterations: int
    n_shelves: Optional[int]
    eval_n_shelves: Optional[int]
    num_agents: int
    eval_num_agents: int
    n_sims: int
    horizon: int
    eval_horizon: int
    batch_size: int
    n_evals: int
    alpha: float
    optimizer: str
    seed: int
    spacing: int

    @classmethod
    def from_dict(cls, config: dict) -> 'ExperimentConfig':
        exp = config.get('experiment', {})
        try:
            domain = Domain.parse(exp.get('domain', 'warehouse_even'))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        optimizer = exp.get('optimizer', 'cma-mae')
        if optimizer not in OPTIMIZERS:
            raise ConfigError(f'Unknown optimizer "{optimizer}", expected one of {OPTIMIZERS}')

        size = orient_size(domain, exp.get('size', [36, 33]))
        self = cls(
            raw=config,
            domain=domain,
            size=size,
            eval_size=orient_size(domain, exp.get('eval_size', size)),
            iterations=exp.get('iterations', 50),
            eval_iterations=exp.get('eval_iterations', 200),
            n_shelves=exp.get('n_shelves') if domain.is_warehouse else None,
            eval_n_shelves=exp.get('eval_n_shelves') if domain.is_warehouse else None,
            num_agents=exp.get('num_agents', 1 if domain is Domain.MAZE else 200),
            eval_num_agents=exp.get('eval_num_agents', exp.get('num_agents', 1 if domain is Domain.MAZE else 200)),
            n_sims=exp.get('n_sims', 5),
            horizon=exp.get('horizon', 1000),
            eval_horizon=exp.get('eval_horizon', 5000),
            batch_size=exp.get('batch_size', 50),
            n_evals=exp.get('n_evals', 10_000),
            alpha=float(exp.get('alpha', 0.0 if domain is Domain.MAZE else 5.0)),
            optimizer=optimizer,
            seed=exp.get('seed', 0),
            spacing=exp.get('workstation_spacing', 3),
        )
        self._check()
        return self

    def _check(self):
        counts = {
            'iterations': self.iterations,
            'eval_iterations': self.eval_iterations,
            'num_agents': self.num_agents,
            'eval_num_agents': self.eval_num_agents,
            'n_sims': self.n_sims,
            'horizon': self.horizon,
            'eval_horizon': self.eval_horizon,
            'batch_size': self.batch_size,
            'n_evals': self.n_evals,
            'workstation_spacing': self.spacing,
        }
        if bad := {k: v for k, v in counts.items() if not isinstance(v, int) or v < 1}:
            raise ConfigError(f'Counts must be positive integers: {bad}')
        if self.domain.is_warehouse:
            for key in ('n_shelves', 'eval_n_shelves'):
                value = getattr(self, key)
                if not isinstance(value, int) or value < 0:
                    raise ConfigError(f'Warehouse experiments need a non-negative experiment.{key}, got {value!r}')
        if self.alpha < 0:
            raise ConfigError(f'alpha must be non-negative, got {self.alpha}')
        if self.domain is Domain.MAZE and min(self.size) < 3:
            raise ConfigError(f'Maze size {self.size} leaves no interior inside the wall ring')
        if self.n_evals < self.batch_size:
            logger.warning(f'n_evals {self.n_evals} is below one batch of {self.batch_size}')
        # builds and checks the archive spec
        self.archive_spec()

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def archive_spec(self) -> ArchiveSpec:
        return ArchiveSpec.from_config(self.raw.get('archive') or DEFAULT_ARCHIVES[self.domain])

    @property
    def measures(self) -> Optional[Tuple[str, ...]]:
        names = self.section('experiment').get('measures')
        return tuple(names) if names else None

    @property
    def workers(self) -> int:
        workers = self.section('runtime').get('workers', os.cpu_count() or 1)
        if not isinstance(workers, int) or workers < 0:
            raise ConfigError(f'runtime.workers must be a non-negative integer, got {workers!r}')
        return workers

    @property
    def output_dir(self) -> Path:
        return Path(self.section('runtime').get('output_dir', 'runs'))

    @property
    def snapshot_every(self) -> int:
        return max(1, self.section('runtime').get('snapshot_every', 10))

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical TOML dump; [runtime] does not change results and is left out"""
        relevant = {k: v for k, v in self.raw.items() if k != 'runtime'}
        return hashlib.sha256(toml.dumps(canonical(relevant)).encode()).hexdigest()

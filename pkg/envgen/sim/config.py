from dataclasses import dataclass, field, replace
from typing import Dict

from envgen.core import ManufacturingTile
from envgen.errors import ConfigError


def _default_dwell() -> Dict[int, int]:
    return {ManufacturingTile.STATION_R: 2, ManufacturingTile.STATION_G: 5, ManufacturingTile.STATION_Y: 10}


@dataclass(frozen=True)
class SimConfig:
    num_agents: int
    horizon: int = 1000
    window: int = 10
    replan_period: int = 5
    seed: int = 0
    uneven_weight: float = 5.0
    dwell: Dict[int, int] = field(default_factory=_default_dwell)
    lookahead: int = 3
    stop_on_congestion: bool = True
    count_dwell_as_wait: bool = True
    record_paths: bool = False
    max_expansions: int = 20_000

    def __post_init__(self):
        if self.num_agents < 1:
            raise ConfigError(f'Need at least one agent, got {self.num_agents}')
        if self.horizon < 1:
            raise ConfigError(f'Horizon must be positive, got {self.horizon}')
        if not self.window >= self.replan_period >= 1:
            raise ConfigError(f'Need window >= replan period >= 1, got w={self.window} h={self.replan_period}')
        if self.lookahead < 1:
            raise ConfigError(f'Lookahead must be at least 1, got {self.lookahead}')
        if any(d < 0 for d in self.dwell.values()):
            raise ConfigError(f'Dwell times must be non-negative, got {self.dwell}')

    @classmethod
    def from_config(cls, config: dict, num_agents: int = None, horizon: int = None, seed: int = 0) -> 'SimConfig':
        """Build from the ``[sim]`` section; explicit arguments win over the section"""
        dwell = _default_dwell()
        if 'dwell' in config:
            names = {'r': ManufacturingTile.STATION_R, 'g': ManufacturingTile.STATION_G, 'y': ManufacturingTile.STATION_Y}
            for key, value in config['dwell'].items():
                if key.lower() not in names:
                    raise ConfigError(f'Unknown station "{key}" in sim.dwell, expected r, g or y')
                dwell[names[key.lower()]] = int(value)
        return cls(
            num_agents=num_agents if num_agents is not None else config.get('num_agents', 20),
            horizon=horizon if horizon is not None else config.get('horizon', 1000),
            window=config.get('window', 10),
            replan_period=config.get('replan_period', 5),
            seed=seed,
            uneven_weight=config.get('uneven_weight', 5.0),
            dwell=dwell,
            lookahead=config.get('lookahead', 3),
            stop_on_congestion=config.get('stop_on_congestion', True),
            count_dwell_as_wait=config.get('count_dwell_as_wait', True),
            record_paths=config.get('record_paths', False),
            max_expansions=config.get('max_expansions', 20_000),
        )

    def with_seed(self, seed: int) -> 'SimConfig':
        return replace(self, seed=seed)

import logging
import time

from dataclasses import dataclass, field
from typing import Optional, Protocol, Tuple

import numpy as np

from envgen.core import STATIONS, Domain, Environment, ManufacturingTile, SimilarityWeights, WarehouseTile
from envgen.errors import ConfigError, RepairBudgetExhausted

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepairBudget:
    """``work`` counts elementary tile-flip evaluations; ``wall_clock`` is a safety cap in seconds"""

    work: int = 50_000
    wall_clock: float = 300.0
    exact_threshold: int = 12

    def __post_init__(self):
        if self.work < 1 or self.wall_clock <= 0 or self.exact_threshold < 0:
            raise ConfigError(f'Repair budget must be positive, got {self}')

    @classmethod
    def from_config(cls, config: dict) -> 'RepairBudget':
        return cls(
            work=config.get('work', 50_000),
            wall_clock=config.get('wall_clock', 300.0),
            exact_threshold=config.get('exact_threshold', 12),
        )


@dataclass(frozen=True)
class RepairRules:
    """Constraint set of one domain, phrased as an obstacle set that needs adjacent endpoints"""

    domain: Domain
    obstacles: Tuple[int, ...]
    endpoint: int
    n_obstacles: Optional[int] = None
    required_types: Tuple[int, ...] = ()
    storage_values: Tuple[int, ...] = ()
    spacing: int = 3

    @classmethod
    def for_environment(cls, env: Environment, n_shelves: Optional[int] = None, spacing: int = 3) -> 'RepairRules':
        if env.domain.is_warehouse:
            return cls(
                env.domain,
                (WarehouseTile.SHELF,),
                WarehouseTile.ENDPOINT,
                n_obstacles=n_shelves,
                storage_values=tuple(env.domain.channels),
                spacing=spacing,
            )
        if env.domain is Domain.MANUFACTURING:
            return cls(
                env.domain,
                tuple(STATIONS),
                ManufacturingTile.ENDPOINT,
                required_types=tuple(STATIONS),
                storage_values=tuple(ManufacturingTile),
            )
        raise ConfigError(f'No repair rules for the {env.domain.value} domain')


@dataclass
class RepairResult:
    env: Environment
    similarity: float
    work_used: int
    mode: str
    changed: int = 0
    wall_time: float = 0.0

    def report(self) -> dict:
        return {
            'similarity': self.similarity,
            'work_used': self.work_used,
            'mode': self.mode,
            'changed_tiles': self.changed,
            'wall_time': round(self.wall_time, 4),
        }


class WorkMeter:
    def __init__(self, budget: RepairBudget):
        self.budget = budget
        self.used = 0
        self._start = time.perf_counter()

    def charge(self, units: int = 1):
        self.used += units

    @property
    def exhausted(self) -> bool:
        return self.used >= self.budget.work or time.perf_counter() - self._start > self.budget.wall_clock

    def require(self, what: str):
        """Abort when the budget ran out before a valid environment exists"""
        if self.exhausted:
            raise RepairBudgetExhausted(f'Repair budget ran out during {what} after {self.used} work units')


@dataclass
class SolveRequest:
    x_in: Environment
    weights: SimilarityWeights
    rules: RepairRules
    rng: np.random.Generator
    meter: WorkMeter = field(repr=False, default=None)


class SolverBackend(Protocol):
    """Anything that turns an environment into a valid one close to it, e.g. a MILP adapter"""

    name: str

    def solve(self, request: SolveRequest) -> Environment:
        ...

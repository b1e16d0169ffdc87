import enum
import logging

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from envgen.core import STATIONS, Domain, Environment, ManufacturingTile, WarehouseTile
from envgen.core.validity import neighbour_any
from envgen.errors import DomainError, NoCandidateGoalError
from .config import SimConfig

logger = logging.getLogger(__name__)


class Phase(enum.IntEnum):
    """What an agent heads for next"""

    TO_ENDPOINT = 0
    TO_WORKSTATION = 1
    TO_R = 2
    TO_G = 3
    TO_Y = 4


@dataclass(frozen=True)
class Task:
    cell: int
    dwell: int = 0


class TaskAssigner:
    """Draws goals for the lifelong simulation; goals are flat cell indices"""

    def __init__(self, env: Environment, cfg: SimConfig):
        self.domain = env.domain
        tiles = env.tiles
        width = env.width
        if self.domain.is_warehouse:
            self.endpoints = np.flatnonzero(tiles == WarehouseTile.ENDPOINT)
            self.workstations = np.flatnonzero(tiles == WarehouseTile.WORKSTATION)
            if self.domain is Domain.WAREHOUSE_UNEVEN:
                left = self.workstations % width == 0
                weights = np.where(left, cfg.uneven_weight, 1.0)
            else:
                weights = np.ones(self.workstations.size)
            self.workstation_p = weights / weights.sum() if weights.size else weights
            if not self.endpoints.size or not self.workstations.size:
                raise NoCandidateGoalError(f'{env!r} lacks endpoints or workstations to serve as goals')
        elif self.domain is Domain.MANUFACTURING:
            endpoints = tiles == ManufacturingTile.ENDPOINT
            self.station_endpoints = {}
            for station, phase in zip(STATIONS, (Phase.TO_R, Phase.TO_G, Phase.TO_Y)):
                cells = np.flatnonzero(endpoints & neighbour_any(tiles == station))
                if not cells.size:
                    raise NoCandidateGoalError(f'No endpoint next to a {station.name} station in {env!r}')
                self.station_endpoints[phase] = (cells, int(cfg.dwell.get(station, 0)))
        else:
            raise DomainError(f'The {self.domain.value} domain has no agent tasks')

    def first_phase(self) -> Phase:
        return Phase.TO_ENDPOINT if self.domain.is_warehouse else Phase.TO_R

    @staticmethod
    def next_phase(phase: Phase) -> Phase:
        return {
            Phase.TO_ENDPOINT: Phase.TO_WORKSTATION,
            Phase.TO_WORKSTATION: Phase.TO_ENDPOINT,
            Phase.TO_R: Phase.TO_G,
            Phase.TO_G: Phase.TO_Y,
            Phase.TO_Y: Phase.TO_R,
        }[phase]

    def draw(self, phase: Phase, rng: np.random.Generator) -> Task:
        if phase is Phase.TO_ENDPOINT:
            return Task(int(self.endpoints[rng.integers(self.endpoints.size)]))
        if phase is Phase.TO_WORKSTATION:
            return Task(int(self.workstations[rng.choice(self.workstations.size, p=self.workstation_p)]))
        cells, dwell = self.station_endpoints[phase]
        return Task(int(cells[rng.integers(cells.size)]), dwell)

    def next_task(self, phase: Phase, rng: np.random.Generator) -> Tuple[Task, Phase]:
        """Task for ``phase`` and the phase that follows it"""
        return self.draw(phase, rng), self.next_phase(phase)


def assign_task(phase: Phase, env: Environment, cfg: SimConfig, rng: np.random.Generator) -> Tuple[int, int]:
    """Goal (row, col) for an agent in ``phase``"""
    task = TaskAssigner(env, cfg).draw(phase, rng)
    return divmod(task.cell, env.width)

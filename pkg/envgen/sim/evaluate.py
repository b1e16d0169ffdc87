import logging

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from envgen.core import (
    Domain,
    Environment,
    connected_shelf_components,
    environment_entropy,
    wall_count,
    workstation_count,
)
from envgen.errors import ConfigError
from .config import SimConfig
from .maze import maze_metrics
from .simulator import run_simulation, summarize

logger = logging.getLogger(__name__)

MeasureFn = Callable[[Environment, dict], float]


def _path_length(env: Environment, cache: dict) -> float:
    if 'maze' not in cache:
        cache['maze'] = maze_metrics(env)
    return float(cache['maze'].path_length)


MEASURES: Dict[str, MeasureFn] = {
    'entropy': lambda env, _: environment_entropy(env),
    'storage_entropy': lambda env, _: environment_entropy(env, storage_only=True),
    'components': lambda env, _: float(connected_shelf_components(env)),
    'workstations': lambda env, _: float(workstation_count(env)),
    'walls': lambda env, _: float(wall_count(env)),
    'path_length': _path_length,
}

DEFAULT_MEASURES = {
    Domain.WAREHOUSE_EVEN: ('components', 'entropy'),
    Domain.WAREHOUSE_UNEVEN: ('components', 'entropy'),
    Domain.MANUFACTURING: ('workstations', 'entropy'),
    Domain.MAZE: ('walls', 'path_length'),
}


def measure_names(domain, names: Optional[Sequence[str]] = None) -> Tuple[str, ...]:
    domain = Domain.parse(domain)
    names = tuple(names) if names else DEFAULT_MEASURES[domain]
    if unknown := [n for n in names if n not in MEASURES]:
        raise ConfigError(f'Unknown measure(s) {unknown}, expected some of {sorted(MEASURES)}')
    return names


def compute_measures(env: Environment, names: Optional[Sequence[str]] = None) -> Tuple[float, ...]:
    cache = {}
    return tuple(float(MEASURES[n](env, cache)) for n in measure_names(env.domain, names))


@dataclass
class Evaluation:
    objective: float
    measures: Tuple[float, ...]
    success_rate: float
    metadata: Dict = field(default_factory=dict)


def evaluate(
    env: Environment,
    sim_config: dict,
    n_runs: int,
    horizon: Optional[int] = None,
    base_seed: int = 0,
    num_agents: Optional[int] = None,
    measures: Optional[Sequence[str]] = None,
) -> Evaluation:
    """
    Objective, measures and success rate of one environment.

    Warehouses and manufacturing average the throughput of ``n_runs`` simulations seeded
    ``base_seed .. base_seed + n_runs - 1``; a congested run contributes its throughput up to
    the congestion step. Mazes score 1 when the two ends of the longest shortest path are
    connected.
    """
    if n_runs < 1:
        raise ConfigError(f'Need at least one simulation per evaluation, got {n_runs}')
    names = measure_names(env.domain, measures)

    if env.domain is Domain.MAZE:
        metrics = maze_metrics(env)
        cache = {'maze': metrics}
        values = tuple(float(MEASURES[n](env, cache)) for n in names)
        return Evaluation(
            objective=float(metrics.solvable),
            measures=values,
            success_rate=float(metrics.solvable),
            metadata={'path_length': metrics.path_length, 'start': metrics.start, 'goal': metrics.goal},
        )

    base = SimConfig.from_config(sim_config, num_agents=num_agents, horizon=horizon, seed=base_seed)
    results = [run_simulation(env, base.with_seed(base_seed + i)) for i in range(n_runs)]
    throughputs = np.array([r.throughput for r in results])
    summary = summarize(results)
    objective = float(throughputs.mean())
    logger.debug(f'{env!r}: throughput {objective:.3f} over {n_runs} runs, success {summary.success_rate:.0%}')
    return Evaluation(
        objective=objective,
        measures=compute_measures(env, names),
        success_rate=summary.success_rate,
        metadata={'throughputs': throughputs.tolist(), 'env_hash': env.digest()},
    )

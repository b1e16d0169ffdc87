import logging
import math

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ribs.archives import GridArchive
from ribs.emitters import EvolutionStrategyEmitter, IsoLineEmitter
from ribs.schedulers import Scheduler

from envgen.errors import ConfigError
from .archives import METADATA_FIELDS, AddStatus, ArchiveSpec, best_elite, coverage, qd_score

logger = logging.getLogger(__name__)

OPTIMIZERS = ('cma-mae', 'cma-es', 'map-elites')
COVARIANCES = {'full': 'cma_es', 'diagonal': 'sep_cma_es'}


@dataclass
class Evaluated:
    """Outcome of one candidate: ``objective`` feeds the optimizer, ``result`` the result archive"""

    objective: float
    result: float
    measures: Sequence[float]
    metadata: Dict[str, object] = field(default_factory=dict)


class QdScheduler:
    """
    A ribs scheduler over the optimization archive, plus the result archive. The result
    archive is keyed on the plain result rather than the optimized objective, so it is
    filled here instead of by ribs.
    """

    def __init__(self, scheduler: Scheduler, result_archive: GridArchive):
        self.scheduler = scheduler
        self.result_archive = result_archive
        self._pending: Optional[np.ndarray] = None

    @property
    def archive(self) -> GridArchive:
        return self.scheduler.archive

    @property
    def emitters(self) -> list:
        return self.scheduler.emitters

    @property
    def batch_size(self) -> int:
        return sum(e.batch_size for e in self.emitters)

    @property
    def restarts(self) -> int:
        return sum(getattr(e, 'restarts', 0) for e in self.emitters)

    def ask(self) -> np.ndarray:
        self._pending = self.scheduler.ask()
        return self._pending

    def tell(self, evaluations: List[Optional[Evaluated]]) -> List[Optional[AddStatus]]:
        """
        Feed a batch back. ``None`` marks a failed candidate: it reaches the emitters at the
        archive's threshold floor, which no archive accepts, and skips the result archive.
        """
        if self._pending is None:
            raise RuntimeError('tell() called before ask()')
        solutions = self._pending
        if len(evaluations) != len(solutions):
            raise ValueError(f'Expected {len(solutions)} evaluations, got {len(evaluations)}')

        floor = self.archive.threshold_min
        lower = np.asarray(self.archive.lower_bounds, dtype=np.float64)
        objective = np.array([floor if ev is None else ev.objective for ev in evaluations], dtype=np.float64)
        measures = np.array([lower if ev is None else ev.measures for ev in evaluations], dtype=np.float64)
        fields = {
            name: np.array([0 if ev is None else ev.metadata.get(name, 0) for ev in evaluations], dtype=dtype)
            for name, (_, dtype) in METADATA_FIELDS.items()
        }

        if self.archive.empty and np.all(objective <= floor) and np.all(objective == objective[0]):
            # a flat batch with nothing to archive would restart the emitters into an empty archive
            logger.debug('Batch left the optimization archive empty, emitters keep their distribution')
            # ribs refuses two asks in a row; the skipped round ends here
            self.scheduler._last_called = None
        else:
            self.scheduler.tell(objective, measures, **fields)

        statuses: List[Optional[AddStatus]] = [None] * len(evaluations)
        ok = np.array([ev is not None for ev in evaluations])
        if ok.any():
            results = np.array([ev.result for ev in evaluations if ev is not None], dtype=np.float64)
            info = self.result_archive.add(
                solutions[ok], results, measures[ok], **{name: values[ok] for name, values in fields.items()}
            )
            for i, status in zip(np.flatnonzero(ok), info['status']):
                statuses[i] = AddStatus(int(status))
        self._pending = None
        return statuses

    def metrics(self) -> dict:
        best = best_elite(self.result_archive)
        return {
            'qd_score': qd_score(self.result_archive),
            'coverage': coverage(self.result_archive),
            'best': best.objective if best else 0.0,
            'elites': len(self.result_archive),
            'restarts': self.restarts,
        }


def _es_name(config: dict, dim: int) -> str:
    covariance = config.get('covariance', 'auto')
    if covariance == 'auto':
        covariance = 'full' if dim <= config.get('full_covariance_max_dim', 500) else 'diagonal'
    if covariance not in COVARIANCES:
        raise ConfigError(f'Unknown covariance "{covariance}", expected auto or one of {tuple(COVARIANCES)}')
    return COVARIANCES[covariance]


def build_scheduler(optimizer: str, dim: int, spec: ArchiveSpec, batch_size: int, config: dict, seed) -> QdScheduler:
    """Wire archives and emitters for one of the supported optimizers from the ``[qd]`` section"""
    if optimizer not in OPTIMIZERS:
        raise ConfigError(f'Unknown optimizer "{optimizer}", expected one of {OPTIMIZERS}')
    threshold_min = float(config.get('threshold_min', 0.0))
    if not math.isfinite(threshold_min):
        raise ConfigError(f'The threshold floor must be finite, got {threshold_min}')

    learning_rate = config.get('learning_rate', 0.01) if optimizer == 'cma-mae' else 1.0
    archive_seed, result_seed, emitter_seed = np.random.SeedSequence(seed).spawn(3)
    archive = spec.archive(dim, learning_rate, threshold_min, seed=archive_seed.generate_state(1)[0])
    result_archive = spec.archive(dim, seed=result_seed.generate_state(1)[0])

    n = config.get('num_emitters', 1)
    if n < 1 or batch_size % n:
        raise ConfigError(f'Batch size {batch_size} does not split evenly over {n} emitters')
    per_emitter = batch_size // n
    x0 = np.full(dim, config.get('initial_mean', 0.0))
    sigma0 = config.get('sigma0', 0.2)

    emitters = []
    for s in emitter_seed.spawn(n):
        if optimizer == 'map-elites':
            start = np.random.default_rng(s.spawn(1)[0]).normal(x0, sigma0, size=(per_emitter, dim))
            emitter = IsoLineEmitter(
                archive,
                iso_sigma=config.get('sigma_iso', 0.01),
                line_sigma=config.get('sigma_line', 0.2),
                initial_solutions=start,
                batch_size=per_emitter,
                seed=s,
            )
        else:
            emitter = EvolutionStrategyEmitter(
                archive,
                x0=x0,
                sigma0=sigma0,
                ranker='imp' if optimizer == 'cma-mae' else 'obj',
                selection_rule='mu',
                restart_rule=config.get('restart_rule', 'basic'),
                es=_es_name(config, dim),
                batch_size=per_emitter,
                seed=s,
            )
        emitters.append(emitter)

    logger.info(f'{optimizer} with {n} emitter(s) of batch {per_emitter} over {dim} parameters')
    return QdScheduler(Scheduler(archive, emitters), result_archive)

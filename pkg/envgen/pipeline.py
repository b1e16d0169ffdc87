"""
Training loop and the operations built on trained generators.

A training run samples NCA parameter batches from the scheduler, turns every parameter
vector into an environment (generate -> repair -> evaluate) in a process pool and feeds the
results back. Archives, optimizer state and the run manifest are written to the run's
output directory; a run resumes from its latest snapshot.
"""
import asyncio
import logging
import time

from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ribs.archives import GridArchive

from envgen import __codename__, __version__
from envgen.config import ExperimentConfig, Size
from envgen.core import (
    Domain,
    Environment,
    MazeTile,
    add_maze_border,
    environment_entropy,
    maze_interior,
    validate,
    warehouse_template,
)
from envgen.errors import ConfigError, DimensionError, DomainError, EmptySelectionError, EnvGenError
from envgen.nca import NcaArchitecture, NcaGenerator, generate, load_generator, make_seed, param_count, save_generator
from envgen.qd import (
    Elite,
    Evaluated,
    QdScheduler,
    best_elite,
    build_scheduler,
    elites,
    load_state,
    qd_score,
    save_archive,
    save_state,
)
from envgen.repair import RepairBudget, RepairResult, repair
from envgen.sim import evaluate, maze_metrics
from envgen.state_file import StateFile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def generation_shape(domain: Domain, size: Size) -> Size:
    """Grid the NCA works on: mazes drop the wall ring, other domains use the full size"""
    width, height = size
    if domain is Domain.MAZE:
        return width - 2, height - 2
    return width, height


def build_environment(gen: NcaGenerator, domain: Domain, size: Size, iterations: int, spacing: int = 3):
    """Unrepaired environment of ``size`` (mazes come back with their wall ring)"""
    width, height = generation_shape(domain, size)
    env = generate(gen, make_seed(domain, width, height, spacing), iterations)
    if domain is Domain.MAZE:
        env = add_maze_border(env)
    return env


def candidate_seed(master_seed: int, eval_index: int) -> int:
    """Seed of the repair and simulations of evaluation ``eval_index``, independent of worker scheduling"""
    return int(np.random.SeedSequence([master_seed, eval_index]).generate_state(1)[0])


@dataclass(frozen=True)
class EvalContext:
    """Everything a worker needs to score a parameter vector"""

    domain: Domain
    size: Size
    iterations: int
    hidden_channels: int = 32
    padding_mode: str = 'zeros'
    n_shelves: Optional[int] = None
    spacing: int = 3
    repair: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    n_sims: int = 5
    horizon: int = 1000
    num_agents: int = 200
    alpha: float = 5.0
    measures: Optional[Tuple[str, ...]] = None

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig, scaled: bool = False) -> 'EvalContext':
        nca = cfg.section('nca')
        return cls(
            domain=cfg.domain,
            size=cfg.eval_size if scaled else cfg.size,
            iterations=cfg.eval_iterations if scaled else cfg.iterations,
            hidden_channels=nca.get('hidden_channels', 32),
            padding_mode=nca.get('padding_mode', 'zeros'),
            n_shelves=cfg.eval_n_shelves if scaled else cfg.n_shelves,
            spacing=cfg.spacing,
            repair=cfg.section('repair'),
            sim=cfg.section('sim'),
            n_sims=cfg.n_sims,
            horizon=cfg.eval_horizon if scaled else cfg.horizon,
            num_agents=cfg.eval_num_agents if scaled else cfg.num_agents,
            alpha=cfg.alpha,
            measures=cfg.measures,
        )

    @property
    def dim(self) -> int:
        return param_count(NcaArchitecture.for_domain(self.domain, self.hidden_channels))

    def generator(self, theta, seed: Optional[int] = None) -> NcaGenerator:
        return NcaGenerator.from_theta(self.domain, theta, self.hidden_channels, self.padding_mode, seed)


@dataclass
class CandidateOutcome:
    index: int
    evaluated: Optional[Evaluated]
    error: Optional[str] = None
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return self.evaluated is None


def evaluate_candidate(index: int, theta: np.ndarray, ctx: EvalContext, seed: int) -> CandidateOutcome:
    """generate -> repair -> evaluate for one parameter vector; failures come back as a flagged outcome"""
    start = time.perf_counter()
    try:
        gen = ctx.generator(theta)
        x_in = build_environment(gen, ctx.domain, ctx.size, ctx.iterations, ctx.spacing)
        repaired = repair(
            x_in,
            RepairBudget.from_config(ctx.repair),
            rng=np.random.default_rng(seed),
            n_shelves=ctx.n_shelves,
            spacing=ctx.spacing,
        )
        ev = evaluate(
            repaired.env,
            ctx.sim,
            ctx.n_sims,
            horizon=ctx.horizon,
            base_seed=seed,
            num_agents=ctx.num_agents,
            measures=ctx.measures,
        )
    except EnvGenError as e:
        return CandidateOutcome(index, None, f'{type(e).__name__}: {e}', time.perf_counter() - start)
    except Exception as e:
        return CandidateOutcome(index, None, repr(e), time.perf_counter() - start)

    metadata = {
        'f_res': ev.objective,
        'similarity': repaired.similarity,
        'success_rate': ev.success_rate,
        'eval_seed': seed,
        'eval_index': index,
        'env_hash': repaired.env.hash_key(),
    }
    evaluated = Evaluated(ev.objective + ctx.alpha * repaired.similarity, ev.objective, ev.measures, metadata)
    return CandidateOutcome(index, evaluated, None, time.perf_counter() - start)


async def _evaluate_batch(
    pool: Optional[Executor], solutions: np.ndarray, ctx: EvalContext, master_seed: int, first_index: int
) -> List[CandidateOutcome]:
    jobs = [
        (first_index + i, theta, ctx, candidate_seed(master_seed, first_index + i)) for i, theta in enumerate(solutions)
    ]
    if pool is None:
        outcomes = [evaluate_candidate(*job) for job in jobs]
    else:
        loop = asyncio.get_running_loop()
        outcomes = await asyncio.gather(*(loop.run_in_executor(pool, evaluate_candidate, *job) for job in jobs))
    return sorted(outcomes, key=lambda o: o.index)


@dataclass
class TrainResult:
    scheduler: QdScheduler
    manifest: StateFile
    output_dir: Path
    evaluations: int
    generations: int


class Trainer:
    """One training run in ``output_dir``; ``run()`` continues from the latest snapshot if there is one"""

    def __init__(self, cfg: ExperimentConfig, output_dir: Optional[PathLike] = None):
        self.cfg = cfg
        self.output_dir = Path(output_dir) if output_dir else cfg.output_dir
        self.ctx = EvalContext.from_experiment(cfg)
        self.scheduler = build_scheduler(
            cfg.optimizer, self.ctx.dim, cfg.archive_spec(), cfg.batch_size, cfg.section('qd'), cfg.seed
        )
        self.manifest = StateFile(self.output_dir / 'manifest.json')
        self.generation = 0
        self.evaluations = 0

    @property
    def state_path(self) -> Path:
        return self.output_dir / 'state.pkl'

    def _start_manifest(self):
        if (known := self.manifest.get('config_hash')) and known != self.cfg.config_hash:
            raise ConfigError(f'{self.output_dir} holds a run with a different configuration ({known[:12]})')
        if not known:
            self.manifest['config_hash'] = self.cfg.config_hash
            self.manifest['config'] = self.cfg.raw
            self.manifest['version'] = f'{__version__} ({__codename__})'
            self.manifest['generations'] = []
            self.manifest['snapshots'] = []

    def restore(self) -> bool:
        """Continue from ``state.pkl``; archive exports written after it was committed are ignored"""
        if not self.state_path.exists():
            return False
        state = load_state(self.state_path)
        self.scheduler = state['scheduler']
        self.generation = int(state['generation'])
        self.evaluations = int(state['evaluations'])
        self.manifest.truncate('generations', self.generation)
        logger.info(f'Resuming at generation {self.generation} after {self.evaluations} evaluations')
        return True

    def snapshot(self):
        save_archive(self.scheduler.archive, self.output_dir / 'archive_opt')
        save_archive(self.scheduler.result_archive, self.output_dir / 'archive_result')
        state = {
            'scheduler': self.scheduler,
            'generation': self.generation,
            'evaluations': self.evaluations,
        }
        # the state commits the snapshot, so it is written last
        save_state(state, self.state_path)
        self.manifest.append(
            'snapshots',
            {
                'generation': self.generation,
                'evaluations': self.evaluations,
                'qd_score': qd_score(self.scheduler.result_archive),
            },
        )
        logger.debug(f'Snapshot at generation {self.generation}')

    async def _run(self, pool: Optional[Executor]):
        cfg = self.cfg
        while self.evaluations < cfg.n_evals:
            start = time.perf_counter()
            solutions = self.scheduler.ask()
            outcomes = await _evaluate_batch(pool, solutions, self.ctx, cfg.seed, self.evaluations)
            for o in outcomes:
                if o.failed:
                    logger.warning(f'Candidate {o.index} failed: {o.error}')
            self.scheduler.tell([o.evaluated for o in outcomes])

            self.generation += 1
            self.evaluations += len(outcomes)
            record = {
                'generation': self.generation,
                'evaluations': self.evaluations,
                'failed': sum(o.failed for o in outcomes),
                'wall_time': round(time.perf_counter() - start, 3),
                **self.scheduler.metrics(),
            }
            self.manifest.append('generations', record)
            logger.info(
                f'Generation {self.generation}: {self.evaluations}/{cfg.n_evals} evaluations, '
                f'best {record["best"]:.4f}, qd_score {record["qd_score"]:.2f}, '
                f'coverage {record["coverage"]:.2%}, restarts {record["restarts"]}'
            )
            if self.generation % cfg.snapshot_every == 0 or self.evaluations >= cfg.n_evals:
                self.snapshot()

    def run(self, resume: bool = True) -> TrainResult:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._start_manifest()
        if resume:
            self.restore()
        elif self.state_path.exists():
            raise ConfigError(f'{self.output_dir} already holds a run, resume it or pick another directory')

        workers = self.cfg.workers
        logger.info(
            f'Training {self.cfg.domain.value} {self.cfg.size[0]}x{self.cfg.size[1]} with {self.cfg.optimizer}, '
            f'{self.ctx.dim} parameters, {workers or "no"} worker processes'
        )
        if workers:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                asyncio.run(self._run(pool))
        else:
            asyncio.run(self._run(None))

        if best := best_elite(self.scheduler.result_archive):
            gen = self.ctx.generator(best.solution, seed=best.metadata['eval_seed'])
            save_generator(gen, self.output_dir / 'best_generator.npz')
        return TrainResult(self.scheduler, self.manifest, self.output_dir, self.evaluations, self.generation)


def train(cfg: ExperimentConfig, output_dir: Optional[PathLike] = None, resume: bool = True) -> TrainResult:
    return Trainer(cfg, output_dir).run(resume=resume)


@dataclass
class ScaleReport:
    env: Environment
    unrepaired: Environment
    repair: RepairResult
    entropy: float
    valid: bool
    generation_time: float
    seed: int = 0

    def summary(self) -> dict:
        return {
            'width': self.env.width,
            'height': self.env.height,
            'similarity': self.repair.similarity,
            'entropy': self.entropy,
            'valid': self.valid,
            'generation_time': round(self.generation_time, 4),
            'repair_time': round(self.repair.wall_time, 4),
            'repair_mode': self.repair.mode,
            'changed_tiles': self.repair.changed,
            'seed': self.seed,
        }


def scale_generate(
    generator: Union[NcaGenerator, PathLike],
    size: Size,
    iterations: int,
    budget: Optional[RepairBudget] = None,
    n_shelves: Optional[int] = None,
    spacing: int = 3,
    domain=None,
    seed: Optional[int] = None,
) -> ScaleReport:
    """
    Run a trained generator at ``size`` for ``iterations`` steps and repair the result once.
    Without ``seed`` the repair uses the seed the generator was archived with, or 0.
    """
    gen = generator if isinstance(generator, NcaGenerator) else load_generator(generator)
    domain = Domain.parse(domain) if domain is not None else gen.domain
    if domain.tiles is not gen.domain.tiles:
        raise DomainError(f'A {gen.domain.value} generator cannot build {domain.value} environments')
    if seed is None:
        seed = gen.seed if gen.seed is not None else 0

    start = time.perf_counter()
    x_in = build_environment(gen, domain, size, iterations, spacing)
    generation_time = time.perf_counter() - start
    result = repair(x_in, budget, rng=np.random.default_rng(seed), n_shelves=n_shelves, spacing=spacing)
    report = validate(result.env, n_shelves, spacing)
    entropy = environment_entropy(result.env)
    logger.info(
        f'Generated {result.env!r} in {generation_time:.2f}s, repaired ({result.mode}) in {result.wall_time:.2f}s, '
        f'similarity {result.similarity:.3f}'
    )
    return ScaleReport(result.env, x_in, result, entropy, report.is_valid, generation_time, seed)


SELECTION_CRITERIA = ('global', 'window', 'cell')


def select_elite(
    archive: GridArchive,
    criterion: str = 'global',
    measure: int = 0,
    window: Optional[Tuple[float, float]] = None,
    cell: Optional[Sequence[int]] = None,
) -> Elite:
    """
    Pick an elite by global best objective, best within ``window`` on measure ``measure``,
    or the occupant of ``cell``. Ties go to the lowest cell index.
    """
    if criterion not in SELECTION_CRITERIA:
        raise ConfigError(f'Unknown selection criterion "{criterion}", expected one of {SELECTION_CRITERIA}')
    if archive.empty:
        raise EmptySelectionError('The archive is empty')

    if criterion == 'global':
        return best_elite(archive)
    if criterion == 'cell':
        dims = tuple(int(d) for d in archive.dims)
        if cell is None or len(cell) != len(dims):
            raise ConfigError(f'Cell selection needs {len(dims)} indices, got {cell}')
        cell = tuple(int(c) for c in cell)
        if any(not 0 <= c < d for c, d in zip(cell, dims)):
            raise ConfigError(f'Cell {cell} is outside the archive grid {dims}')
        for elite in elites(archive):
            if elite.cell == cell:
                return elite
        raise EmptySelectionError(f'Cell {cell} holds no elite')

    if window is None:
        raise ConfigError('Window selection needs a (low, high) window')
    if not 0 <= measure < archive.measure_dim:
        raise ConfigError(f'Measure {measure} out of range for {archive.measure_dim} measures')
    lo, hi = window
    best = None
    for elite in elites(archive):
        if lo <= elite.measures[measure] <= hi and (best is None or elite.objective > best.objective):
            best = elite
    if best is None:
        raise EmptySelectionError(f'No elite with measure {measure} in [{lo}, {hi}]')
    return best


def _generatable(env: Environment) -> Tuple[np.ndarray, Tuple[slice, slice]]:
    if env.domain is Domain.MAZE:
        return maze_interior(env).tiles, (slice(1, -1), slice(1, -1))
    if env.frozen_mask.any():
        cols = np.flatnonzero(~env.frozen_mask.all(axis=0))
        region = (slice(None), slice(int(cols.min()), int(cols.max()) + 1))
        return env.tiles[region], region
    return env.tiles, (slice(None), slice(None))


def tile_environment(env: Environment, size: Size, spacing: int = 3) -> Environment:
    """Tessellate the generatable region of ``env`` over a ``size`` grid, truncating partial tiles"""
    width, height = size
    if width < env.width or height < env.height:
        raise DimensionError(f'Cannot tile {env.width}x{env.height} into a smaller {width}x{height}')
    pattern, _ = _generatable(env)

    if env.domain.is_warehouse:
        target = warehouse_template(width, height, spacing)
        target = Environment(env.domain, target.tiles, target.frozen_mask)
    elif env.domain is Domain.MAZE:
        target = Environment.create(env.domain, np.full((height, width), MazeTile.WALL))
    else:
        target = Environment.create(env.domain, np.zeros((height, width)))
    tiles = target.tiles.copy()
    _, region = _generatable(target)
    view = tiles[region]
    reps = (-(-view.shape[0] // pattern.shape[0]), -(-view.shape[1] // pattern.shape[1]))
    tiles[region] = np.tile(pattern, reps)[: view.shape[0], : view.shape[1]]
    return target.with_tiles(tiles)


def tile_baseline(
    env: Environment,
    size: Size,
    budget: Optional[RepairBudget] = None,
    n_shelves: Optional[int] = None,
    spacing: int = 3,
    seed: int = 0,
) -> Tuple[Environment, RepairResult]:
    """Tiled environment before and after one repair"""
    tiled = tile_environment(env, size, spacing)
    result = repair(tiled, budget, rng=np.random.default_rng(seed), n_shelves=n_shelves, spacing=spacing)
    logger.info(f'Tiled {env!r} into {result.env!r}, similarity {result.similarity:.3f}')
    return tiled, result


def random_maze_baseline(
    reference: Environment, rng: np.random.Generator, attempts: int = 1000, tolerance: float = 0.2
) -> Environment:
    """Random maze with the wall count of ``reference`` and a longest shortest path within the tolerance of it"""
    ref = maze_metrics(reference)
    interior = maze_interior(reference)
    lo, hi = (1 - tolerance) * ref.path_length, (1 + tolerance) * ref.path_length
    for attempt in range(attempts):
        tiles = np.zeros(interior.size, dtype=np.uint8)
        tiles[rng.choice(interior.size, size=ref.wall_count, replace=False)] = MazeTile.WALL
        candidate = add_maze_border(interior.with_tiles(tiles.reshape(interior.tiles.shape)))
        if (candidate.tiles == MazeTile.EMPTY).sum() < 2:
            continue
        metrics = maze_metrics(candidate)
        if metrics.solvable and lo <= metrics.path_length <= hi:
            logger.debug(f'Random maze found after {attempt + 1} attempts, path length {metrics.path_length}')
            return candidate
    raise EmptySelectionError(
        f'No random maze with {ref.wall_count} walls and path length in [{lo:.0f}, {hi:.0f}] in {attempts} attempts'
    )


def random_theta_baseline(
    ctx: EvalContext, k: int, seed: int = 0, sigma: float = 0.2, eval_seed: Optional[int] = None
) -> Tuple[np.ndarray, CandidateOutcome]:
    """Best of ``k`` generators with parameters drawn from N(0, sigma^2), all scored with the same evaluation seed"""
    rng = np.random.default_rng(seed)
    eval_seed = candidate_seed(seed, 0) if eval_seed is None else eval_seed
    best = None
    for i in range(k):
        theta = rng.normal(0.0, sigma, size=ctx.dim).astype(np.float32)
        outcome = evaluate_candidate(i, theta, ctx, eval_seed)
        if outcome.failed:
            logger.debug(f'Random generator {i} failed: {outcome.error}')
            continue
        if best is None or outcome.evaluated.result > best[1].evaluated.result:
            best = (theta, outcome)
    if best is None:
        raise EmptySelectionError(f'All {k} random generators failed')
    return best

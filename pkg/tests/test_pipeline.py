import dataclasses

import numpy as np
import pandas as pd
import pytest

from envgen import pipeline
from envgen.config import ExperimentConfig, load_config
from envgen.core import Domain, MazeTile, WarehouseTile, validate, warehouse_template
from envgen.errors import ConfigError, DimensionError, DomainError, EmptySelectionError
from envgen.nca import NcaGenerator, load_generator, save_generator
from envgen.pipeline import (
    EvalContext,
    Trainer,
    build_environment,
    candidate_seed,
    evaluate_candidate,
    generation_shape,
    random_maze_baseline,
    random_theta_baseline,
    scale_generate,
    select_elite,
    tile_baseline,
    tile_environment,
    train,
)
from envgen.qd import ArchiveSpec, best_elite, elites, load_archive, load_state, result_add, thresholds
from envgen.repair import RepairBudget

TINY = [
    'experiment.size=[10, 8]',
    'experiment.iterations=5',
    'experiment.n_shelves=6',
    'experiment.num_agents=4',
    'experiment.n_sims=1',
    'experiment.horizon=30',
    'experiment.batch_size=4',
    'experiment.n_evals=4',
    'nca.hidden_channels=4',
    'archive.dims=[10, 10]',
    'archive.ranges=[[0, 10], [0, 1]]',
    'runtime.workers=0',
    'runtime.snapshot_every=1',
]

MAZE_CTX = EvalContext(domain=Domain.MAZE, size=(8, 8), iterations=5, hidden_channels=4, n_sims=1, alpha=0.0)


@pytest.fixture
def tiny_cfg(monkeypatch):
    monkeypatch.delenv('ENVGEN_WORKERS', raising=False)
    monkeypatch.delenv('ENVGEN_OUTPUT_DIR', raising=False)
    return ExperimentConfig.from_dict(load_config(preset='mini', overrides=TINY))


def _archive():
    archive = ArchiveSpec((4, 4), ((0.0, 4.0), (0.0, 1.0))).archive(2)
    for objective, measures in [(1.0, (0.5, 0.1)), (3.0, (3.5, 0.9)), (2.0, (1.5, 0.6)), (2.5, (1.2, 0.3))]:
        result_add(archive, np.full(2, objective), objective, measures)
    return archive


def test_candidate_seed():
    assert candidate_seed(42, 7) == candidate_seed(42, 7)
    assert len({candidate_seed(42, i) for i in range(50)}) == 50
    assert candidate_seed(1, 0) != candidate_seed(2, 0)


def test_maze_generation_adds_wall_ring():
    assert generation_shape(Domain.MAZE, (10, 8)) == (8, 6)
    assert generation_shape(Domain.MANUFACTURING, (10, 8)) == (10, 8)

    env = build_environment(MAZE_CTX.generator(np.zeros(MAZE_CTX.dim)), Domain.MAZE, (10, 8), 3)
    assert (env.width, env.height) == (10, 8)
    assert (env.tiles[1:-1, 1:-1] == MazeTile.EMPTY).all()
    assert env.count(MazeTile.WALL) == 2 * 10 + 2 * 6


def test_evaluate_candidate(tiny_cfg):
    ctx = EvalContext.from_experiment(tiny_cfg)
    outcome = evaluate_candidate(3, np.zeros(ctx.dim), ctx, seed=11)
    assert not outcome.failed and outcome.index == 3
    evaluated = outcome.evaluated
    meta = evaluated.metadata
    assert evaluated.result == meta['f_res']
    assert evaluated.objective == pytest.approx(meta['f_res'] + 5.0 * meta['similarity'])
    assert len(evaluated.measures) == 2

    again = evaluate_candidate(3, np.zeros(ctx.dim), ctx, seed=11)
    assert again.evaluated.objective == evaluated.objective
    assert again.evaluated.metadata['env_hash'] == meta['env_hash']


def test_failed_candidate_is_flagged(tiny_cfg):
    ctx = EvalContext.from_experiment(tiny_cfg)
    outcome = evaluate_candidate(0, np.zeros(5), ctx, seed=0)
    assert outcome.failed
    assert outcome.error


def test_one_generation(tiny_cfg, tmp_path):
    result = train(tiny_cfg, tmp_path / 'run')
    assert (result.evaluations, result.generations) == (4, 1)

    manifest = result.manifest
    assert manifest['config_hash'] == tiny_cfg.config_hash
    assert [g['evaluations'] for g in manifest['generations']] == [4]
    [snapshot] = manifest['snapshots']
    assert (snapshot['generation'], snapshot['evaluations']) == (1, 4)
    for name in ('state.pkl', 'archive_opt.pkl', 'archive_opt.csv', 'archive_result.pkl', 'archive_result.csv'):
        assert (tmp_path / 'run' / name).exists()
    assert not list((tmp_path / 'run').glob('*.tmp'))
    loaded = load_archive(tmp_path / 'run' / 'archive_result')
    assert [e.index for e in elites(loaded)] == [e.index for e in elites(result.scheduler.result_archive)]
    assert (tmp_path / 'run' / 'best_generator.npz').exists() == (not result.scheduler.result_archive.empty)


def test_run_directory_checks(tiny_cfg, tmp_path):
    train(tiny_cfg, tmp_path)
    with pytest.raises(ConfigError):
        Trainer(tiny_cfg, tmp_path).run(resume=False)

    other = ExperimentConfig.from_dict(load_config(preset='mini', overrides=TINY + ['experiment.seed=1']))
    with pytest.raises(ConfigError):
        Trainer(other, tmp_path).run()


def _assert_same_run(a, b):
    assert a.generations == b.generations
    assert len(a.manifest['generations']) == len(b.manifest['generations']) == a.generations
    x, y = elites(a.scheduler.result_archive), elites(b.scheduler.result_archive)
    assert [(e.index, e.objective, e.metadata) for e in x] == [(e.index, e.objective, e.metadata) for e in y]
    assert all(np.array_equal(e.solution, f.solution) for e, f in zip(x, y))
    assert thresholds(a.scheduler.archive) == thresholds(b.scheduler.archive)
    assert np.array_equal(a.scheduler.ask(), b.scheduler.ask())


def test_resume_matches_uninterrupted_run(tiny_cfg, tmp_path):
    cfg = dataclasses.replace(tiny_cfg, n_evals=8)
    straight = train(cfg, tmp_path / 'straight')

    # the first half stops after one generation, leaving a snapshot behind
    train(dataclasses.replace(tiny_cfg, n_evals=4), tmp_path / 'resumed')
    resumed = train(cfg, tmp_path / 'resumed')

    assert resumed.generations == 2
    _assert_same_run(straight, resumed)


def test_interrupted_snapshot_resumes_from_last_state(tiny_cfg, tmp_path, monkeypatch):
    cfg = dataclasses.replace(tiny_cfg, n_evals=8)
    straight = train(cfg, tmp_path / 'straight')

    real_save = pipeline.save_archive
    calls = []

    def save_then_crash(archive, stem):
        calls.append(stem)
        # the second snapshot dies between its two archive writes
        if len(calls) == 4:
            raise OSError('disk full')
        real_save(archive, stem)

    monkeypatch.setattr(pipeline, 'save_archive', save_then_crash)
    with pytest.raises(OSError):
        train(cfg, tmp_path / 'crashed')
    monkeypatch.setattr(pipeline, 'save_archive', real_save)

    assert load_state(tmp_path / 'crashed' / 'state.pkl')['generation'] == 1
    resumed = train(cfg, tmp_path / 'crashed')
    assert len(resumed.manifest['snapshots']) == 2
    _assert_same_run(straight, resumed)


def test_logged_qd_score_matches_archive_file(tiny_cfg, tmp_path):
    result = train(dataclasses.replace(tiny_cfg, n_evals=12), tmp_path)
    table = pd.read_csv(tmp_path / 'archive_result.csv')
    snapshots = result.manifest['snapshots']
    assert table['objective'].sum() == pytest.approx(snapshots[-1]['qd_score'])
    assert result.manifest['generations'][-1]['qd_score'] == pytest.approx(snapshots[-1]['qd_score'])
    for key in ('generations', 'snapshots'):
        scores = [record['qd_score'] for record in result.manifest[key]]
        assert all(later >= earlier - 1e-9 for earlier, later in zip(scores, scores[1:]))


def test_select_elite():
    archive = _archive()
    elite = select_elite(archive)
    assert elite.objective == 3.0 and elite.cell == (3, 3)

    elite = select_elite(archive, 'window', measure=0, window=(1.0, 2.0))
    assert elite.objective == 2.5
    elite = select_elite(archive, 'cell', cell=(0, 0))
    assert elite.objective == 1.0 and elite.index == 0


def test_select_elite_errors():
    archive = _archive()
    with pytest.raises(EmptySelectionError):
        select_elite(archive, 'window', measure=1, window=(0.95, 1.0))
    with pytest.raises(EmptySelectionError):
        select_elite(archive, 'cell', cell=(3, 0))
    with pytest.raises(EmptySelectionError):
        select_elite(ArchiveSpec.of(archive).archive(2))
    with pytest.raises(ConfigError):
        select_elite(archive, 'nearest')
    with pytest.raises(ConfigError):
        select_elite(archive, 'cell', cell=(1,))
    with pytest.raises(ConfigError):
        select_elite(archive, 'cell', cell=(4, 0))
    with pytest.raises(ConfigError):
        select_elite(archive, 'window', measure=2, window=(0.0, 1.0))


def test_tile_same_size_is_identity(mini_warehouse, mini_manufacturing):
    assert tile_environment(mini_warehouse, (16, 12)) == mini_warehouse
    assert tile_environment(mini_manufacturing, (12, 12)) == mini_manufacturing


def test_tile_warehouse_storage(mini_warehouse):
    tiled = tile_environment(mini_warehouse, (28, 24))
    template = warehouse_template(28, 24)
    assert np.array_equal(tiled.frozen_mask, template.frozen_mask)
    assert np.array_equal(tiled.tiles[:, :2], template.tiles[:, :2])
    assert np.array_equal(tiled.tiles[:, 2:26], np.tile(mini_warehouse.tiles[:, 2:14], (2, 2)))
    assert tiled.count(WarehouseTile.SHELF) == 96


def test_tile_truncates_partial_copies(open_maze, mini_manufacturing):
    tiled = tile_environment(mini_manufacturing, (18, 12))
    assert np.array_equal(tiled.tiles[:, 12:], mini_manufacturing.tiles[:, :6])

    maze = tile_environment(open_maze, (9, 6))
    assert (maze.tiles[1:-1, 1:-1] == MazeTile.EMPTY).all()
    assert maze.count(MazeTile.WALL) == 2 * 9 + 2 * 4

    with pytest.raises(DimensionError):
        tile_environment(mini_manufacturing, (11, 12))


def test_tile_baseline(mini_warehouse):
    tiled, result = tile_baseline(mini_warehouse, (28, 24), n_shelves=96)
    assert tiled.width == 28
    assert validate(result.env, n_shelves=96).is_valid


def test_scale_generate_reproduces_training(tiny_cfg, tmp_path):
    cfg = dataclasses.replace(tiny_cfg, n_evals=8)
    result = train(cfg, tmp_path / 'run')
    ctx = EvalContext.from_experiment(cfg)
    archived = elites(result.scheduler.result_archive)
    assert archived

    for elite in archived:
        path = tmp_path / f'gen_{elite.index}.npz'
        save_generator(ctx.generator(elite.solution, seed=elite.metadata['eval_seed']), path)
        report = scale_generate(
            path,
            ctx.size,
            ctx.iterations,
            RepairBudget.from_config(ctx.repair),
            n_shelves=ctx.n_shelves,
            spacing=ctx.spacing,
        )
        assert report.seed == elite.metadata['eval_seed']
        assert report.env.hash_key() == elite.metadata['env_hash']

    best = best_elite(result.scheduler.result_archive)
    assert load_generator(tmp_path / 'run' / 'best_generator.npz').seed == best.metadata['eval_seed']


def test_scale_generate_explicit_seed(tiny_cfg, tmp_path, rng):
    ctx = EvalContext.from_experiment(tiny_cfg)
    theta = rng.normal(scale=0.2, size=ctx.dim)
    gen = ctx.generator(theta, seed=99)
    save_generator(gen, tmp_path / 'gen.npz')

    report = scale_generate(tmp_path / 'gen.npz', ctx.size, ctx.iterations, n_shelves=6, seed=5)
    assert report.seed == 5
    assert report.unrepaired == build_environment(gen, ctx.domain, ctx.size, ctx.iterations)
    assert report.valid
    assert report.summary()['width'] == 10
    assert scale_generate(ctx.generator(theta), ctx.size, ctx.iterations, n_shelves=6).seed == 0


def test_scale_generate_checks_domain():
    gen = NcaGenerator.from_theta('maze', np.zeros(MAZE_CTX.dim), hidden_channels=4)
    with pytest.raises(DomainError):
        scale_generate(gen, (10, 8), 1, domain='warehouse_even')
    report = scale_generate(gen, (12, 12), 2)
    assert report.env.width == 12 and report.valid


def test_random_maze_baseline(make_env, rng):
    reference = make_env(
        'maze',
        ['#######', '#.....#', '#.###.#', '#.....#', '#.....#', '#.....#', '#######'],
    )
    maze = random_maze_baseline(reference, rng)
    assert maze.count(MazeTile.WALL) == reference.count(MazeTile.WALL)
    with pytest.raises(EmptySelectionError):
        random_maze_baseline(reference, rng, attempts=0)


def test_random_theta_baseline():
    theta, outcome = random_theta_baseline(MAZE_CTX, k=3, seed=2)
    assert theta.shape == (MAZE_CTX.dim,)
    assert outcome.evaluated.result in (0.0, 1.0)
    assert outcome.evaluated.objective == outcome.evaluated.result

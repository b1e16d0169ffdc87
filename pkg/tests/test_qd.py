import math
import pickle

import numpy as np
import pandas as pd
import pytest

from ribs.emitters import IsoLineEmitter
from ribs.emitters.opt import CMAEvolutionStrategy

from envgen.errors import ConfigError, DimensionError, FormatError, NumericalFailure
from envgen.qd import (
    AddStatus,
    ArchiveSpec,
    Evaluated,
    annealed_add,
    archive_index,
    best_elite,
    build_scheduler,
    coverage,
    elites,
    load_archive,
    load_state,
    qd_score,
    result_add,
    save_archive,
    save_state,
    thresholds,
)

LINE = ArchiveSpec((10,), ((0.0, 1.0),))
GRID = ArchiveSpec((5, 4), ((0.0, 1.0), (0.0, 1.0)))


def _evaluate(solutions, peak=10.0):
    out = []
    for x in solutions:
        f = peak - float(np.sum(x**2))
        out.append(Evaluated(f, f, (abs(math.tanh(x[0])), abs(math.tanh(x[1]))), {'f_res': f}))
    return out


def test_archive_index_binning():
    archive = ArchiveSpec((100,), ((0.0, 1.0),)).archive(2)
    assert archive_index(archive, [0.0]) == (0,)
    assert archive_index(archive, [1.0]) == (99,)
    assert archive_index(archive, [0.5]) == (50,)
    assert archive_index(archive, [-3.0]) == (0,)
    assert archive_index(GRID.archive(2), [0.3, 0.99]) == (1, 3)


def test_archive_index_rejects_bad_measures():
    archive = LINE.archive(2)
    with pytest.raises(DimensionError):
        archive_index(archive, [0.1, 0.2])
    with pytest.raises(NumericalFailure):
        archive_index(archive, [math.nan])


@pytest.mark.parametrize('dims, ranges', [((), ()), ((0,), ((0, 1),)), ((3,), ((1, 1),)), ((2, 2), ((0, 1),))])
def test_archive_spec_checks(dims, ranges):
    with pytest.raises(ConfigError):
        ArchiveSpec(dims, ranges)


def test_archive_spec_of_archive():
    assert ArchiveSpec.of(GRID.archive(3)) == GRID
    assert GRID.n_cells == 20


def test_result_add():
    archive = LINE.archive(3)
    assert result_add(archive, np.zeros(3), 6.35, [0.42]) is AddStatus.INSERTED
    assert result_add(archive, np.ones(3), 6.74, [0.45]) is AddStatus.REPLACED
    assert result_add(archive, np.full(3, 2.0), 6.74, [0.41]) is AddStatus.REJECTED
    [elite] = elites(archive)
    assert elite.index == 4 and elite.cell == (4,)
    assert elite.objective == 6.74
    assert elite.measures == (0.45,)
    assert np.array_equal(elite.solution, np.ones(3))


def test_non_finite_objective_rejected():
    with pytest.raises(NumericalFailure):
        result_add(LINE.archive(3), np.zeros(3), math.inf, [0.5])
    with pytest.raises(NumericalFailure):
        annealed_add(LINE.archive(3, 0.5, 0.0), np.zeros(3), math.nan, [0.5])


def test_annealed_threshold_update():
    archive = LINE.archive(3, learning_rate=0.5, threshold_min=2.0)
    accepted, improvement = annealed_add(archive, np.zeros(3), 3.0, [0.35])
    assert accepted and improvement == pytest.approx(1.0)
    assert thresholds(archive) == {3: pytest.approx(2.5)}

    accepted, improvement = annealed_add(archive, np.ones(3), 2.5, [0.35])
    assert not accepted and improvement == pytest.approx(0.0)
    assert thresholds(archive) == {3: pytest.approx(2.5)}
    assert elites(archive)[0].objective == 3.0


def test_below_floor_never_accepted():
    archive = LINE.archive(3, learning_rate=0.1, threshold_min=0.0)
    accepted, _ = annealed_add(archive, np.zeros(3), -1.0, [0.5])
    assert not accepted
    assert archive.empty


def test_learning_rate_one_matches_result_archive(rng):
    annealed = GRID.archive(3, learning_rate=1.0, threshold_min=-math.inf)
    result = GRID.archive(3)
    for _ in range(10_000):
        x, f, m = rng.normal(size=3), float(rng.integers(-5, 6)), rng.random(2)
        accepted, _ = annealed_add(annealed, x, f, m)
        assert accepted == (result_add(result, x, f, m) is not AddStatus.REJECTED)
    assert [(e.index, e.objective) for e in elites(annealed)] == [(e.index, e.objective) for e in elites(result)]


def test_annealing_parameter_checks():
    with pytest.raises(ConfigError):
        LINE.archive(3, learning_rate=0.0)
    with pytest.raises(ConfigError):
        LINE.archive(3, learning_rate=1.5, threshold_min=0.0)
    with pytest.raises(ConfigError):
        LINE.archive(3, learning_rate=0.5, threshold_min=-math.inf)


def test_qd_score_and_coverage():
    archive = LINE.archive(3)
    assert (qd_score(archive), coverage(archive)) == (0.0, 0.0)
    result_add(archive, np.zeros(3), 5.0, [0.5])
    assert qd_score(archive) == pytest.approx(5.0)
    assert coverage(archive) == pytest.approx(0.1)


def test_best_elite_breaks_ties_by_cell():
    archive = LINE.archive(3)
    assert best_elite(archive) is None
    result_add(archive, np.zeros(3), 2.0, [0.75])
    result_add(archive, np.ones(3), 2.0, [0.15])
    result_add(archive, np.ones(3), 1.0, [0.55])
    assert best_elite(archive).index == 1
    assert [e.index for e in elites(archive)] == [1, 5, 7]


def test_elite_metadata():
    archive = GRID.archive(2)
    result_add(archive, np.zeros(2), 1.5, [0.1, 0.9], {'f_res': 1.25, 'eval_seed': 77, 'env_hash': 2**59 + 3})
    [elite] = elites(archive)
    assert elite.metadata['f_res'] == 1.25
    assert elite.metadata['eval_seed'] == 77
    assert elite.metadata['env_hash'] == 2**59 + 3
    assert elite.metadata['similarity'] == 0


@pytest.mark.slow
def test_cma_covariance_stays_positive_definite():
    rng = np.random.default_rng(5)
    es = CMAEvolutionStrategy(0.3, 6, batch_size=10, seed=5)
    es.reset(np.zeros(6))
    for i in range(1000):
        es.ask()
        es.tell(rng.permutation(10), np.linspace(1.0, 0.0, 10), 5)
        if i % 100 == 99:
            cov = es.cov.cov
            assert np.allclose(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() > 0


def test_cma_sample_covariance_matches_distribution():
    rng = np.random.default_rng(6)
    es = CMAEvolutionStrategy(0.5, 4, batch_size=8, seed=6)
    es.reset(np.zeros(4))
    for _ in range(30):
        solutions = es.ask()
        # pull the distribution towards the first axis so it stops being isotropic
        es.tell(np.argsort(-solutions[:, 0] - 0.1 * rng.random(8)), np.linspace(1.0, 0.0, 8), 4)

    samples = es.ask(batch_size=100_000)
    basis, values = es.cov.eigenbasis, es.cov.eigenvalues
    target = es.sigma**2 * (basis * values) @ basis.T
    error = np.linalg.norm(np.cov(samples, rowvar=False) - target) / np.linalg.norm(target)
    assert error < 0.05


def test_iso_line_variance_along_and_across():
    d, iso, line = 1.0, 0.1, 0.5
    archive = LINE.archive(4)
    result_add(archive, np.zeros(4), 1.0, [0.05])
    result_add(archive, np.array([d, 0.0, 0.0, 0.0]), 1.0, [0.95])
    emitter = IsoLineEmitter(archive, iso_sigma=iso, line_sigma=line, x0=np.zeros(4), batch_size=1000, seed=3)
    samples = np.concatenate([emitter.ask() for _ in range(50)])

    along = np.var(samples[:, 0])
    across = np.var(samples[:, 1:], axis=0)
    assert along == pytest.approx(iso**2 + line**2 * d**2 / 2 + d**2 / 4, rel=0.05)
    assert np.allclose(across, iso**2, rtol=0.05)


@pytest.mark.slow
def test_cma_es_minimizes_sphere():
    sched = build_scheduler('cma-es', 10, GRID, 10, {'sigma0': 0.5, 'initial_mean': 1.0}, seed=11)
    best = math.inf
    for _ in range(1000):
        solutions = sched.ask()
        best = min(best, float(np.min(np.sum(solutions**2, axis=1))))
        sched.tell(_evaluate(solutions, peak=100.0))
    assert best < 1e-10


def test_scheduler_skips_failed_candidates():
    sched = build_scheduler('cma-mae', 5, GRID, 4, {'learning_rate': 0.1}, seed=0)
    solutions = sched.ask()
    assert solutions.shape == (4, 5)
    evaluations = _evaluate(solutions)
    evaluations[0] = evaluations[2] = None
    statuses = sched.tell(evaluations)
    assert [s is None for s in statuses] == [True, False, True, False]
    assert 1 <= len(sched.result_archive) <= 2
    with pytest.raises(RuntimeError):
        sched.tell(evaluations)


def test_scheduler_survives_all_failed_batch():
    sched = build_scheduler('cma-mae', 5, GRID, 4, {}, seed=1)
    sched.ask()
    assert sched.tell([None] * 4) == [None] * 4
    assert sched.archive.empty and sched.result_archive.empty
    solutions = sched.ask()
    sched.tell(_evaluate(solutions))
    assert not sched.result_archive.empty


def test_result_archive_keeps_plain_result():
    sched = build_scheduler('cma-mae', 3, GRID, 4, {}, seed=2)
    solutions = sched.ask()
    evaluations = [Evaluated(e.objective + 5.0, e.result, e.measures, e.metadata) for e in _evaluate(solutions)]
    sched.tell(evaluations)
    assert max(e.objective for e in elites(sched.result_archive)) == pytest.approx(max(e.result for e in evaluations))
    metrics = sched.metrics()
    assert metrics['elites'] == len(sched.result_archive)
    assert metrics['qd_score'] == pytest.approx(sum(e.objective for e in elites(sched.result_archive)))


def test_scheduler_checks_batch():
    sched = build_scheduler('cma-es', 3, LINE, 4, {}, seed=0)
    sched.ask()
    with pytest.raises(ValueError):
        sched.tell([None] * 3)
    with pytest.raises(ConfigError):
        build_scheduler('cma-mae', 3, LINE, 5, {'num_emitters': 2}, seed=0)
    with pytest.raises(ConfigError):
        build_scheduler('random-search', 3, LINE, 4, {}, seed=0)
    with pytest.raises(ConfigError):
        build_scheduler('cma-mae', 3, LINE, 4, {'threshold_min': -math.inf}, seed=0)
    with pytest.raises(ConfigError):
        build_scheduler('cma-es', 3, LINE, 4, {'covariance': 'banded'}, seed=0)


def test_map_elites_samples_around_start():
    sched = build_scheduler('map-elites', 6, GRID, 8, {'sigma0': 0.5, 'initial_mean': 1.0}, seed=4)
    solutions = sched.ask()
    assert solutions.shape == (8, 6)
    assert abs(float(solutions.mean()) - 1.0) < 0.5
    sched.tell(_evaluate(solutions))
    assert not sched.archive.empty
    assert sched.ask().shape == (8, 6)


def test_scheduler_state_round_trip(tmp_path):
    first = build_scheduler('cma-mae', 4, GRID, 6, {'num_emitters': 2}, seed=9)
    for _ in range(3):
        first.tell(_evaluate(first.ask()))
    save_state({'scheduler': first, 'generation': 3}, tmp_path / 'state.pkl')

    second = load_state(tmp_path / 'state.pkl')['scheduler']
    assert np.array_equal(first.ask(), second.ask())
    assert thresholds(first.archive) == thresholds(second.archive)
    assert [e.index for e in elites(first.result_archive)] == [e.index for e in elites(second.result_archive)]


def test_archive_files(tmp_path):
    archive = GRID.archive(3, learning_rate=0.2, threshold_min=0.0)
    result_add(archive, np.arange(3.0), 1.5, (0.1, 0.9), {'env_hash': 12345, 'f_res': 1.25})
    result_add(archive, np.ones(3), 0.75, (0.8, 0.2), {'env_hash': 678, 'f_res': 0.5})
    save_archive(archive, tmp_path / 'archive_opt')
    assert not list(tmp_path.glob('*.tmp'))

    table = pd.read_csv(tmp_path / 'archive_opt.csv')
    assert len(table) == 2
    assert sorted(table['objective']) == [0.75, 1.5]

    loaded = load_archive(tmp_path / 'archive_opt')
    assert thresholds(loaded) == thresholds(archive)
    for a, b in zip(elites(archive), elites(loaded)):
        assert (a.index, a.objective, a.measures, a.metadata) == (b.index, b.objective, b.measures, b.metadata)
        assert np.array_equal(a.solution, b.solution)


def test_empty_archive_file(tmp_path):
    save_archive(LINE.archive(2), tmp_path / 'empty')
    loaded = load_archive(tmp_path / 'empty')
    assert loaded.empty and ArchiveSpec.of(loaded) == LINE


def test_missing_or_foreign_files(tmp_path):
    with pytest.raises(FormatError):
        load_archive(tmp_path / 'nothing')
    with open(tmp_path / 'list.pkl', 'wb') as f:
        pickle.dump([1, 2], f)
    with pytest.raises(FormatError):
        load_archive(tmp_path / 'list')
    with pytest.raises(FormatError):
        load_state(tmp_path / 'list.pkl')


def test_state_file_nesting(tmp_path):
    state = {'a': {'b': np.arange(4.0), 'c': 3}, 'd': [1, 2], 'e': np.float64(0.5)}
    save_state(state, tmp_path / 's.pkl')
    loaded = load_state(tmp_path / 's.pkl')
    assert np.array_equal(loaded['a']['b'], np.arange(4.0))
    assert loaded['a']['c'] == 3 and loaded['d'] == [1, 2] and loaded['e'] == 0.5

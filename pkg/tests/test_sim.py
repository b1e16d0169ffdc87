import numpy as np
import pytest

from envgen.core import Environment, ManufacturingTile, human_layout, warehouse_template
from envgen.errors import (
    ConfigError,
    DegenerateMazeError,
    DomainError,
    InvalidEnvironmentError,
    NoCandidateGoalError,
    TooManyAgentsError,
)
from envgen.sim import (
    GridGraph,
    Phase,
    PlanRequest,
    ReservationTable,
    SimConfig,
    SimResult,
    Task,
    TaskAssigner,
    agent_sweep,
    assign_task,
    compute_measures,
    evaluate,
    find_conflicts,
    horizon_bound,
    maze_metrics,
    measure_names,
    plan_agent,
    plan_window,
    run_simulation,
    summarize,
)

SHUTTLE = ['..@..', 'w.e.w']
TREE = ['rgy', 'eee']
SIM = {'window': 10, 'replan_period': 5}


def _result(throughput, congested=False):
    return SimResult(throughput, congested, np.zeros(1), np.zeros((1, 1)), 1, np.zeros(1))


def test_corridor_planner(make_env):
    graph = GridGraph(make_env('maze', ['########', '#......#', '########']))
    path = plan_agent(graph, ReservationTable(), PlanRequest(9, [Task(14)]), window=10)
    assert len(path) == 11
    assert path[:6] == [9, 10, 11, 12, 13, 14]
    assert set(path[5:]) == {14}


def test_dwell_keeps_agent_in_place(make_env):
    graph = GridGraph(make_env('maze', ['########', '#......#', '########']))
    path = plan_agent(graph, ReservationTable(), PlanRequest(11, [Task(9)], dwell_left=3), window=10)
    assert path[:4] == [11, 11, 11, 11]
    assert path[6] == 9


def test_head_on_agents_pass(make_env):
    env = make_env('maze', ['#########', '#.......#', '#.......#', '#########'])
    graph = GridGraph(env)
    requests = [PlanRequest(10, [Task(16)]), PlanRequest(16, [Task(10)])]
    paths, failed = plan_window(graph, requests, 10, np.random.default_rng(0))
    assert failed == [False, False]
    assert paths[0][-1] == 16 and paths[1][-1] == 10
    assert find_conflicts(np.array(paths).T, env) == []


def test_conflict_scan(open_maze):
    kinds = [c.kind for c in find_conflicts(np.array([[7, 9], [8, 8]]), open_maze)]
    assert kinds == ['vertex']
    swap = find_conflicts(np.array([[7, 8], [8, 7]]), open_maze)
    assert [(c.kind, c.agents) for c in swap] == [('swap', (0, 1))]
    assert [c.kind for c in find_conflicts(np.array([[7], [9]]), open_maze)] == ['jump']
    assert [c.kind for c in find_conflicts(np.array([[0]]), open_maze)] == ['blocked']


def test_shuttle_throughput(make_env):
    env = make_env('warehouse_even', SHUTTLE)
    cfg = SimConfig(num_agents=1, horizon=100, seed=3, stop_on_congestion=False, record_paths=True)
    result = run_simulation(env, cfg)

    endpoint = 7
    start = int(result.trajectories[0, 0])
    first = max(1, int(GridGraph(env).distance_from(endpoint)[start]))
    expected = len(range(first, 101, 2))
    assert result.total_finished == expected
    assert result.throughput == pytest.approx(expected / 100)


def test_full_tree_congests(make_env):
    env = make_env('manufacturing', TREE)
    result = run_simulation(env, SimConfig(num_agents=3, horizon=50))
    assert result.congested
    assert result.elapsed == 0
    assert result.throughput == 0.0


def test_simulation_checks(make_env):
    with pytest.raises(TooManyAgentsError):
        run_simulation(make_env('manufacturing', TREE), SimConfig(num_agents=4))
    pocket = make_env('warehouse_even', ['.........', 'w...@...w', '...@e@...', '....@....', 'w.......w'])
    with pytest.raises(InvalidEnvironmentError):
        run_simulation(pocket, SimConfig(num_agents=2))


def test_simulation_deterministic(mini_warehouse):
    cfg = SimConfig(num_agents=10, horizon=60, seed=5, record_paths=True)
    a = run_simulation(mini_warehouse, cfg)
    b = run_simulation(mini_warehouse, cfg)
    assert a.throughput == b.throughput
    assert np.array_equal(a.finished_per_timestep, b.finished_per_timestep)
    assert np.array_equal(a.tile_usage, b.tile_usage)
    assert np.array_equal(a.trajectories, b.trajectories)


def test_simulation_invariants(mini_warehouse, mini_manufacturing):
    for env in (mini_warehouse, mini_manufacturing):
        result = run_simulation(env, SimConfig(num_agents=8, horizon=60, seed=1, record_paths=True))
        assert find_conflicts(result.trajectories, env) == []
        assert result.throughput * result.elapsed == pytest.approx(result.total_finished)
        assert result.tile_usage.sum() == 8 * (result.elapsed + 1)
        assert result.agent_finished.sum() == result.total_finished
        assert result.trajectories.shape == (result.elapsed + 1, 8)


def test_even_tasks_alternate():
    assert TaskAssigner.next_phase(Phase.TO_WORKSTATION) is Phase.TO_ENDPOINT
    assert TaskAssigner.next_phase(Phase.TO_ENDPOINT) is Phase.TO_WORKSTATION
    assert TaskAssigner.next_phase(Phase.TO_Y) is Phase.TO_R


def test_uneven_workstation_weights(rng):
    env = human_layout('warehouse_uneven', 16, 12, n_shelves=24)
    assigner = TaskAssigner(env, SimConfig(num_agents=1))
    left = assigner.workstations % env.width == 0
    assert left.sum() == (~left).sum()
    assert assigner.workstation_p[left].sum() == pytest.approx(5 / 6)

    draws = [assigner.draw(Phase.TO_WORKSTATION, rng).cell % env.width for _ in range(20_000)]
    assert np.mean(np.array(draws) == 0) == pytest.approx(5 / 6, abs=0.02)


def test_manufacturing_goals(mini_manufacturing, rng):
    cfg = SimConfig(num_agents=1)
    assigner = TaskAssigner(mini_manufacturing, cfg)
    task = assigner.draw(Phase.TO_G, rng)
    assert task.dwell == 5
    r, c = assign_task(Phase.TO_G, mini_manufacturing, cfg, rng)
    tiles = mini_manufacturing.tiles
    assert tiles[r, c] == ManufacturingTile.ENDPOINT
    around = [tiles[rr, cc] for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)) if 0 <= rr < 12 and 0 <= cc < 12]
    assert ManufacturingTile.STATION_G in around


def test_goal_errors(open_maze):
    with pytest.raises(NoCandidateGoalError):
        TaskAssigner(warehouse_template(8, 6), SimConfig(num_agents=1))
    with pytest.raises(DomainError):
        TaskAssigner(open_maze, SimConfig(num_agents=1))


def test_sim_config():
    with pytest.raises(ConfigError):
        SimConfig(num_agents=1, window=4, replan_period=5)
    with pytest.raises(ConfigError):
        SimConfig.from_config({'dwell': {'b': 3}})
    cfg = SimConfig.from_config({'dwell': {'R': 1}, 'horizon': 77}, num_agents=4)
    assert cfg.dwell[ManufacturingTile.STATION_R] == 1
    assert cfg.dwell[ManufacturingTile.STATION_Y] == 10
    assert (cfg.horizon, cfg.num_agents) == (77, 4)


def test_maze_open_interior(open_maze):
    metrics = maze_metrics(open_maze)
    assert metrics.solvable == 1
    assert metrics.path_length == 6
    assert (metrics.start, metrics.goal) == ((1, 1), (4, 4))
    assert metrics.wall_count == 0


@pytest.mark.parametrize('k', [2, 3, 6])
def test_maze_corridor(make_env, k):
    env = make_env('maze', ['#' * (k + 2), '#' + '.' * k + '#', '#' * (k + 2)])
    metrics = maze_metrics(env)
    assert metrics.path_length == k - 1
    assert (metrics.start, metrics.goal) == ((1, 1), (1, k))


def test_maze_walled_goal(make_env):
    env = make_env('maze', ['######', '#.#..#', '#.#..#', '######'])
    metrics = maze_metrics(env, start=(1, 1), goal=(1, 4))
    assert metrics.solvable == 0 and metrics.path_length == 0
    assert metrics.wall_count == 2
    assert maze_metrics(env, start=(1, 3), goal=(2, 4)).path_length == 2


def test_maze_isolated_tiles(make_env):
    metrics = maze_metrics(make_env('maze', ['#####', '#.#.#', '#####']))
    assert metrics.solvable == 0 and metrics.path_length == 0
    with pytest.raises(DegenerateMazeError):
        maze_metrics(make_env('maze', ['####', '#.##', '####']))


def test_horizon_bound():
    assert horizon_bound(Environment.create('maze', np.zeros((18, 18)))) == 648


def test_evaluate_single_run(mini_warehouse):
    ev = evaluate(mini_warehouse, SIM, n_runs=1, horizon=40, base_seed=7, num_agents=8)
    single = run_simulation(mini_warehouse, SimConfig.from_config(SIM, num_agents=8, horizon=40, seed=7))
    assert ev.objective == single.throughput
    assert ev.measures == compute_measures(mini_warehouse)
    assert ev.metadata['env_hash'] == mini_warehouse.digest()


def test_evaluate_averages_runs(mini_warehouse):
    ev = evaluate(mini_warehouse, SIM, n_runs=3, horizon=30, num_agents=6)
    runs = [run_simulation(mini_warehouse, SimConfig.from_config(SIM, 6, 30, seed=s)).throughput for s in range(3)]
    assert ev.metadata['throughputs'] == runs
    assert ev.objective == pytest.approx(np.mean(runs))


def test_evaluate_maze(open_maze, make_env):
    ev = evaluate(open_maze, SIM, n_runs=1)
    assert ev.objective == 1.0
    assert ev.measures == (0.0, 6.0)
    assert evaluate(make_env('maze', ['#####', '#.#.#', '#####']), SIM, n_runs=1).objective == 0.0


def test_measure_names():
    assert measure_names('manufacturing') == ('workstations', 'entropy')
    assert measure_names('maze', ['entropy']) == ('entropy',)
    with pytest.raises(ConfigError):
        measure_names('maze', ['height'])


def test_summarize():
    summary = summarize([_result(1.0), _result(2.0), _result(3.0, congested=True)])
    assert summary.runs == 3
    assert summary.success_rate == pytest.approx(2 / 3)
    assert summary.mean_throughput == 1.5
    assert summary.sem_throughput == pytest.approx(0.5)
    assert summarize([]).runs == 0
    assert summarize([_result(1.0, congested=True)]).success_rate == 0.0


def test_agent_sweep(mini_warehouse):
    sweep = agent_sweep(mini_warehouse, SimConfig(num_agents=1, horizon=20), [2, 4], n_runs=2)
    assert sweep.agent_counts == (2, 4)
    assert [s.runs for s in sweep.summaries] == [2, 2]
    assert sweep.max_scalability in (2, 4)

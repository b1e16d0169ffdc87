import logging

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from scipy import stats

from envgen.core import Environment, validate
from envgen.errors import InvalidEnvironmentError, TooManyAgentsError
from .config import SimConfig
from .graph import GridGraph
from .planner import PlanRequest, plan_window
from .tasks import Phase, Task, TaskAssigner

logger = logging.getLogger(__name__)


@dataclass
class AgentState:
    position: int
    phase: Phase
    goals: List[Task] = field(default_factory=list)
    dwell_left: int = 0
    finished: int = 0

    @property
    def goal(self) -> Optional[Task]:
        return self.goals[0] if self.goals else None


@dataclass
class SimResult:
    throughput: float
    congested: bool
    finished_per_timestep: np.ndarray
    tile_usage: np.ndarray
    elapsed: int
    agent_finished: np.ndarray
    trajectories: Optional[np.ndarray] = None

    @property
    def total_finished(self) -> int:
        return int(self.finished_per_timestep.sum())

    def summary(self) -> dict:
        return {
            'throughput': self.throughput,
            'congested': self.congested,
            'elapsed': self.elapsed,
            'finished': self.total_finished,
        }


def _refill(agent: AgentState, assigner: TaskAssigner, k: int, rng: np.random.Generator):
    while len(agent.goals) < k:
        task, agent.phase = assigner.next_task(agent.phase, rng)
        agent.goals.append(task)


def run_simulation(env: Environment, cfg: SimConfig) -> SimResult:
    """Lifelong simulation with rolling-horizon replanning; deterministic given ``cfg.seed``"""
    report = validate(env)
    if not report.is_valid:
        raise InvalidEnvironmentError(f'Cannot simulate {env!r}: {report}', report=report)
    graph = GridGraph(env)
    cells = graph.cells
    if cfg.num_agents > cells.size:
        raise TooManyAgentsError(f'{cfg.num_agents} agents do not fit on {cells.size} traversable tiles')

    rng = np.random.default_rng(cfg.seed)
    assigner = TaskAssigner(env, cfg)
    starts = rng.choice(cells, size=cfg.num_agents, replace=False)
    agents = [AgentState(int(s), assigner.first_phase()) for s in starts]
    for agent in agents:
        _refill(agent, assigner, cfg.lookahead, rng)

    n = cfg.num_agents
    usage = np.zeros(env.size, dtype=np.int64)
    usage[starts] += 1
    finished = np.zeros(cfg.horizon, dtype=np.int64)
    trajectory = [starts.copy()] if cfg.record_paths else None
    congested = False
    t = 0

    while t < cfg.horizon:
        requests = [PlanRequest(a.position, list(a.goals), a.dwell_left) for a in agents]
        paths, failed = plan_window(graph, requests, cfg.window, rng, cfg.max_expansions)
        if any(failed):
            logger.debug(f't={t}: {sum(failed)} agent(s) could not plan and wait')

        stop = False
        for step in range(1, min(cfg.replan_period, cfg.horizon - t) + 1):
            waits = 0
            for agent, path in zip(agents, paths):
                if path[step] == path[step - 1] and (cfg.count_dwell_as_wait or agent.dwell_left == 0):
                    waits += 1
            if waits * 2 > n:
                congested = True
                if cfg.stop_on_congestion:
                    logger.debug(f'Congestion at t={t}: {waits} of {n} agents wait')
                    stop = True
                    break

            done = 0
            for agent, path in zip(agents, paths):
                agent.position = path[step]
                if agent.dwell_left:
                    agent.dwell_left -= 1
                    if not agent.dwell_left:
                        agent.finished += 1
                        done += 1
                elif agent.position == agent.goal.cell:
                    task = agent.goals.pop(0)
                    if task.dwell:
                        agent.dwell_left = task.dwell
                    else:
                        agent.finished += 1
                        done += 1
                    _refill(agent, assigner, cfg.lookahead, rng)
            positions = np.fromiter((a.position for a in agents), dtype=np.int64, count=n)
            usage[positions] += 1
            finished[t] = done
            if trajectory is not None:
                trajectory.append(positions)
            t += 1
        if stop:
            break

    elapsed = t
    per_step = finished[:elapsed]
    throughput = float(per_step.sum() / elapsed) if elapsed else 0.0
    return SimResult(
        throughput=throughput,
        congested=congested,
        finished_per_timestep=per_step,
        tile_usage=usage.reshape(env.tiles.shape),
        elapsed=elapsed,
        agent_finished=np.array([a.finished for a in agents], dtype=np.int64),
        trajectories=np.stack(trajectory) if trajectory is not None else None,
    )


@dataclass(frozen=True)
class Conflict:
    kind: str
    t: int
    agents: tuple
    cell: int


def find_conflicts(trajectories: np.ndarray, env: Environment) -> List[Conflict]:
    """Vertex, swap and blocked-tile violations in executed trajectories [t, agent] of flat cells"""
    traversable = env.traversable.ravel()
    out = []
    for t, row in enumerate(trajectories):
        for a in np.flatnonzero(~traversable[row]):
            out.append(Conflict('blocked', t, (int(a),), int(row[a])))
        cells, counts = np.unique(row, return_counts=True)
        for cell, count in zip(cells[counts > 1], counts[counts > 1]):
            agents = tuple(int(a) for a in np.flatnonzero(row == cell))
            out.append(Conflict('vertex', t, agents, int(cell)))
        if t == 0:
            continue
        prev = trajectories[t - 1]
        moved = np.flatnonzero(prev != row)
        where = {int(prev[a]): int(a) for a in moved}
        for a in moved:
            b = where.get(int(row[a]))
            if b is not None and b > a and prev[a] == row[b]:
                out.append(Conflict('swap', t, (int(a), b), int(row[a])))
        # a unit-speed grid move also has to be a 4-neighbour step
        w = env.width
        for a in moved:
            (r0, c0), (r1, c1) = divmod(int(prev[a]), w), divmod(int(row[a]), w)
            if abs(r0 - r1) + abs(c0 - c1) != 1:
                out.append(Conflict('jump', t, (int(a),), int(row[a])))
    return out


@dataclass(frozen=True)
class RunSummary:
    runs: int
    success_rate: float
    mean_throughput: float
    sem_throughput: float


def summarize(results: Sequence[SimResult]) -> RunSummary:
    """Success rate over all runs; throughput statistics over the runs that did not congest"""
    if not results:
        return RunSummary(0, 0.0, 0.0, 0.0)
    ok = np.array([r.throughput for r in results if not r.congested], dtype=np.float64)
    success = ok.size / len(results)
    if ok.size == 0:
        return RunSummary(len(results), 0.0, 0.0, 0.0)
    sem = float(stats.sem(ok)) if ok.size > 1 else 0.0
    return RunSummary(len(results), success, float(ok.mean()), sem)


@dataclass(frozen=True)
class SweepResult:
    agent_counts: tuple
    summaries: tuple
    max_scalability: int


def agent_sweep(env: Environment, cfg: SimConfig, agent_counts: Sequence[int], n_runs: int) -> SweepResult:
    """Throughput over agent counts; the maximum scalability is the count with the highest mean throughput"""
    summaries = []
    for count in agent_counts:
        results = [run_simulation(env, replace(cfg, num_agents=int(count), seed=cfg.seed + i)) for i in range(n_runs)]
        summary = summarize(results)
        logger.info(
            f'{count} agents: throughput {summary.mean_throughput:.3f} +- {summary.sem_throughput:.3f}, '
            f'success {summary.success_rate:.0%}'
        )
        summaries.append(summary)
    best = max(range(len(summaries)), key=lambda i: (summaries[i].mean_throughput, -i)) if summaries else None
    return SweepResult(tuple(int(c) for c in agent_counts), tuple(summaries), int(agent_counts[best]) if summaries else 0)

from .config import SimConfig
from .graph import UNREACHABLE, GridGraph
from .tasks import Phase, Task, TaskAssigner, assign_task
from .planner import PlanRequest, ReservationTable, plan_agent, plan_window
from .simulator import (
    AgentState,
    Conflict,
    RunSummary,
    SimResult,
    SweepResult,
    agent_sweep,
    find_conflicts,
    run_simulation,
    summarize,
)
from .maze import MazeMetrics, horizon_bound, maze_metrics
from .evaluate import DEFAULT_MEASURES, MEASURES, Evaluation, compute_measures, evaluate, measure_names

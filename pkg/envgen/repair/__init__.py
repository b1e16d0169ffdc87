import logging
import time

from typing import Optional

import numpy as np

from envgen.core import Domain, Environment, SimilarityWeights, similarity, validate
from envgen.errors import InfeasibleRepairError, RepairBudgetExhausted
from .base import RepairBudget, RepairResult, RepairRules, SolveRequest, SolverBackend, WorkMeter
from .exact import ExhaustiveBackend
from .heuristic import HeuristicBackend, heuristic_repair_manufacturing, heuristic_repair_warehouse

logger = logging.getLogger(__name__)


def check_feasible(x_in: Environment, rules: RepairRules):
    storage = int((~x_in.frozen_mask).sum())
    n = rules.n_obstacles
    if n is not None and (n < 0 or (n and n >= storage)):
        # every shelf needs at least one endpoint inside the storage area
        raise InfeasibleRepairError(f'{n} shelves do not fit into {storage} storage tiles')
    if rules.required_types and storage < len(rules.required_types) + 1:
        raise InfeasibleRepairError(
            f'{x_in.width}x{x_in.height} is too small for one of each workstation type plus an endpoint'
        )


def repair(
    x_in: Environment,
    budget: Optional[RepairBudget] = None,
    rng=None,
    n_shelves: Optional[int] = None,
    spacing: int = 3,
    backend: Optional[SolverBackend] = None,
) -> RepairResult:
    """
    Valid environment closest to ``x_in`` under the similarity weights. Small editable areas
    are solved exactly, larger ones with the phased heuristic, unless a backend is given.
    """
    start = time.perf_counter()
    budget = budget or RepairBudget()
    weights = SimilarityWeights.for_environment(x_in)

    if x_in.domain is Domain.MAZE:
        return RepairResult(x_in, 1.0, 0, 'identity', 0, time.perf_counter() - start)

    rules = RepairRules.for_environment(x_in, n_shelves, spacing)
    check_feasible(x_in, rules)
    meter = WorkMeter(budget)
    free_cells = int((~x_in.frozen_mask).sum())

    if validate(x_in, n_shelves, spacing).is_valid:
        mode = 'exact' if free_cells <= budget.exact_threshold else 'heuristic'
        return RepairResult(x_in, 1.0, 1, mode, 0, time.perf_counter() - start)

    if backend is None:
        backend = ExhaustiveBackend() if free_cells <= budget.exact_threshold else HeuristicBackend()
    request = SolveRequest(x_in, weights, rules, np.random.default_rng(rng), meter)
    try:
        env = backend.solve(request)
    except RepairBudgetExhausted:
        if backend.name != 'exact':
            raise
        logger.warning(f'Exact repair of {x_in!r} ran out of budget, falling back to the heuristic')
        request.meter = meter = WorkMeter(budget)
        backend = HeuristicBackend()
        env = backend.solve(request)

    report = validate(env, n_shelves, spacing)
    if not report.is_valid:
        raise RepairBudgetExhausted(f'{backend.name} backend returned an invalid environment: {report}')
    changed = int((env.tiles != x_in.tiles).sum())
    result = RepairResult(env, similarity(x_in, env, weights), meter.used, backend.name, changed, time.perf_counter() - start)
    logger.debug(f'Repaired {x_in!r} -> {env!r}: {result.report()}')
    return result

"""
Phased local repair.

The obstacle set (shelves, or the three station types) fixes everything that matters for
connectivity; endpoints are derived from it afterwards. The phases are:

  1. carve min-cost corridors until the non-obstacle tiles form one component
  2. carve towards obstacles that have no editable free neighbour left
  3. fix the obstacle count and the required station types with safe adds and removals
  4. derive endpoints, keeping input endpoints wherever they still touch an obstacle
  5. hill-climb obstacle moves back towards the input while the budget lasts
"""
import logging

from typing import Optional

import numpy as np

from envgen.core import Environment, SimilarityWeights, validate, weighted_distance
from envgen.core.validity import neighbour_any
from envgen.errors import RepairBudgetExhausted
from .base import RepairBudget, RepairRules, SolveRequest, WorkMeter
from .grid import carve_path, components, is_connected, lexsort_cells, locally_removable, main_component, rank_keys

logger = logging.getLogger(__name__)


class _State:
    """Mutable working copy of the tiles plus the input it is compared against"""

    def __init__(self, request: SolveRequest):
        self.x_in = request.x_in
        self.rules = request.rules
        self.similarity = request.weights
        self.weights = request.weights.weights
        self.meter = request.meter
        self.editable = ~request.x_in.frozen_mask
        self.tiles = request.x_in.tiles.copy()
        self.rank = rank_keys(request.rng, self.tiles.size).reshape(self.tiles.shape)

    @property
    def obstacles(self) -> np.ndarray:
        return np.isin(self.tiles, self.rules.obstacles)

    @property
    def free(self) -> np.ndarray:
        return ~self.obstacles

    def set(self, flat: int, value: int):
        self.tiles.flat[flat] = value
        self.meter.charge()

    def change_cost(self, value: int) -> np.ndarray:
        """Per-cell cost of holding ``value`` relative to the input"""
        return np.where(self.x_in.tiles == value, 0.0, self.weights)


def _carve(state: _State, path, what: str):
    carved = [i for i in path if state.obstacles.flat[i]]
    for i in carved:
        state.set(i, 0)
    logger.debug(f'Carved {len(carved)} tiles for {what}')


def _enter_cost(state: _State) -> np.ndarray:
    cost = np.where(state.obstacles, state.weights, 0.0)
    return np.where(state.obstacles & ~state.editable, np.inf, cost)


def connect(state: _State):
    """Phase 1: one component of free tiles"""
    if not state.free.any():
        cells = np.flatnonzero(state.editable)
        cheapest = lexsort_cells(cells, state.weights.ravel(), state.rank.ravel())[0]
        state.set(cheapest, 0)

    while True:
        state.meter.require('connectivity repair')
        labels, count = components(state.free)
        if count <= 1:
            return
        main = main_component(labels, count)
        sizes = np.bincount(labels.ravel(), minlength=count + 1)
        strays = sorted((lbl for lbl in range(1, count + 1) if lbl != main), key=lambda lbl: (-sizes[lbl], lbl))
        stray = strays[0]
        path = carve_path(state.obstacles, _enter_cost(state), labels == stray, labels == main)
        if path is None:
            raise RepairBudgetExhausted('Free tiles cannot be connected without touching the frozen area')
        _carve(state, path, f'component {stray}')


def _enclosed(state: _State) -> np.ndarray:
    """Obstacles without an editable free neighbour to host an endpoint"""
    return state.obstacles & ~neighbour_any(state.free & state.editable)


def open_enclosed(state: _State):
    """Phase 2: every obstacle gets an editable free neighbour"""
    while True:
        state.meter.require('enclosed obstacle repair')
        enclosed = _enclosed(state)
        if not enclosed.any():
            return
        target = lexsort_cells(np.flatnonzero(enclosed), state.rank.ravel())[0]
        cell = np.zeros(state.tiles.size, dtype=bool)
        cell[target] = True
        ring = neighbour_any(cell.reshape(state.tiles.shape)) & state.editable
        if not ring.any():
            # no editable neighbour at all, the obstacle cannot stay
            _carve(state, [target], 'isolated obstacle')
            continue
        path = carve_path(state.obstacles, _enter_cost(state), state.free, ring)
        if path is None:
            _carve(state, [target], 'unreachable obstacle')
            continue
        _carve(state, path, f'enclosed obstacle {target}')


def _can_add(state: _State, flat: int) -> bool:
    """Blocking ``flat`` keeps free tiles connected and every obstacle next to an editable free tile"""
    h, w = state.tiles.shape
    r, c = divmod(flat, w)
    free = state.free
    state.meter.charge()
    if not free[r, c] or not state.editable[r, c] or free.sum() <= 1:
        return False

    def around(rr, cc):
        return [(a, b) for a, b in ((rr - 1, cc), (rr + 1, cc), (rr, cc - 1), (rr, cc + 1)) if 0 <= a < h and 0 <= b < w]

    host = free & state.editable
    host[r, c] = False
    if not any(host[a, b] for a, b in around(r, c)):
        return False
    obstacles = state.obstacles
    for rr, cc in around(r, c):
        # must not take the last endpoint slot of a neighbouring obstacle
        if obstacles[rr, cc] and not any(host[a, b] for a, b in around(rr, cc)):
            return False

    if locally_removable(free, r, c):
        return True
    after = free.copy()
    after[r, c] = False
    state.meter.charge(4)
    return is_connected(after)


def _endpoint_support(state: _State) -> np.ndarray:
    """Cells next to an input endpoint that is still free, where a new obstacle costs no new endpoint"""
    kept = (state.x_in.tiles == state.rules.endpoint) & state.free & state.editable
    return neighbour_any(kept)


def _add_obstacles(state: _State, value: int, n: int, what: str) -> int:
    added = 0
    support = _endpoint_support(state)
    candidates = np.flatnonzero(state.free & state.editable)
    order = lexsort_cells(candidates, state.change_cost(value).ravel(), (~support).ravel(), state.rank.ravel())
    for flat in order:
        if added == n:
            break
        state.meter.require(what)
        if _can_add(state, flat):
            state.set(flat, value)
            added += 1
    return added


def fix_counts(state: _State):
    """Phase 3: obstacle count and required station types"""
    rules = state.rules
    if rules.n_obstacles is not None:
        current = int(state.obstacles.sum())
        if current > rules.n_obstacles:
            covered = neighbour_any(state.x_in.tiles == rules.endpoint)
            removal = np.where(np.isin(state.x_in.tiles, rules.obstacles), state.weights, 0.0)
            cells = np.flatnonzero(state.obstacles & state.editable)
            # removing an obstacle only adds a free tile next to existing free tiles
            for flat in lexsort_cells(cells, removal.ravel(), covered.ravel(), state.rank.ravel())[
                : current - rules.n_obstacles
            ]:
                state.set(flat, 0)
        elif current < rules.n_obstacles:
            missing = rules.n_obstacles - current
            added = _add_obstacles(state, rules.obstacles[0], missing, 'shelf placement')
            if added < missing:
                raise RepairBudgetExhausted(f'Placed only {added} of {missing} missing shelves')

    for value in rules.required_types:
        if (state.tiles == value).any():
            continue
        counts = {v: int((state.tiles == v).sum()) for v in rules.obstacles}
        spare = np.isin(state.tiles, [v for v, k in counts.items() if k >= 2])
        cost = state.change_cost(value)
        best_convert = lexsort_cells(np.flatnonzero(spare), cost.ravel(), state.rank.ravel())
        convert_cost = cost.flat[best_convert[0]] if best_convert else np.inf

        support = _endpoint_support(state)
        adds = lexsort_cells(np.flatnonzero(state.free & state.editable), cost.ravel(), (~support).ravel(), state.rank.ravel())
        placed = False
        for flat in adds:
            if cost.flat[flat] > convert_cost:
                break
            state.meter.require('station placement')
            if _can_add(state, flat):
                state.set(flat, value)
                placed = True
                break
        if not placed:
            if not best_convert:
                raise RepairBudgetExhausted(f'No position for a {state.x_in.domain.tiles(value).name} station')
            state.set(best_convert[0], value)


def derive_endpoints(state: _State, tiles: Optional[np.ndarray] = None) -> np.ndarray:
    """Phase 4: endpoints exactly where they touch an obstacle, covering every obstacle"""
    rules = state.rules
    tiles = state.tiles if tiles is None else tiles
    obstacles = np.isin(tiles, rules.obstacles)
    editable_free = state.editable & ~obstacles

    out = np.where(obstacles | ~state.editable, tiles, 0).astype(np.uint8)
    kept = editable_free & (state.x_in.tiles == rules.endpoint) & neighbour_any(obstacles)
    out[kept] = rules.endpoint

    uncovered = obstacles & ~neighbour_any(kept)
    cost = np.where(state.x_in.tiles == rules.endpoint, 0.0, state.weights)
    chosen = kept.copy()
    while uncovered.any():
        state.meter.charge()
        u = uncovered.astype(np.int32)
        gain = np.zeros_like(u)
        gain[1:, :] += u[:-1, :]
        gain[:-1, :] += u[1:, :]
        gain[:, 1:] += u[:, :-1]
        gain[:, :-1] += u[:, 1:]
        candidates = np.flatnonzero((editable_free & ~chosen & (gain > 0)).ravel())
        if candidates.size == 0:
            raise RepairBudgetExhausted('An obstacle has no free neighbour for an endpoint')
        flat = lexsort_cells(candidates, -gain.ravel(), cost.ravel(), state.rank.ravel())[0]
        chosen.flat[flat] = True
        out.flat[flat] = rules.endpoint
        uncovered &= ~neighbour_any(chosen)
    return out


def _candidate(state: _State, tiles: np.ndarray) -> Environment:
    return state.x_in.with_tiles(derive_endpoints(state, tiles))


def hill_climb(state: _State, env: Environment) -> Environment:
    """Phase 5: first-improvement obstacle moves back towards the input"""
    rules = state.rules
    best = weighted_distance(state.x_in, env, state.similarity)
    x = state.x_in.tiles
    in_obst = np.isin(x, rules.obstacles) & state.editable

    improved = True
    while improved and not state.meter.exhausted:
        improved = False
        tiles = env.tiles
        cur_obst = np.isin(tiles, rules.obstacles)
        removals = np.flatnonzero((cur_obst & ~in_obst).ravel())
        adds = np.flatnonzero((in_obst & ~cur_obst).ravel())
        retypes = np.flatnonzero((cur_obst & in_obst & (tiles != x)).ravel())

        moves = []
        if rules.n_obstacles is not None:
            moves.extend(((r, 0), (a, int(x.flat[a]))) for r in removals for a in adds)
        else:
            moves.extend(((r, 0),) for r in removals)
            moves.extend(((a, int(x.flat[a])),) for a in adds)
        moves.extend(((t, int(x.flat[t])),) for t in retypes)

        for move in moves:
            if state.meter.exhausted:
                break
            trial = tiles.copy()
            for flat, value in move:
                trial.flat[flat] = value
            state.meter.charge()
            try:
                candidate = _candidate(state, trial)
            except RepairBudgetExhausted:
                # the move walls in an obstacle, so no endpoint can reach it
                continue
            cost = weighted_distance(state.x_in, candidate, state.similarity)
            if cost >= best - 1e-12:
                continue
            if validate(candidate, rules.n_obstacles, rules.spacing).is_valid:
                env, best, improved = candidate, cost, True
                break
    return env


class HeuristicBackend:
    name = 'heuristic'

    def solve(self, request: SolveRequest) -> Environment:
        state = _State(request)
        connect(state)
        open_enclosed(state)
        fix_counts(state)
        state.tiles = derive_endpoints(state)

        env = request.x_in.with_tiles(state.tiles)
        report = validate(env, request.rules.n_obstacles, request.rules.spacing)
        if not report.is_valid:
            raise RepairBudgetExhausted(f'Heuristic repair ended with violations: {report}')
        logger.debug(f'Heuristic phases valid after {state.meter.used} work units')
        return hill_climb(state, env)


def heuristic_repair_warehouse(x_in: Environment, n_shelves: int, budget: RepairBudget, rng) -> Environment:
    request = SolveRequest(
        x_in, SimilarityWeights.for_environment(x_in), RepairRules.for_environment(x_in, n_shelves), rng, WorkMeter(budget)
    )
    return HeuristicBackend().solve(request)


def heuristic_repair_manufacturing(x_in: Environment, budget: RepairBudget, rng) -> Environment:
    request = SolveRequest(
        x_in, SimilarityWeights.for_environment(x_in), RepairRules.for_environment(x_in), rng, WorkMeter(budget)
    )
    return HeuristicBackend().solve(request)

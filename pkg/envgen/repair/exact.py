import itertools
import logging

import numpy as np

from envgen.core import Environment, validate
from envgen.errors import InfeasibleRepairError, RepairBudgetExhausted
from .base import SolveRequest

logger = logging.getLogger(__name__)


class ExhaustiveBackend:
    """
    Exact minimum of the weighted hamming distance for small editable areas.

    Change-sets are enumerated by size. A set is only validated when its cost does not
    exceed the best cost found so far, and enumeration stops once ``size * min_weight``
    exceeds it. Equal-cost optima are ordered by their row-major tile sequence.
    """

    name = 'exact'

    def solve(self, request: SolveRequest) -> Environment:
        x_in, rules, meter = request.x_in, request.rules, request.meter
        weights = request.weights.weights.ravel()
        base = x_in.tiles.ravel()
        cells = np.flatnonzero(~x_in.frozen_mask.ravel())
        min_w = float(weights[cells].min()) if cells.size else 1.0
        values = rules.storage_values

        best_key, best_env = None, None
        for size in range(len(cells) + 1):
            if best_key is not None and size * min_w > best_key[0]:
                break
            for chosen in itertools.combinations(cells.tolist(), size):
                cost = float(weights[list(chosen)].sum())
                if best_key is not None and cost > best_key[0]:
                    continue
                options = [[v for v in values if v != base[c]] for c in chosen]
                for assignment in itertools.product(*options):
                    meter.charge()
                    if meter.exhausted:
                        raise RepairBudgetExhausted(f'Exhaustive repair ran out after {meter.used} work units')
                    tiles = base.copy()
                    tiles[list(chosen)] = assignment
                    key = (cost, tuple(tiles.tolist()))
                    if best_key is not None and key >= best_key:
                        continue
                    env = x_in.with_tiles(tiles.reshape(x_in.tiles.shape))
                    if validate(env, rules.n_obstacles, rules.spacing).is_valid:
                        best_key, best_env = key, env

        if best_env is None:
            raise InfeasibleRepairError(f'No valid {x_in.domain.value} environment exists for {x_in!r}')
        logger.debug(f'Exact repair: distance {best_key[0]} after {meter.used} candidates')
        return best_env

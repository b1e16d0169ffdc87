import logging

from dataclasses import asdict
from pathlib import Path

import numpy as np

from envgen.core import Domain, read_environment
from envgen.main import Command
from envgen.render import render_tile_usage
from envgen.sim import SimConfig, maze_metrics, run_simulation, summarize
from envgen.state_file import dump_json

logger = logging.getLogger(__name__)


class Simulate(Command):
    name = 'simulate'
    help = 'Run lifelong simulations (or the maze oracle) on an environment file'

    def add_arguments(self, parser):
        parser.add_argument('environment', help='Environment text file')
        parser.add_argument('--agents', type=int, help='Number of agents (default eval_num_agents)')
        parser.add_argument('--horizon', type=int, help='Timesteps (default eval_horizon)')
        parser.add_argument('--runs', type=int, help='Simulations (default n_sims)')
        parser.add_argument('--seed', type=int, default=0, help='Seed of the first run')
        parser.add_argument('-o', '--out', help='Result file (.json)')
        parser.add_argument('--usage-image', dest='usage_image', help='Tile usage heatmap (.png)')
        parser.add_argument('--usage-grid', dest='usage_grid', help='Tile usage counts (.csv)')

    def run(self, args) -> int:
        cfg = self.app.experiment
        env = read_environment(args.environment)
        out = Path(args.out) if args.out else Path(args.environment).with_suffix('.sim.json')

        if env.domain is Domain.MAZE:
            metrics = maze_metrics(env)
            dump_json(out, asdict(metrics))
            logger.info(f'{env!r}: {asdict(metrics)}')
            return 0

        base = SimConfig.from_config(
            cfg.section('sim'),
            num_agents=args.agents or cfg.eval_num_agents,
            horizon=args.horizon or cfg.eval_horizon,
            seed=args.seed,
        )
        runs = args.runs or cfg.n_sims
        results = [run_simulation(env, base.with_seed(args.seed + i)) for i in range(runs)]
        summary = summarize(results)
        usage = np.sum([r.tile_usage for r in results], axis=0)

        dump_json(
            out,
            {
                'summary': asdict(summary),
                'runs': [
                    {**r.summary(), 'seed': args.seed + i, 'finished_per_timestep': r.finished_per_timestep}
                    for i, r in enumerate(results)
                ],
                'tile_usage': usage,
            },
        )
        if args.usage_grid:
            Path(args.usage_grid).parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(args.usage_grid, usage, fmt='%d', delimiter=',')
        if args.usage_image:
            render_tile_usage(usage, args.usage_image, self.app.config.get('render', {}).get('cell_size', 10), env)
        logger.info(
            f'{env!r} with {base.num_agents} agents: throughput {summary.mean_throughput:.3f} '
            f'+- {summary.sem_throughput:.3f}, success {summary.success_rate:.0%}'
        )
        return 0


def setup(app):
    app.add_command(Simulate(app))

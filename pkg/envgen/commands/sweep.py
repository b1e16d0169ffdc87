import logging

from dataclasses import asdict
from pathlib import Path

from envgen.core import read_environment
from envgen.main import Command
from envgen.sim import SimConfig, agent_sweep
from envgen.state_file import dump_json

logger = logging.getLogger(__name__)


class Sweep(Command):
    name = 'sweep'
    help = 'Throughput over an increasing number of agents'

    def add_arguments(self, parser):
        parser.add_argument('environment', help='Environment text file')
        parser.add_argument('--agents', nargs=3, type=int, required=True, metavar=('START', 'STOP', 'STEP'))
        parser.add_argument('--runs', type=int, default=10, help='Simulations per agent count')
        parser.add_argument('--horizon', type=int, help='Timesteps (default eval_horizon)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('-o', '--out', help='Result file (.json)')

    def run(self, args) -> int:
        cfg = self.app.experiment
        env = read_environment(args.environment)
        start, stop, step = args.agents
        counts = list(range(start, stop + 1, step))
        base = SimConfig.from_config(
            cfg.section('sim'), num_agents=counts[0], horizon=args.horizon or cfg.eval_horizon, seed=args.seed
        )
        result = agent_sweep(env, base, counts, args.runs)
        out = Path(args.out) if args.out else Path(args.environment).with_suffix('.sweep.json')
        dump_json(
            out,
            {
                'agent_counts': result.agent_counts,
                'summaries': [asdict(s) for s in result.summaries],
                'max_scalability': result.max_scalability,
            },
        )
        logger.info(f'Peak mean throughput at {result.max_scalability} agents, written to {out}')
        return 0


def setup(app):
    app.add_command(Sweep(app))

import logging

from pathlib import Path

import numpy as np

from envgen.core import read_environment, write_environment
from envgen.main import Command
from envgen.repair import RepairBudget, repair
from envgen.state_file import dump_json

logger = logging.getLogger(__name__)


class Repair(Command):
    name = 'repair'
    help = 'Repair an environment file into the closest valid environment'

    def add_arguments(self, parser):
        parser.add_argument('environment', help='Environment text file')
        parser.add_argument('--n-shelves', dest='n_shelves', type=int, help='Required shelf count (warehouses)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('-o', '--out', help='Repaired environment file')

    def run(self, args) -> int:
        repair_config = self.app.config.get('repair', {})
        spacing = self.app.config.get('experiment', {}).get('workstation_spacing', 3)
        x_in = read_environment(args.environment)
        result = repair(
            x_in,
            RepairBudget.from_config(repair_config),
            rng=np.random.default_rng(args.seed),
            n_shelves=args.n_shelves,
            spacing=spacing,
        )
        out = Path(args.out) if args.out else Path(args.environment).with_suffix('.repaired.txt')
        write_environment(result.env, out, comment='repaired')
        dump_json(out.with_suffix('.json'), result.report())
        logger.info(f'Wrote {out}: {result.report()}')
        return 0


def setup(app):
    app.add_command(Repair(app))

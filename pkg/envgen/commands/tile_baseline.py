import logging

from pathlib import Path

from envgen.core import read_environment, write_environment
from envgen.main import Command
from envgen.pipeline import tile_baseline
from envgen.repair import RepairBudget
from envgen.state_file import dump_json

logger = logging.getLogger(__name__)


class TileBaseline(Command):
    name = 'tile-baseline'
    help = 'Tile a small environment up to a larger size and repair it once'

    def add_arguments(self, parser):
        parser.add_argument('environment', help='Environment text file to tile')
        parser.add_argument('--size', nargs=2, type=int, metavar=('W', 'H'), help='Target size (default eval_size)')
        parser.add_argument('--n-shelves', dest='n_shelves', type=int, help='Shelf count (default eval_n_shelves)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('-o', '--out', help='Environment file to write')

    def run(self, args) -> int:
        cfg = self.app.experiment
        env = read_environment(args.environment)
        size = tuple(args.size) if args.size else cfg.eval_size
        tiled, result = tile_baseline(
            env,
            size,
            RepairBudget.from_config(cfg.section('repair')),
            n_shelves=args.n_shelves if args.n_shelves is not None else cfg.eval_n_shelves,
            spacing=cfg.spacing,
            seed=args.seed,
        )
        out = Path(args.out) if args.out else cfg.output_dir / f'tiled_{size[0]}x{size[1]}.txt'
        write_environment(result.env, out, comment='tiled and repaired')
        dump_json(out.with_suffix('.json'), result.report())
        logger.info(f'Wrote {out}: {result.report()}')
        return 0


def setup(app):
    app.add_command(TileBaseline(app))

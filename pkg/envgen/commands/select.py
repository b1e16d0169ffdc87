import logging

from pathlib import Path

from envgen.main import Command
from envgen.nca import save_generator
from envgen.pipeline import SELECTION_CRITERIA, EvalContext, select_elite
from envgen.qd import load_archive

logger = logging.getLogger(__name__)


class Select(Command):
    name = 'select'
    help = 'Pick a generator from a result archive'

    def add_arguments(self, parser):
        parser.add_argument('archive', help='Archive stem (the .pkl/.csv pair)')
        parser.add_argument('-c', '--criterion', choices=SELECTION_CRITERIA, default='global')
        parser.add_argument('--measure', type=int, default=0, help='Measure the window applies to')
        parser.add_argument('--window', nargs=2, type=float, metavar=('LO', 'HI'))
        parser.add_argument('--cell', nargs='+', type=int, help='Archive cell indices')
        parser.add_argument('-o', '--out', help='Generator file to write (.npz)')

    def run(self, args) -> int:
        archive = load_archive(Path(args.archive).with_suffix(''))
        elite = select_elite(archive, args.criterion, args.measure, args.window, args.cell)
        ctx = EvalContext.from_experiment(self.app.experiment)
        gen = ctx.generator(elite.solution, seed=elite.metadata['eval_seed'])
        out = Path(args.out) if args.out else Path(args.archive).with_name(f'generator_{elite.index}.npz')
        save_generator(gen, out)
        logger.info(f'Selected cell {elite.cell} (objective {elite.objective:.4f}, measures {elite.measures}) -> {out}')
        return 0


def setup(app):
    app.add_command(Select(app))

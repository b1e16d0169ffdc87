import logging

from envgen.main import Command
from envgen.pipeline import train

logger = logging.getLogger(__name__)


class Train(Command):
    name = 'train'
    help = 'Train NCA generators with quality diversity optimization'

    def add_arguments(self, parser):
        parser.add_argument('-o', '--output-dir', dest='output_dir', help='Run directory (default runtime.output_dir)')
        parser.add_argument('--fresh', action='store_true', help='Refuse to continue an existing run')

    def run(self, args) -> int:
        cfg = self.app.experiment
        result = train(cfg, args.output_dir, resume=not args.fresh)
        metrics = result.scheduler.metrics()
        logger.info(
            f'Finished after {result.evaluations} evaluations in {result.generations} generations: '
            f'best {metrics["best"]:.4f}, {metrics["elites"]} elites, results in {result.output_dir}'
        )
        return 0


def setup(app):
    app.add_command(Train(app))

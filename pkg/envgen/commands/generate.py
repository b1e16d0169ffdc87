import logging

from pathlib import Path

from envgen.core import write_environment
from envgen.main import Command
from envgen.pipeline import scale_generate
from envgen.repair import RepairBudget
from envgen.sim import evaluate
from envgen.state_file import dump_json

logger = logging.getLogger(__name__)


class Generate(Command):
    name = 'generate'
    help = 'Run a trained generator at a (larger) size and repair the result once'

    def add_arguments(self, parser):
        parser.add_argument('generator', help='Generator file (.npz)')
        parser.add_argument('--size', nargs=2, type=int, metavar=('W', 'H'), help='Target size (default eval_size)')
        parser.add_argument('--iterations', type=int, help='NCA iterations (default eval_iterations)')
        parser.add_argument('--n-shelves', dest='n_shelves', type=int, help='Shelf count (default eval_n_shelves)')
        parser.add_argument('--seed', type=int, help='Repair and simulation seed (default: the generator seed)')
        parser.add_argument('-o', '--out', help='Environment file to write')
        parser.add_argument('--unrepaired', help='Also write the unrepaired environment here')
        parser.add_argument('--evaluate', action='store_true', help='Simulate the result with the eval settings')

    def run(self, args) -> int:
        cfg = self.app.experiment
        size = tuple(args.size) if args.size else cfg.eval_size
        report = scale_generate(
            args.generator,
            size,
            args.iterations if args.iterations is not None else cfg.eval_iterations,
            RepairBudget.from_config(cfg.section('repair')),
            n_shelves=args.n_shelves if args.n_shelves is not None else cfg.eval_n_shelves,
            spacing=cfg.spacing,
            domain=cfg.domain,
            seed=args.seed,
        )
        out = Path(args.out) if args.out else cfg.output_dir / f'generated_{size[0]}x{size[1]}.txt'
        write_environment(report.env, out, comment='repaired')
        if args.unrepaired:
            write_environment(report.unrepaired, args.unrepaired, comment='unrepaired')

        summary = report.summary()
        if args.evaluate:
            ev = evaluate(
                report.env,
                cfg.section('sim'),
                cfg.n_sims,
                horizon=cfg.eval_horizon,
                base_seed=report.seed,
                num_agents=cfg.eval_num_agents,
                measures=cfg.measures,
            )
            summary.update(objective=ev.objective, measures=ev.measures, success_rate=ev.success_rate)
        dump_json(out.with_suffix('.json'), summary)
        logger.info(f'Wrote {out}: {summary}')
        return 0


def setup(app):
    app.add_command(Generate(app))

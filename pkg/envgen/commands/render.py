import logging

from pathlib import Path

import numpy as np

from envgen.core import read_environment
from envgen.main import Command
from envgen.nca import generate, load_generator, make_seed
from envgen.pipeline import generation_shape
from envgen.qd import load_archive
from envgen.render import render_archive, render_environment, render_tile_usage, render_trace
from envgen.sim import measure_names

logger = logging.getLogger(__name__)

KINDS = ('environment', 'archive', 'usage', 'trace')


class Render(Command):
    name = 'render'
    help = 'Draw an environment, an archive heatmap, a tile-usage grid or a generation trace'

    def add_arguments(self, parser):
        parser.add_argument('input', help='Environment file, archive stem, usage grid (.csv) or generator (.npz)')
        parser.add_argument('-k', '--kind', choices=KINDS, default='environment')
        parser.add_argument('-o', '--out', help='Image to write (.png)')
        parser.add_argument('--size', nargs=2, type=int, metavar=('W', 'H'), help='Trace size (default train size)')
        parser.add_argument('--iterations', type=int, help='Trace iterations (default train iterations)')
        parser.add_argument('--environment', help='Environment drawn under a usage grid')

    def run(self, args) -> int:
        cell_size = self.app.config.get('render', {}).get('cell_size', 10)
        src = Path(args.input)
        out = Path(args.out) if args.out else src.with_suffix(f'.{args.kind}.png')

        if args.kind == 'environment':
            render_environment(read_environment(src), out, cell_size)
        elif args.kind == 'archive':
            archive = load_archive(src.with_suffix(''))
            domain = self.app.experiment.domain
            names = measure_names(domain, self.app.experiment.measures)
            render_archive(archive, out, labels=names)
        elif args.kind == 'usage':
            usage = np.loadtxt(src, delimiter=',', ndmin=2)
            env = read_environment(args.environment) if args.environment else None
            render_tile_usage(usage, out, cell_size, env)
        else:
            cfg = self.app.experiment
            gen = load_generator(src)
            size = tuple(args.size) if args.size else cfg.size
            width, height = generation_shape(gen.domain, size)
            seed = make_seed(gen.domain, width, height, cfg.spacing)
            _, frames = generate(gen, seed, args.iterations or cfg.iterations, trace=True)
            render_trace(frames, out)
        logger.info(f'Rendered {src} ({args.kind}) to {out}')
        return 0


def setup(app):
    app.add_command(Render(app))

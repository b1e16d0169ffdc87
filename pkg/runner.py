import argparse
import contextlib
import logging
import sys

from logging.handlers import TimedRotatingFileHandler

from envgen import __version__, __codename__
from envgen.errors import EnvGenError
from envgen.main import EnvGen

_log_dt_fmt = '%Y-%m-%d %H:%M:%S'
_log_fmt = '[{asctime}] [{levelname}] {name}: {message}'
logging.basicConfig(format=_log_fmt, datefmt=_log_dt_fmt, style='{', level=logging.INFO)
logger = logging.getLogger('runner')


@contextlib.contextmanager
def setup_logging(logfile=None, debug=False):
    log = logging.getLogger()
    try:
        logging.getLogger('matplotlib').setLevel(logging.WARNING)
        logging.getLogger('PIL').setLevel(logging.WARNING)

        log.setLevel(logging.INFO if not debug else logging.DEBUG)
        if logfile:
            handler = TimedRotatingFileHandler(
                filename=logfile, when='midnight', utc=True, encoding='utf-8', backupCount=5
            )
            fmt = logging.Formatter(_log_fmt, _log_dt_fmt, style='{')
            handler.setFormatter(fmt)
            log.addHandler(handler)

        yield
    finally:
        handlers = log.handlers[:]
        for handler in handlers:
            handler.close()
            log.removeHandler(handler)


def build_parser(app: EnvGen) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Scalable environment generation with neural cellular automata')
    parser.add_argument('-v', '--debug', dest='debug', action='store_true', help='Set loglevel to debug')
    parser.add_argument('-l', '--logfile', dest='logfile', action='store', help='Logfile (optional)')
    parser.add_argument('-V', '--version', dest='version', action='store_true', help='Print version and exit')
    parser.add_argument('-c', '--config-file', dest='config_file', action='store', help='Configuration file')
    parser.add_argument('-p', '--preset', dest='preset', action='store', help='Preset name or file')
    parser.add_argument(
        '-s',
        '--set',
        dest='overrides',
        action='append',
        default=[],
        metavar='SECTION.KEY=VALUE',
        help='Override a configuration value (TOML literal), may be repeated',
    )
    app.add_parsers(parser.add_subparsers(dest='command', metavar='command'))
    return parser


if __name__ == '__main__':
    app = EnvGen()
    parser = build_parser(app)
    args = parser.parse_args()

    if args.version:
        print(f'envgen version: {__version__} - "{__codename__}"')
        sys.exit(0)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    with setup_logging(logfile=args.logfile, debug=args.debug):
        try:
            app.configure(args.config_file, args.overrides, args.preset)
            sys.exit(app.run(args))
        except EnvGenError as e:
            logger.error(f'{type(e).__name__}: {e}')
            sys.exit(1)

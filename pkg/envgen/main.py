import argparse
import importlib
import logging

from typing import Dict, Optional

from envgen.commands import commands as command_modules
from envgen.config import ExperimentConfig, load_config

logger = logging.getLogger(__name__)


class Command:
    """A subcommand; extensions subclass this and register an instance in their ``setup(app)``"""

    name = ''
    help = ''

    def __init__(self, app: 'EnvGen'):
        self.app = app

    def add_arguments(self, parser: argparse.ArgumentParser):
        pass

    def run(self, args) -> int:
        raise NotImplementedError


class EnvGen:
    def __init__(self):
        self.config: dict = {}
        self.commands: Dict[str, Command] = {}
        self._experiment: Optional[ExperimentConfig] = None

        for module in command_modules:
            logger.debug(f'Loading command extension: {module}')
            importlib.import_module('envgen.commands.' + module).setup(self)

    def add_command(self, command: Command):
        if command.name in self.commands:
            raise ValueError(f'Command "{command.name}" registered twice')
        self.commands[command.name] = command

    def add_parsers(self, subparsers):
        for name, command in self.commands.items():
            parser = subparsers.add_parser(name, help=command.help, description=command.help)
            command.add_arguments(parser)

    def configure(self, config_file=None, overrides=(), preset=None):
        self.config = load_config(config_file, overrides, preset)
        self._experiment = None

    @property
    def experiment(self) -> ExperimentConfig:
        if self._experiment is None:
            self._experiment = ExperimentConfig.from_dict(self.config)
        return self._experiment

    def run(self, args) -> int:
        command = self.commands[args.command]
        logger.debug(f'Running "{command.name}"')
        return command.run(args) or 0

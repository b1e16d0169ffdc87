import numpy as np
import pytest

from envgen.core import Environment, human_layout


def pytest_addoption(parser):
    parser.addoption('--acceptance', action='store_true', help='Run the desk-scale training checks')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--acceptance'):
        return
    skip = pytest.mark.skip(reason='needs --acceptance')
    for item in items:
        if 'acceptance' in item.keywords:
            item.add_marker(skip)


def env_from_rows(domain: str, rows):
    """Environment from text rows in the file format (header added here)"""
    header = f'{domain} {len(rows[0])} {len(rows)}'
    return Environment.from_text('\n'.join([header, *rows]))


@pytest.fixture
def make_env():
    return env_from_rows


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mini_warehouse():
    """Hand-built 16x12 warehouse with 24 shelves"""
    return human_layout('warehouse_even', 16, 12, n_shelves=24)


@pytest.fixture
def mini_manufacturing():
    return human_layout('manufacturing', 12, 12)


@pytest.fixture
def open_maze():
    """6x6 maze whose 4x4 interior is empty"""
    return env_from_rows('maze', ['######', '#....#', '#....#', '#....#', '#....#', '######'])

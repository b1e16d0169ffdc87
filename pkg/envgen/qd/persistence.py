import logging
import os
import pickle

from contextlib import contextmanager
from pathlib import Path
from typing import Union

from ribs.archives import GridArchive

from envgen.errors import FormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@contextmanager
def atomic_path(path: PathLike):
    """Yields a temporary sibling of ``path`` that replaces it once the block finishes"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _dump(obj, path: Path):
    with atomic_path(path) as tmp, open(tmp, 'wb') as f:
        pickle.dump(obj, f, protocol=pickle.HIGHEST_PROTOCOL)


def _load(path: Path, what: str):
    try:
        with open(path, 'rb') as f:
            return pickle.load(f)
    except (OSError, EOFError, pickle.UnpicklingError, AttributeError, ImportError) as e:
        raise FormatError(f'Cannot read {what} {path}: {e}') from None


def save_archive(archive: GridArchive, stem: PathLike):
    """Write ``<stem>.pkl`` (the archive) and ``<stem>.csv`` (one row per elite), each replaced atomically"""
    stem = Path(stem)
    _dump(archive, stem.with_suffix('.pkl'))
    with atomic_path(stem.with_suffix('.csv')) as tmp:
        archive.data(return_type='pandas').to_csv(tmp, index=False)
    logger.debug(f'Saved archive with {len(archive)} elites to {stem}')


def load_archive(stem: PathLike) -> GridArchive:
    path = Path(stem).with_suffix('.pkl')
    archive = _load(path, 'archive')
    if not isinstance(archive, GridArchive):
        raise FormatError(f'{path} holds a {type(archive).__name__}, not an archive')
    return archive


def save_state(state: dict, path: PathLike):
    _dump(state, Path(path))


def load_state(path: PathLike) -> dict:
    state = _load(Path(path), 'state')
    if not isinstance(state, dict):
        raise FormatError(f'{path} does not hold a training state')
    return state

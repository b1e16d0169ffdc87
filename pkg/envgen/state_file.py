import json
import logging
import os

from collections.abc import MutableMapping
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f'{type(o).__name__} is not JSON serializable')


class StateFile(MutableMapping):
    """
    JSON state file with automatic saving on changes; holds the run manifest.
    """

    def __init__(self, filename):
        self._filename = Path(filename)
        self.store = dict()

        if self._filename.exists():
            with open(self._filename, encoding='utf-8') as f:
                self.store.update(json.load(f))
        else:
            logger.info(f'No state file at {self._filename}, starting new one')

    def _save(self):
        self._filename.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._filename.with_name(self._filename.name + '.tmp')
        with open(tmp, 'w', encoding='utf-8') as f:
            json.dump(self.store, f, indent=2, sort_keys=True, default=_default)
        os.replace(tmp, self._filename)

    def __getitem__(self, key):
        return self.store[key]

    def __setitem__(self, key, value):
        self.store[key] = value
        self._save()

    def __delitem__(self, key):
        del self.store[key]
        self._save()

    def __iter__(self):
        return iter(self.store)

    def __len__(self):
        return len(self.store)

    def append(self, key, record):
        """Append to the list under ``key``; earlier entries are never rewritten"""
        self.store.setdefault(key, []).append(record)
        self._save()

    def truncate(self, key, length: int):
        """Drop entries past ``length``, used when resuming from a snapshot older than the last record"""
        if len(self.store.get(key, [])) > length:
            self.store[key] = self.store[key][:length]
            self._save()


def dump_json(path, data):
    """Write a report file the same way the state file is written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_default)

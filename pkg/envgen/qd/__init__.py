from .archives import (
    METADATA_FIELDS,
    AddStatus,
    ArchiveSpec,
    Elite,
    annealed_add,
    archive_index,
    best_elite,
    coverage,
    elites,
    flat_index,
    qd_score,
    result_add,
    thresholds,
)
from .persistence import atomic_path, load_archive, load_state, save_archive, save_state
from .scheduler import OPTIMIZERS, Evaluated, QdScheduler, build_scheduler

from .generator import (
    NcaArchitecture,
    NcaGenerator,
    decode,
    encode,
    forward_step,
    generate,
    load_generator,
    param_count,
    save_generator,
)
from .seeds import make_seed

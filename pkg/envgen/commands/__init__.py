commands = [
    'train',
    # generate runs a trained generator at a new size
    'generate',
    'simulate',
    'repair',
    'render',
    'tile_baseline',
    'select',
    'sweep',
]

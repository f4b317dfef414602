import numpy as np


FACTORS = 0
LOADINGS = 1
IDIOSYNCRATIC = 2
ERRORS = 3
FOLDS = 4
EFFECTIVE_NOISE = 5
RE_SAMPLING = 6
RUNS = 7


def stream(seed, stream_id, *counter):
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),) + tuple(int(c) for c in counter))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed, stream_id, *counter):
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),) + tuple(int(c) for c in counter))
    return int(seq.generate_state(1, dtype=np.uint64)[0])

"""Reproducible per-run random streams.

Every randomized run draws from a Philox counter-based generator keyed by
(master seed, run index), so ensembles are bitwise reproducible under any
degree of parallelism and any execution order.
"""

import numpy as np


def run_generator(master_seed, run_index=0):
    seq = np.random.SeedSequence(master_seed, spawn_key=(run_index,))
    return np.random.Generator(np.random.Philox(seq))


class RandomBits:
    """Chunked uint32 stream for kernels that consume raw random words."""

    def __init__(self, master_seed, run_index=0, chunk=1 << 18):
        self._gen = run_generator(master_seed, run_index)
        self._chunk = chunk

    def next_chunk(self):
        return self._gen.integers(0, 1 << 32, size=self._chunk,
                                  dtype=np.uint32)

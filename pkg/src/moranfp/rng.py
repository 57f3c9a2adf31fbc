"""Counter-based random streams.

Every stream is a Philox4x64 generator keyed by ``(seed, stream)`` with the
block number placed in the counter, so the draws seen by a block of replicas
depend only on ``(seed, stream, block)`` and never on how blocks are
scheduled across workers.
"""

from __future__ import annotations

import numpy as np

U64 = (1 << 64) - 1
BLOCK_SIZE = 256  # replicas per stream block


def block_generator(seed: int, stream: int = 0, block: int = 0) -> np.random.Generator:
    key = np.array([seed & U64, stream & U64], dtype=np.uint64)
    counter = np.array([0, 0, block & U64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def block_uniforms(seed: int, stream: int, block: int, count: int) -> np.ndarray:
    """The first ``count`` uniforms of a block stream (prefix-stable in ``count``)."""
    return block_generator(seed, stream, block).random(count)


class UniformStream:
    """Buffered scalar uniforms drawn from one block stream.

    Consumes exactly the same sequence as ``block_uniforms`` so the pure Python
    sampler and the compiled kernels agree draw for draw.
    """

    def __init__(self, seed: int, stream: int = 0, block: int = 0, batch: int = 1024):
        self._gen = block_generator(seed, stream, block)
        self._batch = batch
        self._buf: list[float] = []
        self._pos = 0
        self.consumed = 0

    def random(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._batch).tolist()
            self._pos = 0
            self._batch = min(self._batch * 2, 1 << 20)
        u = self._buf[self._pos]
        self._pos += 1
        self.consumed += 1
        return u

    def index(self, k: int) -> int:
        """Uniform integer in ``0..k-1``."""
        i = int(self.random() * k)
        return i if i < k else k - 1


def derive_seed(seed: int, *tags: int) -> int:
    """A 64-bit child seed, for callers that need a plain integer per task."""
    ss = np.random.SeedSequence([seed & U64, *[t & U64 for t in tags]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])

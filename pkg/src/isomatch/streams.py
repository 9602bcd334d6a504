"""Counter-based random streams.

Every replicate owns a Philox generator keyed by ``(master seed, replicate
index)``; the draw index is Philox's own counter.  Replicate ``r`` is
therefore reproducible in isolation, whichever worker runs it.

Uniform variates are numpy's 53-bit doubles.  Normal variates are produced
by the inverse-CDF method from open-interval 53-bit uniforms.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_TWO_53 = float(2**53)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    return rng.random(size)


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    # midpoint of each 53-bit cell keeps u strictly inside (0, 1)
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return ndtri((k + 0.5) / _TWO_53)

"""Deterministic sampling built on the Philox 64-bit counter-based generator.

Philox is counter-based: the stream is a pure function of (key, counter),
so shards can position their counter independently with ``advance`` and
reproduce the exact global stream regardless of chunking or worker count.
Default seed for Monte Carlo volume runs is 0x5EED.
"""
import numpy as np

DEFAULT_SEED = 0x5EED


def generator(seed: int, offset: int = 0) -> np.random.Generator:
    """Return a Generator over Philox(key=seed) advanced by ``offset`` draws.

    ``offset`` is measured in 64-bit outputs; one float64 consumes one
    output, so a shard starting at sample index i0 of d-dimensional
    points passes offset = i0 * d.
    """
    bg = np.random.Philox(key=seed)
    if offset:
        bg.advance(offset)
    return np.random.Generator(bg)


def uniform_block(seed: int, start: int, count: int, dim: int) -> np.ndarray:
    """Uniform [0,1) samples for point indices [start, start+count).

    Deterministic sharding: the (count, dim) block depends only on
    (seed, start, count, dim), never on how the full range was split.
    """
    return generator(seed, offset=start * dim).random((count, dim))

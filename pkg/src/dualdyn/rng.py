"""Seeded random streams.

All stochastic code draws from PCG64 generators derived from one integer seed
through :class:`numpy.random.SeedSequence`. Work is cut into fixed-size blocks
and block ``k`` always receives the ``k``-th spawned child, so results do not
depend on how many threads process the blocks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

BLOCK_SIZE = 1 << 16

T = TypeVar("T")


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def block_sizes(count: int, block_size: int = BLOCK_SIZE) -> List[int]:
    full, rest = divmod(count, block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_generators(seed: int, nblocks: int) -> List[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(nblocks)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def run_blocks(
    seed: int,
    count: int,
    work: Callable[[np.random.Generator, int], T],
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> List[T]:
    """Apply ``work(rng, size)`` to each block and return results in block order."""
    sizes = block_sizes(count, block_size)
    rngs = block_generators(seed, len(sizes))
    if threads <= 1 or len(sizes) <= 1:
        return [work(r, s) for r, s in zip(rngs, sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, rngs, sizes))


def derived_seeds(seed: int, count: int) -> Sequence[int]:
    """Independent integer seeds for sub-experiments (one per setting, etc.)."""
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]

"""Counter-based random streams.

Every replication draws from its own substream derived from
``(master_seed, stream_id, replication index)``, so results do not depend on
the order in which replications are executed or on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """A reproducible substream identified by a master seed and a path of ids."""

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_id),) + tuple(self.path)
        )

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this substream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, index: int) -> "RandomStream":
        """Substream number ``index`` below this one (used per replication)."""
        return RandomStream(self.master_seed, self.stream_id, self.path + (int(index),))

    def children(self, n: int) -> list["RandomStream"]:
        return [self.child(i) for i in range(n)]


def as_generator(rng) -> np.random.Generator:
    """Accept a RandomStream, a Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot make a random generator from {type(rng).__name__}")


def map_replications(
    fn: Callable[[int, np.random.Generator], T],
    stream: RandomStream,
    n_reps: int,
    workers: int = 1,
) -> list[T]:
    """Run ``fn(i, generator_i)`` for ``i < n_reps``; output order is by index.

    The generator for replication ``i`` only depends on ``stream.child(i)``,
    so the result is identical for any ``workers``.
    """
    def task(i):
        return fn(i, stream.child(i).generator())

    if workers <= 1:
        return [task(i) for i in range(n_reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(n_reps)))


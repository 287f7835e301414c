"""Deterministic random-stream handling.

Every sampler in the package takes its randomness through :class:`RngState`,
a (seed, stream) pair. The same pair always yields the same
``numpy.random.Generator``, and distinct stream indices under one seed give
statistically independent generators, which is how replicate fan-out stays
reproducible no matter how replicates are scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_MAX_SEED = 2**64


@dataclass(frozen=True, slots=True)
class RngState:
    """Seed plus stream index identifying one reproducible random stream.

    Parameters
    ----------
    seed : int
        Base seed, in ``[0, 2**64)``.
    stream : int
        Nonnegative stream index. Stream ``k`` is derived by spawning the
        ``SeedSequence`` with ``spawn_key=(k,)``, so streams never overlap.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise DomainError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise DomainError(f"seed must lie in [0, 2**64), got {self.seed}")
        if not isinstance(self.stream, (int, np.integer)) or isinstance(self.stream, bool):
            raise DomainError(f"stream must be an integer, got {self.stream!r}")
        if int(self.stream) < 0:
            raise DomainError(f"stream must be nonnegative, got {self.stream}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", int(self.stream))

    def generator(self) -> np.random.Generator:
        """Return a fresh ``Generator`` positioned at the start of the stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))

    def with_stream(self, stream: int) -> "RngState":
        """Same seed, different stream index."""
        return RngState(self.seed, stream)


def as_generator(rng: "RngState | np.random.Generator") -> np.random.Generator:
    """Accept either an RngState or a ready Generator and return a Generator."""
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError(f"expected RngState or numpy Generator, got {type(rng).__name__}")

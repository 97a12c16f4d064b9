"""Seeded random number streams.

Every source of randomness in the package goes through a SeededRng so that
(seed, stream, call sequence) fully determines the produced values on any
platform. Streams are derived from the root seed with numpy SeedSequence
spawn keys, so distinct stream ids never collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Stream-id namespaces, spaced far apart so per-index streams never overlap.
STREAM_INIT = 0          # weight initialization
STREAM_DATA = 1_000      # dataset shuffling / x0 draws during pretraining
STREAM_UPDATE = 2_000    # minibatch shuffling, regularizer draws
STREAM_EVAL = 3_000      # evaluation episodes
STREAM_ENV_BASE = 100_000    # + env index: environment resets / obs noise
STREAM_CHAIN_BASE = 200_000  # + env index: denoising-chain noise


@dataclass
class SeededRng:
    """A PCG64 generator pinned to a (seed, stream) pair."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,)))
        )

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def beta(self, a: float, b: float, shape=None) -> np.ndarray:
        return self._gen.beta(a, b, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def state_dict(self) -> dict:
        """JSON-serializable snapshot of the generator state."""
        return {"seed": self.seed, "stream": self.stream, "bit_generator": self._gen.bit_generator.state}

    @classmethod
    def from_state_dict(cls, state: dict) -> "SeededRng":
        rng = cls(seed=state["seed"], stream=state["stream"])
        bg_state = state["bit_generator"]
        # JSON round-trips the 128-bit PCG64 integers as ints already, but the
        # inner dict keys must match numpy's layout exactly.
        rng._gen.bit_generator.state = bg_state
        return rng

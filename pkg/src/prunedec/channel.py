"""BPSK modulation over an AWGN channel parameterised by Eb/N0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import CodeSpec

# Stream identifiers for make_rng; keeps independent consumers on disjoint
# substreams of one user seed.
STREAM_INIT = 1
STREAM_TRAIN = 2
STREAM_VALIDATION = 3
STREAM_EVAL = 4

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``.

    Substreams are derived with ``SeedSequence`` spawn keys, so every worker
    or Monte Carlo chunk can own its own stream and results never depend on
    scheduling.
    """
    if not 0 <= seed <= _SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def noise_sigma(ebn0_db: float, rate: float) -> float:
    """Per-dimension noise deviation for unit-energy symbols."""
    if rate <= 0:
        raise ValueError(f"code rate must be positive, got {rate}")
    if math.isinf(ebn0_db) and ebn0_db > 0:
        return 0.0
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


@dataclass(frozen=True)
class ChannelParams:
    """Eb/N0 in dB plus code rate.  ``ebn0_db=inf`` gives a noiseless channel."""

    ebn0_db: float
    rate: float

    def __post_init__(self):
        if math.isnan(self.ebn0_db) or self.ebn0_db == -math.inf:
            raise ValueError(f"invalid Eb/N0: {self.ebn0_db}")
        if not self.rate > 0:
            raise ValueError(f"code rate must be positive, got {self.rate}")

    @property
    def sigma(self) -> float:
        return noise_sigma(self.ebn0_db, self.rate)

    @classmethod
    def for_code(cls, spec: CodeSpec, ebn0_db: float) -> "ChannelParams":
        return cls(float(ebn0_db), float(spec.rate))


def modulate(c) -> np.ndarray:
    """Map bit 0 to +1.0 and bit 1 to -1.0."""
    return 1.0 - 2.0 * np.asarray(c, dtype=np.float64)


def awgn(s, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    sigma = params.sigma
    if sigma == 0.0:
        return s.copy()
    return s + sigma * rng.standard_normal(s.shape)


def sample_batch(spec: CodeSpec, params: ChannelParams, batch: int, rng: np.random.Generator):
    """Draw uniform messages, encode, modulate and corrupt them.

    Returns ``(messages, codewords, received)`` with shapes ``(batch, k)``,
    ``(batch, n)`` and ``(batch, n)``.
    """
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    idx = rng.integers(0, 1 << spec.k, size=batch)
    codewords = spec.codebook[idx]
    messages = ((idx[:, None] >> np.arange(spec.k - 1, -1, -1)) & 1).astype(np.uint8)
    received = awgn(modulate(codewords), params, rng)
    return messages, codewords, received

"""Hamming (7,4) and Polar (16,8) block codes.

Bit vectors are ``numpy.uint8`` arrays with values in {0, 1}.  A codeword is
keyed by packing its bits into an unsigned integer with the first bit as the
most significant one, so integer order equals lexicographic order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np


class CodeName(str, enum.Enum):
    HAMMING74 = "hamming74"
    POLAR168 = "polar168"


class InvalidCodewordError(ValueError):
    """Raised when a word that is not in the codebook is treated as one."""


HAMMING_PARITY = np.array(
    [[1, 1, 0],
     [1, 0, 1],
     [0, 1, 1],
     [1, 1, 1]],
    dtype=np.uint8,
)
HAMMING_GENERATOR = np.hstack([np.eye(4, dtype=np.uint8), HAMMING_PARITY])

POLAR_N = 16
POLAR_K = 8


def polar_transform(log2n: int) -> np.ndarray:
    """Kronecker power of the kernel [[1, 0], [1, 1]] (no bit reversal)."""
    kernel = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    g = np.ones((1, 1), dtype=np.uint8)
    for _ in range(log2n):
        g = np.kron(g, kernel)
    return g


def bhattacharyya_info_set(n: int, k: int, erasure_prob: float = 0.5) -> tuple[int, ...]:
    """The k most reliable synthetic-channel indices for a BEC, ascending.

    Each polarization level maps z to ``2z - z**2`` for the degraded branch
    and to ``z**2`` for the upgraded one; the first level sets the most
    significant index bit.
    """
    if n < 1 or n & (n - 1):
        raise ValueError(f"block length must be a power of two, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}")
    z = np.array([erasure_prob], dtype=np.float64)
    while z.size < n:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    best = np.argsort(z, kind="stable")[:k]
    return tuple(sorted(int(i) for i in best))


POLAR_TRANSFORM = polar_transform(4)
POLAR_INFO_SET = bhattacharyya_info_set(POLAR_N, POLAR_K)
POLAR_FROZEN_SET = tuple(i for i in range(POLAR_N) if i not in POLAR_INFO_SET)
POLAR_GENERATOR = POLAR_TRANSFORM[list(POLAR_INFO_SET)]


def _as_bits(x, length: int, what: str) -> np.ndarray:
    bits = np.asarray(x)
    if bits.shape[-1:] != (length,):
        raise ValueError(f"{what} must have length {length}, got shape {bits.shape}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError(f"{what} must contain only 0/1 entries")
    return bits.astype(np.uint8)


def hamming_encode(m) -> np.ndarray:
    """Systematic Hamming (7,4) encoding; accepts ``(4,)`` or ``(B, 4)``."""
    m = _as_bits(m, 4, "message")
    return (m.astype(np.int64) @ HAMMING_GENERATOR % 2).astype(np.uint8)


def polar_encode(m) -> np.ndarray:
    """Polar (16,8) encoding ``x = u F^{(x)4}`` with message bits on the info set."""
    m = _as_bits(m, POLAR_K, "message")
    u = np.zeros(m.shape[:-1] + (POLAR_N,), dtype=np.int64)
    u[..., list(POLAR_INFO_SET)] = m
    return (u @ POLAR_TRANSFORM % 2).astype(np.uint8)


def pack_bits(bits) -> np.ndarray | int:
    """Pack the last axis of a bit array into integers, first bit most significant."""
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.shape[-1]
    weights = np.left_shift(1, np.arange(n - 1, -1, -1, dtype=np.int64))
    packed = bits @ weights
    return int(packed) if packed.ndim == 0 else packed


def unpack_bits(values, n: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def all_messages(k: int) -> np.ndarray:
    """Every k-bit message in lexicographic order, shape ``(2**k, k)``."""
    return np.array(list(product((0, 1), repeat=k)), dtype=np.uint8).reshape(-1, k)


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """An enumerated binary linear block code.

    ``codebook[i]`` is the encoding of the i-th message in lexicographic
    order.  ``member_table`` is a direct-address table over all 2**n packed
    words used for vectorised membership checks; ``codeword_set`` is the
    same membership as a hash set.
    """

    name: CodeName
    n: int
    k: int
    generator: np.ndarray
    codebook: np.ndarray
    codeword_set: frozenset[int]
    member_table: np.ndarray = field(repr=False)
    message_index: np.ndarray = field(repr=False)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    def encode(self, m) -> np.ndarray:
        if self.name is CodeName.HAMMING74:
            return hamming_encode(m)
        return polar_encode(m)

    @property
    def systematic(self) -> bool:
        return self.name is CodeName.HAMMING74


def build_codebook(name: CodeName | str) -> CodeSpec:
    """Enumerate the full codebook of a supported code (cached, immutable)."""
    return _build_codebook(CodeName(name))


@lru_cache(maxsize=None)
def _build_codebook(name: CodeName) -> CodeSpec:
    if name is CodeName.HAMMING74:
        n, k, gen, enc = 7, 4, HAMMING_GENERATOR, hamming_encode
    else:
        n, k, gen, enc = POLAR_N, POLAR_K, POLAR_GENERATOR, polar_encode
    codebook = enc(all_messages(k))
    codebook.setflags(write=False)
    keys = pack_bits(codebook)
    table = np.zeros(1 << n, dtype=bool)
    table[keys] = True
    table.setflags(write=False)
    index = np.full(1 << n, -1, dtype=np.int64)
    index[keys] = np.arange(1 << k)
    index.setflags(write=False)
    gen = gen.copy()
    gen.setflags(write=False)
    return CodeSpec(
        name=name,
        n=n,
        k=k,
        generator=gen,
        codebook=codebook,
        codeword_set=frozenset(int(x) for x in keys),
        member_table=table,
        message_index=index,
    )


def is_codeword(spec: CodeSpec, c) -> bool:
    c = _as_bits(c, spec.n, "word")
    if c.ndim != 1:
        raise ValueError("is_codeword takes a single word; use member_table for batches")
    return pack_bits(c) in spec.codeword_set


def extract_message(spec: CodeSpec, c) -> np.ndarray:
    """Recover the message bits of a valid codeword (single word or batch)."""
    c = _as_bits(c, spec.n, "codeword")
    keys = np.atleast_1d(pack_bits(c))
    if not spec.member_table[keys].all():
        raise InvalidCodewordError("word is not a codeword of " + spec.name.value)
    if spec.systematic:
        return c[..., : spec.k].copy()
    # the transform is an involution over GF(2)
    u = c.astype(np.int64) @ POLAR_TRANSFORM % 2
    return u[..., list(POLAR_INFO_SET)].astype(np.uint8)


def minimum_distance(spec: CodeSpec) -> int:
    """Minimum weight over nonzero codewords (exhaustive)."""
    weights = spec.codebook.sum(axis=1)
    return int(weights[weights > 0].min())

"""Hard-decision, semi-soft and maximum-likelihood decoders.

All functions accept a single vector ``(n,)`` or a batch ``(B, n)`` and
return ``uint8`` bits of the same leading shape.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .channel import modulate
from .codec import CodeSpec, pack_bits
from .neural import ContractError

THRESHOLD = 0.5
MAX_FREE_BITS = 16
# upper bound on B * 2**b candidate entries held in memory at once
_CANDIDATE_BUDGET = 1 << 22


def hard_decide(p) -> np.ndarray:
    """Threshold at 0.5; a value of exactly 0.5 decodes to 1."""
    return (np.asarray(p) >= THRESHOLD).astype(np.uint8)


def least_confident(p, b: int) -> np.ndarray:
    """Indices of the ``b`` entries closest to 0.5, returned ascending.

    Equal distances are resolved towards the lower index.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[-1]
    if not 0 <= b <= n:
        raise ContractError(f"b must lie in [0, {n}], got {b}")
    order = np.argsort(np.abs(p - THRESHOLD), axis=-1, kind="stable")
    return np.sort(order[..., :b], axis=-1)


@lru_cache(maxsize=None)
def _assignments(b: int) -> np.ndarray:
    """All 2**b fillings in lexicographic order, shape ``(2**b, b)``."""
    idx = np.arange(1 << b)
    return ((idx[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8)


def semi_soft_decode(p, spec: CodeSpec, b: int) -> np.ndarray:
    """Codebook search over the ``b`` least confident positions.

    Outside those positions the output is the hard decision.  Every
    filling of the free positions is looked up in the codebook; among the
    valid ones the filling closest (Euclidean, in probability space) to the
    soft values is chosen, ties going to the lexicographically smallest
    word.  Without any valid filling the hard decision is returned.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != spec.n:
        raise ContractError(f"soft output length {p.shape[-1]} != {spec.n}")
    if not 0 <= b <= min(spec.n, MAX_FREE_BITS):
        raise ContractError(f"b must lie in [0, {min(spec.n, MAX_FREE_BITS)}], got {b}")
    single = p.ndim == 1
    p2 = np.atleast_2d(p)
    out = hard_decide(p2)
    if b > 0:
        step = max(1, _CANDIDATE_BUDGET >> b)
        for lo in range(0, p2.shape[0], step):
            out[lo:lo + step] = _semi_soft_batch(p2[lo:lo + step], out[lo:lo + step], spec, b)
    return out[0] if single else out


def _semi_soft_batch(p: np.ndarray, hard: np.ndarray, spec: CodeSpec, b: int) -> np.ndarray:
    rows = np.arange(p.shape[0])[:, None]
    free = least_confident(p, b)                       # (B, b)
    fill = _assignments(b)                              # (2^b, b)
    base = hard.copy()
    base[rows, free] = 0
    base_key = pack_bits(base)                          # (B,)
    bit_value = np.left_shift(1, spec.n - 1 - free)     # (B, b)
    keys = (bit_value @ fill.T.astype(np.int64)) + base_key[:, None]  # (B, 2^b)
    valid = spec.member_table[keys]
    soft = p[rows, free]                                # (B, b)
    dist = ((fill[None, :, :] - soft[:, None, :]) ** 2).sum(axis=-1)  # (B, 2^b)
    dist = np.where(valid, dist, np.inf)
    best = np.argmin(dist, axis=1)                      # first minimum = lexicographic smallest
    found = valid.any(axis=1)
    out = hard.copy()
    chosen = fill[best]                                 # (B, b)
    sel = np.flatnonzero(found)
    out[sel[:, None], free[sel]] = chosen[sel]
    return out


@lru_cache(maxsize=None)
def _ml_tables(spec: CodeSpec):
    order = np.argsort(pack_bits(spec.codebook), kind="stable")
    words = spec.codebook[order]
    return words, modulate(words)


def ml_decode(r, spec: CodeSpec) -> np.ndarray:
    """Nearest codeword to ``r`` among all 2**k modulated codewords.

    All modulated codewords have the same norm, so the nearest one is the one
    with largest correlation; ties go to the lexicographically smallest word.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != spec.n:
        raise ContractError(f"received length {r.shape[-1]} != {spec.n}")
    words, symbols = _ml_tables(spec)
    best = np.argmax(r @ symbols.T, axis=-1)
    return words[best]

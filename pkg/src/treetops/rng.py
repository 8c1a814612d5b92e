"""Counter-based randomness with a fixed node-to-stream map.

Every Gaussian increment of a replicate is pinned to an absolute position in
a Philox-4x64 stream keyed by (master_seed, replicate_index). Word w of the
stream is word w mod 4 of counter block floor(w/4), so any contiguous span of
positions regenerates in isolation: traversal order, buffer sizes, extraction
op and thread count cannot change what a node sees.

A 64-bit word maps to the open unit interval through

    u = (w >> 12) * 2^-52 + 2^-53        (u in [2^-53, 1 - 2^-53])

every value of which is exactly representable, so no rounding can push u
onto 0 or 1 (a 53-bit mantissa variant of this map rounds its top value to
exactly 1.0, where the inverse CDF blows up). The Gaussian is z = ndtri(u).
No rejection sampling anywhere, so stream positions never slip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

__all__ = ["SeedSpec", "raw_words", "uniforms_from_words", "gaussians", "gaussians_from_words"]

_U64 = np.uint64
_TWO64 = 1 << 64


@dataclass(frozen=True)
class SeedSpec:
    """(master_seed, replicate_index): the full identity of a replicate's randomness."""

    master_seed: int
    replicate_index: int

    def __post_init__(self):
        for name in ("master_seed", "replicate_index"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"{name} must be an integer")
            if not 0 <= v < _TWO64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")


def raw_words(seed: SeedSpec, start: int, count: int) -> np.ndarray:
    """count raw uint64 stream words at positions start .. start+count-1."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    if count == 0:
        return np.empty(0, dtype=_U64)
    block, offset = divmod(start, 4)
    key = np.array([seed.master_seed, seed.replicate_index], dtype=_U64)
    bitgen = Philox(key=key, counter=block)
    words = bitgen.random_raw(offset + count)
    return words[offset:] if offset else words


def uniforms_from_words(words: np.ndarray) -> np.ndarray:
    """Map raw words to doubles strictly inside (0, 1)."""
    return (words >> _U64(12)).astype(np.float64) * 2.0**-52 + 2.0**-53


def gaussians_from_words(words: np.ndarray, scale: float = 1.0) -> np.ndarray:
    z = ndtri(uniforms_from_words(words))
    if scale != 1.0:
        z *= scale
    return z


def gaussians(seed: SeedSpec, start: int, count: int, scale: float = 1.0) -> np.ndarray:
    """count Gaussians N(0, scale^2) at stream positions start onward."""
    return gaussians_from_words(raw_words(seed, start, count), scale)

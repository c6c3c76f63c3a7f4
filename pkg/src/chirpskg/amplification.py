"""Privacy amplification by seeded Toeplitz hashing over GF(2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import toeplitz

from .entropy import EntropyEstimate
from .errors import ConfigurationError, UsageError


@dataclass(frozen=True)
class SecretKey:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if np.any(bits > 1):
            raise ConfigurationError("key bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return self.bits.size

    @property
    def hex(self) -> str:
        """Lowercase hex, MSB first, zero-padded on the right to whole nibbles."""
        if self.bits.size == 0:
            return ""
        pad = (-self.bits.size) % 8
        raw = np.packbits(np.concatenate([self.bits, np.zeros(pad, np.uint8)])).tobytes().hex()
        return raw[: -(-self.bits.size // 4)]


def key_length(h, input_len: Optional[int] = None, margin: float = 0.0) -> int:
    """``floor(h - margin)`` bits, clamped to ``[0, input_len]``.

    ``h`` is an :class:`EntropyEstimate` or a plain number of bits.
    """
    bits = h.bits if isinstance(h, EntropyEstimate) else float(h)
    if bits < 0:
        raise UsageError("entropy must be non-negative")
    if margin < 0:
        raise ConfigurationError("margin must be >= 0")
    n = max(0, math.floor(bits - margin + 1e-12))
    if input_len is not None:
        n = min(n, int(input_len))
    return n


def seed_length(input_len: int, target_len: int) -> int:
    return input_len + target_len - 1 if target_len > 0 else 0


def draw_seed(rng: np.random.Generator, input_len: int, target_len: int) -> np.ndarray:
    return rng.integers(0, 2, seed_length(input_len, target_len), dtype=np.uint8)


def toeplitz_matrix(seed: np.ndarray, input_len: int, target_len: int) -> np.ndarray:
    """``T[i, j] = seed[i - j + input_len - 1]``, shape ``(target_len, input_len)``."""
    seed = np.asarray(seed, dtype=np.uint8)
    if seed.size != seed_length(input_len, target_len):
        raise UsageError(f"seed needs {seed_length(input_len, target_len)} bits, got {seed.size}")
    n = input_len
    return toeplitz(seed[n - 1 :], seed[n - 1 :: -1]).astype(np.uint8)


def amplify_batch(rows, target_len: int, seed) -> np.ndarray:
    """Hash every row of ``rows`` with the same seed; returns a bit matrix."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
    n = rows.shape[-1]
    if target_len < 0 or target_len > n:
        raise UsageError(f"target length {target_len} outside 0..{n}")
    if target_len == 0:
        return np.zeros((rows.shape[0], 0), dtype=np.uint8)
    T = toeplitz_matrix(seed, n, target_len).astype(np.int64)
    return ((rows.astype(np.int64) @ T.T) & 1).astype(np.uint8)


def amplify(r, target_len: int, seed) -> SecretKey:
    """Compress the bit sequence ``r`` to ``target_len`` bits.

    The hash is the Toeplitz matrix keyed by the public ``seed``
    (``len(r) + target_len - 1`` bits); equal inputs and seeds always give
    equal keys.
    """
    r = np.asarray(r, dtype=np.uint8)
    if r.ndim != 1:
        raise UsageError("amplify takes one sequence; use amplify_batch for several")
    return SecretKey(amplify_batch(r, target_len, seed)[0])

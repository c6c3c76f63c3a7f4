"""Slepian-Wolf reconciliation with polar codes.

Alice transforms her bits ``r`` with the polar kernel, ``u = r G_n`` (the
m-fold Kronecker power of ``[[1, 0], [1, 1]]``, which is its own inverse
over GF(2)), and discloses ``u`` on the least reliable synthetic channels.
Bob treats his own bits as the output of a BSC whose input is ``r`` and
runs successive cancellation with those positions pinned to the syndrome.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, UsageError

LLR_CLIP = 1e-12
KNOWN_LLR = 1e12
HEADER = struct.Struct("<IHH")


@dataclass(frozen=True)
class PolarCodeSpec:
    block_len: int
    rate: float
    design_crossover: float
    reliability_order: np.ndarray  # least to most reliable
    bhattacharyya: np.ndarray

    @property
    def syndrome_len(self) -> int:
        return syndrome_length(self.block_len, self.rate)

    @property
    def syndrome_positions(self) -> np.ndarray:
        return np.sort(self.reliability_order[: self.syndrome_len])

    @property
    def syndrome_mask(self) -> np.ndarray:
        mask = np.zeros(self.block_len, dtype=bool)
        mask[self.reliability_order[: self.syndrome_len]] = True
        return mask


def syndrome_length(block_len: int, rate: float) -> int:
    # Round half up; the epsilon absorbs binary noise such as (1 - 0.9) * 16.
    return int(math.floor((1 - rate) * block_len + 0.5 + 1e-9))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def bhattacharyya_parameters(block_len: int, crossover: float) -> np.ndarray:
    """Z of every synthetic channel of a BSC(crossover), natural index order.

    Bit b of the index (MSB first) picks ``2Z - Z**2`` (b = 0) or ``Z**2``.
    """
    z = np.array([2 * math.sqrt(crossover * (1 - crossover))])
    while z.size < block_len:
        z = np.stack([2 * z - z**2, z**2], axis=1).ravel()
    return z


def construct_code(block_len: int, rate: float, design_crossover: float) -> PolarCodeSpec:
    if not _is_pow2(int(block_len)) or int(block_len) != block_len:
        raise ConfigurationError(f"block_len must be a power of two, got {block_len}")
    if not 0 <= rate <= 1:
        raise ConfigurationError(f"rate must lie in [0, 1], got {rate}")
    if not 0 <= design_crossover < 0.5:
        raise ConfigurationError(f"design_crossover must lie in [0, 0.5), got {design_crossover}")
    z = bhattacharyya_parameters(int(block_len), design_crossover)
    order = np.argsort(-z, kind="stable")
    return PolarCodeSpec(int(block_len), float(rate), float(design_crossover), order, z)


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """``bits @ G_n`` over GF(2) along the last axis."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise UsageError(f"length {n} is not a power of two")
    lead = x.shape[:-1]
    h = n // 2
    while h >= 1:
        v = x.reshape(*lead, n // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


def syndrome(r: np.ndarray, code: PolarCodeSpec) -> np.ndarray:
    r = np.asarray(r)
    if r.shape[-1] != code.block_len:
        raise UsageError(f"expected {code.block_len} bits, got {r.shape[-1]}")
    return polar_transform(r)[..., code.syndrome_positions]


def _boxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def _sc(llr: np.ndarray, pinned: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Successive cancellation; returns the re-encoded estimate ``x_hat``.

    ``llr`` is (batch, n); ``pinned`` holds the syndrome values at the
    masked positions of ``u``.
    """
    n = llr.shape[-1]
    if mask.all():
        return polar_transform(pinned)
    if n == 1:
        return (llr < 0).astype(np.uint8)
    h = n // 2
    a, b = llr[:, :h], llr[:, h:]
    v = _sc(_boxplus(a, b), pinned[:, :h], mask[:h])
    w = _sc(b + (1 - 2 * v.astype(np.int8)) * a, pinned[:, h:], mask[h:])
    return np.concatenate([v ^ w, w], axis=1)


def channel_llr(r_side: np.ndarray, channel_p: float) -> np.ndarray:
    p = min(max(channel_p, LLR_CLIP), 0.5)
    mag = math.log((1 - p) / p)
    return (1 - 2 * np.asarray(r_side, dtype=np.float64)) * mag


def decode(
    r_side: np.ndarray,
    s: np.ndarray,
    code: PolarCodeSpec,
    channel_p: float,
    known: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Estimate Alice's block from side information and her syndrome.

    ``r_side`` and ``s`` may carry a leading batch axis.  ``known`` marks
    positions whose side bits are certain (e.g. zero padding).
    """
    r_side = np.asarray(r_side)
    single = r_side.ndim == 1
    r2 = np.atleast_2d(r_side)
    s2 = np.atleast_2d(np.asarray(s, dtype=np.uint8))
    if r2.shape[-1] != code.block_len:
        raise UsageError(f"expected {code.block_len} side bits, got {r2.shape[-1]}")
    if s2.shape[-1] != code.syndrome_len or s2.shape[0] != r2.shape[0]:
        raise UsageError("syndrome does not match the code or the batch")
    llr = channel_llr(r2, channel_p)
    if known is not None:
        llr = np.where(known, (1 - 2 * r2.astype(np.float64)) * KNOWN_LLR, llr)
    pinned = np.zeros(r2.shape, dtype=np.uint8)
    pinned[:, code.syndrome_positions] = s2
    out = _sc(llr, pinned, code.syndrome_mask)
    return out[0] if single else out


def fer(outcomes) -> float:
    """Fraction of failed frames; ``outcomes`` are per-frame success flags."""
    ok = np.asarray(outcomes, dtype=bool)
    if ok.size == 0:
        raise UsageError("FER needs at least one frame")
    return float(1 - ok.mean())


def reconcile_frames(
    r_a: np.ndarray,
    r_side: np.ndarray,
    code: PolarCodeSpec,
    channel_p: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Syndrome-decode whole frames, segmenting into blocks as needed.

    Frames are zero-padded to a multiple of ``block_len``; padding is known
    to both sides and excluded from the success check.  Returns the decoded
    frames and per-frame success flags.
    """
    r_a = np.atleast_2d(r_a)
    r_side = np.atleast_2d(r_side)
    if r_a.shape != r_side.shape:
        raise UsageError("reference and side sequences differ in shape")
    frames, F = r_a.shape
    n = code.block_len
    blocks = -(-F // n)
    pad = blocks * n - F
    a = np.pad(r_a, ((0, 0), (0, pad))).reshape(frames * blocks, n)
    b = np.pad(r_side, ((0, 0), (0, pad))).reshape(frames * blocks, n)
    known = np.zeros(blocks * n, dtype=bool)
    known[F:] = True
    known = np.tile(known.reshape(blocks, n), (frames, 1))
    est = decode(b, syndrome(a, code), code, channel_p, known=known)
    est = est.reshape(frames, blocks * n)[:, :F]
    return est, np.all(est == r_a, axis=1)


def pack_syndrome(s: np.ndarray, code: PolarCodeSpec) -> bytes:
    """Header (block_len u32, rate numerator u16, denominator u16, LE) + packed bits."""
    s = np.asarray(s, dtype=np.uint8)
    if s.shape != (code.syndrome_len,):
        raise UsageError("syndrome length does not match the code")
    frac = Fraction(code.rate).limit_denominator(0xFFFF)
    return HEADER.pack(code.block_len, frac.numerator, frac.denominator) + np.packbits(s).tobytes()


def unpack_syndrome(blob: bytes):
    """Inverse of :func:`pack_syndrome`; returns ``(bits, block_len, rate)``."""
    if len(blob) < HEADER.size:
        raise UsageError("syndrome record shorter than its header")
    block_len, num, den = HEADER.unpack_from(blob)
    if den == 0:
        raise UsageError("zero rate denominator")
    rate = num / den
    length = syndrome_length(block_len, rate)
    payload = np.frombuffer(blob, dtype=np.uint8, offset=HEADER.size)
    if payload.size != -(-length // 8):
        raise UsageError("syndrome payload size does not match the header")
    return np.unpackbits(payload)[:length], block_len, rate

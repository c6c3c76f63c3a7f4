"""Linear multi-level quantization of power vectors into Gray-coded bits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, DomainError, UsageError
from .filterbank import PowerVector

BOUNDARY_MODES = ("global-minmax", "mean-sigma")
SCOPES = ("global", "per-filter")


@dataclass(frozen=True)
class QuantizerSpec:
    """Quantizer parameters.

    ``scope`` selects whether one threshold set is shared by all filters
    (``global``) or each filter gets its own (``per-filter``).
    """

    levels: int = 4
    boundary_mode: str = "mean-sigma"
    sigma_span: float = 1.25
    scope: str = "global"

    def __post_init__(self):
        q = self.levels
        if int(q) != q or q < 2 or (int(q) & (int(q) - 1)):
            raise ConfigurationError(f"levels must be a power of two >= 2, got {q}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ConfigurationError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        if self.scope not in SCOPES:
            raise ConfigurationError(f"scope must be one of {SCOPES}")
        if not self.sigma_span > 0:
            raise ConfigurationError("sigma_span must be positive")

    @property
    def bits_per_measurement(self) -> int:
        return int(self.levels).bit_length() - 1


@dataclass(frozen=True)
class Boundaries:
    """Calibrated thresholds: shape ``(Q-1,)`` or ``(N, Q-1)`` per filter.

    ``low``/``high`` are the ends of the calibrated span; powers outside
    it land in the extreme levels.
    """

    thresholds: np.ndarray
    low: np.ndarray
    high: np.ndarray

    @property
    def per_filter(self) -> bool:
        return self.thresholds.ndim == 2

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds.tolist(),
            "low": np.asarray(self.low).tolist(),
            "high": np.asarray(self.high).tolist(),
        }


def _as_matrix(powers) -> np.ndarray:
    if isinstance(powers, PowerVector):
        return powers.values[None, :]
    if isinstance(powers, np.ndarray):
        return np.atleast_2d(powers).astype(float)
    rows = [p.values if isinstance(p, PowerVector) else np.asarray(p, float) for p in powers]
    return np.atleast_2d(np.array(rows, dtype=float))


def _span(values: np.ndarray, spec: QuantizerSpec, axis):
    if spec.boundary_mode == "global-minmax":
        return values.min(axis=axis), values.max(axis=axis)
    mu, sd = values.mean(axis=axis), values.std(axis=axis)
    return mu - spec.sigma_span * sd, mu + spec.sigma_span * sd


def calibrate(powers, spec: QuantizerSpec) -> Boundaries:
    """Equally spaced thresholds splitting the calibrated span into ``Q`` bins.

    ``powers`` is a collection of power vectors (or a frames x N array);
    the global scope pools every value, the per-filter scope calibrates
    each column on its own.
    """
    P = _as_matrix(powers)
    axis = None if spec.scope == "global" else 0
    spread = np.ptp(P) if axis is None else np.ptp(P, axis=0)
    if np.any(spread <= 0):
        raise DegenerateInputError("calibration needs at least two distinct power values")
    low, high = _span(P, spec, axis)
    fractions = np.arange(1, spec.levels) / spec.levels
    low_, high_ = np.asarray(low)[..., None], np.asarray(high)[..., None]
    thresholds = low_ + (high_ - low_) * fractions
    return Boundaries(thresholds, np.asarray(low), np.asarray(high))


def levels_of(p, boundaries: Boundaries) -> np.ndarray:
    """Level index per power; values equal to a threshold go to the upper level."""
    P = p.values if isinstance(p, PowerVector) else np.asarray(p, dtype=float)
    th = boundaries.thresholds
    if th.ndim == 1:
        return np.searchsorted(th, P, side="right")
    if P.shape[-1] != th.shape[0]:
        raise UsageError(f"per-filter boundaries for {th.shape[0]} filters, got {P.shape[-1]}")
    return np.sum(P[..., None] >= th, axis=-1)


def gray_table(levels: int) -> np.ndarray:
    """Bits (MSB first) of the reflected Gray code for every level."""
    m = int(levels).bit_length() - 1
    codes = np.arange(levels) ^ (np.arange(levels) >> 1)
    return ((codes[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


def gray_encode(level: int, levels: int) -> np.ndarray:
    if not 0 <= level < levels:
        raise DomainError(f"level {level} outside 0..{levels - 1}")
    return gray_table(levels)[level]


def gray_decode(bits: Sequence[int]) -> int:
    level = 0
    acc = 0
    for b in bits:
        acc ^= int(b)
        level = (level << 1) | acc
    return level


def quantize(p, boundaries: Boundaries, spec: QuantizerSpec) -> np.ndarray:
    """Gray-coded bits, ``log2(Q)`` per measurement, concatenated per frame.

    Works on a single vector (returns ``N*log2(Q)`` bits) or a frames x N
    matrix (returns frames x ``N*log2(Q)``).
    """
    lv = levels_of(p, boundaries)
    expected = spec.levels - 1
    if boundaries.thresholds.shape[-1] != expected:
        raise UsageError(f"boundaries carry {boundaries.thresholds.shape[-1]} thresholds, Q={spec.levels}")
    bits = gray_table(spec.levels)[lv]
    return bits.reshape(*lv.shape[:-1], -1)


def mismatch_rate(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise UsageError(f"bit sequences differ in shape: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise UsageError("empty bit sequences")
    return float(np.mean(a != b))


def clipped_fraction(p, boundaries: Boundaries) -> float:
    """Share of powers falling outside the calibrated span."""
    P = p.values if isinstance(p, PowerVector) else np.asarray(p, dtype=float)
    return float(np.mean((P < boundaries.low) | (P > boundaries.high)))


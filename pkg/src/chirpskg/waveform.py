"""Baseband linear up-chirp probing signals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ChirpSpec:
    """Parameters of the probing chirp.

    ``center_freq_hz`` is metadata only: all processing is baseband and the
    carrier is used solely to derive the wavelength.  ``sample_rate_hz``
    defaults to the bandwidth (critical sampling).
    """

    duration_s: float
    bandwidth_hz: float
    center_freq_hz: float = 0.0
    sample_rate_hz: Optional[float] = None

    def __post_init__(self):
        if self.sample_rate_hz is None:
            object.__setattr__(self, "sample_rate_hz", float(self.bandwidth_hz))
        for name in ("duration_s", "bandwidth_hz", "sample_rate_hz"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be finite and positive, got {value}")
        if self.center_freq_hz < 0:
            raise ConfigurationError("center_freq_hz must be non-negative")
        if self.sample_rate_hz < self.bandwidth_hz:
            raise ConfigurationError(
                f"sample_rate_hz={self.sample_rate_hz} below bandwidth_hz={self.bandwidth_hz}"
            )
        if not np.isfinite(self.chirp_rate):
            raise ConfigurationError("chirp rate B/T is not finite")

    @property
    def chirp_rate(self) -> float:
        return self.bandwidth_hz / self.duration_s

    @property
    def start_freq_hz(self) -> float:
        return self.center_freq_hz - self.bandwidth_hz / 2

    @property
    def num_samples(self) -> int:
        # Guard against 1203.1250000000002-style float noise before the ceiling.
        return max(1, math.ceil(round(self.duration_s * self.sample_rate_hz, 9)))

    @property
    def wavelength_m(self) -> float:
        if self.center_freq_hz <= 0:
            raise ConfigurationError("wavelength needs a positive center_freq_hz")
        return SPEED_OF_LIGHT / self.center_freq_hz


@dataclass(frozen=True)
class ComplexSignal:
    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size < 1:
            raise ConfigurationError("a signal needs at least one sample")
        if not self.sample_rate_hz > 0:
            raise ConfigurationError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


def generate_chirp(spec: ChirpSpec) -> ComplexSignal:
    """Sample ``x(t) = (1/T) exp(j*pi*c*(t - T/2)**2)`` at ``t_k = k / f_s``.

    The time origin is centred so the baseband sweep covers ``[-B/2, B/2]``.
    """
    t = np.arange(spec.num_samples) / spec.sample_rate_hz - spec.duration_s / 2
    samples = np.exp(1j * np.pi * spec.chirp_rate * t**2) / spec.duration_s
    return ComplexSignal(samples, spec.sample_rate_hz)


def instantaneous_frequency(spec: ChirpSpec, t: float) -> float:
    """Passband instantaneous frequency ``c*t + f_0`` for ``0 <= t <= T``."""
    if not 0.0 <= t <= spec.duration_s:
        raise DomainError(f"t={t} outside [0, {spec.duration_s}]")
    return spec.chirp_rate * t + spec.start_freq_hz

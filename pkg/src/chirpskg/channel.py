"""Multipath Rayleigh/Rician channel realizations for Alice-Bob and Alice-Eve.

Channels are tapped delay lines ``h(t) = sum_i a_i delta(t - tau_i)``.  The
diffuse taps are circular complex Gaussian with an exponential power-delay
profile; a line-of-sight scenario adds a deterministic tap at delay zero.
Eve's taps are correlated with the legitimate ones through the Jakes
coefficient ``J0(2*pi*d/lambda)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import j0

from .errors import ConfigurationError, UsageError
from .waveform import SPEED_OF_LIGHT, ComplexSignal


@dataclass(frozen=True)
class MultipathChannel:
    amplitudes: np.ndarray
    delays_s: np.ndarray
    carrier_freq_hz: float = 0.0

    def __post_init__(self):
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        delays = np.atleast_1d(np.asarray(self.delays_s, dtype=float))
        if amplitudes.ndim != 1 or amplitudes.size < 1:
            raise ConfigurationError("a channel needs at least one tap")
        if delays.shape != amplitudes.shape:
            raise ConfigurationError("amplitudes and delays differ in length")
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ConfigurationError("delays must be non-negative and strictly increasing")
        if not np.any(amplitudes != 0):
            raise ConfigurationError("at least one tap must be nonzero")
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "delays_s", delays)

    @property
    def num_taps(self) -> int:
        return self.amplitudes.size

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def sample_delays(self, sample_rate_hz: float) -> np.ndarray:
        return np.rint(self.delays_s * sample_rate_hz).astype(int)

    def discrete_taps(self, sample_rate_hz: float) -> np.ndarray:
        """Integer-indexed impulse response at ``sample_rate_hz``.

        Delays are rounded to the nearest sample; the fractional remainder
        is kept as a carrier phase rotation ``exp(-j*2*pi*f_c*tau_frac)``.
        """
        idx = self.sample_delays(sample_rate_hz)
        frac = self.delays_s - idx / sample_rate_hz
        rotated = self.amplitudes * np.exp(-2j * np.pi * self.carrier_freq_hz * frac)
        taps = np.zeros(idx.max() + 1, dtype=complex)
        np.add.at(taps, idx, rotated)
        return taps


@dataclass(frozen=True)
class ScenarioConfig:
    """Propagation scenario.

    ``snr_db`` is referenced to the mean received power of the diffuse
    (scattered) multipath, so LoS and NLoS runs with the same ``snr_db``
    share transmit power and noise level; the LoS tap adds power on top.
    """

    los: bool = False
    dynamic: bool = False
    snr_db: float = 10.0
    num_taps: int = 8
    delay_spread_s: float = 200e-9
    eve_offset_wavelengths: float = 1.0
    carrier_freq_hz: float = 3.75e9
    rng_seed: int = 0
    k_factor_db: float = 10.0
    diffuse_power: float = 1.0

    def __post_init__(self):
        if int(self.num_taps) != self.num_taps or self.num_taps < 1:
            raise ConfigurationError("num_taps must be an integer >= 1")
        if self.delay_spread_s < 0:
            raise ConfigurationError("delay_spread_s must be >= 0")
        if self.num_taps > 1 and self.delay_spread_s == 0:
            raise ConfigurationError("several taps need a positive delay_spread_s")
        if self.eve_offset_wavelengths < 0:
            raise ConfigurationError("eve_offset_wavelengths must be >= 0")
        if self.carrier_freq_hz <= 0:
            raise ConfigurationError("carrier_freq_hz must be positive")
        if not self.diffuse_power > 0:
            raise ConfigurationError("diffuse_power must be positive")
        if not np.isfinite(self.snr_db):
            raise ConfigurationError("snr_db must be finite")

    @property
    def name(self) -> str:
        return f"{'los' if self.los else 'nlos'}-{'dynamic' if self.dynamic else 'static'}"

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def k_factor(self) -> float:
        return 10 ** (self.k_factor_db / 10) if self.los else 0.0

    @property
    def total_power(self) -> float:
        """Expected sum of tap powers, LoS tap included."""
        return self.diffuse_power * (1 + self.k_factor)

    def noise_var(self, signal_power: float) -> float:
        """Per-sample noise variance for a transmit signal of power ``signal_power``."""
        return self.diffuse_power * signal_power / 10 ** (self.snr_db / 10)


@dataclass(frozen=True)
class FrameSchedule:
    """Number of frames and block-fading length.

    ``coherence_frames=None`` means one realization for the whole run.
    """

    num_frames: int = 1000
    coherence_frames: Optional[int] = 1

    def __post_init__(self):
        if self.num_frames < 1:
            raise ConfigurationError("num_frames must be >= 1")
        if self.coherence_frames is not None and self.coherence_frames < 1:
            raise ConfigurationError("coherence_frames must be >= 1")

    def block_index(self, frame: int, dynamic: bool) -> int:
        if not dynamic or self.coherence_frames is None:
            return 0
        return frame // self.coherence_frames

    def block_indices(self, dynamic: bool) -> np.ndarray:
        return np.array([self.block_index(k, dynamic) for k in range(self.num_frames)])


def tap_variances(cfg: ScenarioConfig, delays: np.ndarray) -> np.ndarray:
    """Exponential power-delay profile normalized to ``cfg.diffuse_power``.

    The decay constant is a third of the delay spread; normalizing per draw
    makes the expected diffuse power exact whatever the sampled delays.
    """
    decay = cfg.delay_spread_s / 3 if cfg.delay_spread_s > 0 else 1.0
    weights = np.exp(-(delays - delays[0]) / decay)
    return cfg.diffuse_power * weights / weights.sum()


def _complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)


def sample_channel(cfg: ScenarioConfig, rng: np.random.Generator) -> MultipathChannel:
    """Draw one Alice-Bob channel realization.

    In LoS scenarios the first diffuse delay is pinned to zero and a
    deterministic component of power ``K * diffuse_power`` is added there.
    """
    if cfg.num_taps == 1:
        delays = np.zeros(1)
    else:
        delays = np.sort(rng.uniform(0.0, cfg.delay_spread_s, cfg.num_taps))
    variances = tap_variances(cfg, delays)
    amplitudes = np.sqrt(variances) * _complex_normal(rng, cfg.num_taps)
    if cfg.los:
        delays = delays - delays[0]
        amplitudes[0] += math.sqrt(cfg.k_factor * cfg.diffuse_power)
    return MultipathChannel(amplitudes, delays, cfg.carrier_freq_hz)


def eve_correlation(offset_wavelengths: float) -> float:
    """Per-tap amplitude correlation ``J0(2*pi*d/lambda)`` clamped to ``[0, 1]``."""
    return float(np.clip(j0(2 * np.pi * offset_wavelengths), 0.0, 1.0))


def sample_eve_channel(
    cfg: ScenarioConfig, legit: MultipathChannel, rng: np.random.Generator
) -> MultipathChannel:
    """Draw Eve's channel, correlated tap-by-tap with ``legit``.

    Delays are shared with the legitimate channel.  The LoS tap keeps its
    magnitude but gets an independent phase unless Eve sits on Bob.
    """
    if legit.num_taps != cfg.num_taps:
        raise UsageError(f"legit channel has {legit.num_taps} taps, config says {cfg.num_taps}")
    rho = eve_correlation(cfg.eve_offset_wavelengths)
    if rho == 1.0:
        return legit
    los = math.sqrt(cfg.k_factor * cfg.diffuse_power) if cfg.los else 0.0
    diffuse = legit.amplitudes.copy()
    diffuse[0] -= los
    fresh = np.sqrt(tap_variances(cfg, legit.delays_s)) * _complex_normal(rng, cfg.num_taps)
    amplitudes = rho * diffuse + math.sqrt(1 - rho**2) * fresh
    if cfg.los:
        amplitudes[0] += los * np.exp(2j * np.pi * rng.uniform())
    return MultipathChannel(amplitudes, legit.delays_s, legit.carrier_freq_hz)


def apply_channel(
    x: ComplexSignal,
    h: MultipathChannel,
    noise_var: float,
    rng: Optional[np.random.Generator] = None,
) -> ComplexSignal:
    """Full linear convolution of ``x`` with ``h`` plus circular AWGN."""
    if noise_var < 0:
        raise ConfigurationError("noise_var must be >= 0")
    y = np.convolve(x.samples, h.discrete_taps(x.sample_rate_hz))
    if noise_var > 0:
        if rng is None:
            raise UsageError("noise requires an rng")
        y = y + math.sqrt(noise_var) * _complex_normal(rng, y.size)
    return ComplexSignal(y, x.sample_rate_hz)


def circular_response(x: np.ndarray, h: MultipathChannel, sample_rate_hz: float) -> np.ndarray:
    """Steady-state response of a periodically repeated probe (one period)."""
    taps = h.discrete_taps(sample_rate_hz)
    n = x.size
    folded = np.zeros(n, dtype=complex)
    np.add.at(folded, np.arange(taps.size) % n, taps)
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(folded))


_STREAMS = {"channel": 1, "eve": 2, "noise": 3, "hash": 4}


def substream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Independent generator keyed by (run seed, purpose, indices)."""
    key = [int(seed), _STREAMS[purpose], *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(key))

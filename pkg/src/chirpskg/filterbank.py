"""Filterbank advantage distillation and the Gamma moment-matching model.

Each party splits its received probe into ``N`` sub-bands of width ``B/N``
with modulated copies ``g_n[k] = g[k] exp(j 2 pi f_n k / f_s)`` of a
low-pass prototype, then records the time-averaged output power of every
sub-band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import optimize, signal

from .errors import ConfigurationError, DomainError, UsageError
from .waveform import ComplexSignal

TAPS_PER_FILTER = 8


@dataclass(frozen=True)
class FilterbankSpec:
    num_filters: int
    bandwidth_hz: float
    prototype_taps: Optional[int] = None
    prototype_kind: str = "windowed-sinc"
    sample_rate_hz: Optional[float] = None

    def __post_init__(self):
        if int(self.num_filters) != self.num_filters or self.num_filters < 1:
            raise ConfigurationError("num_filters must be an integer >= 1")
        if not self.bandwidth_hz > 0:
            raise ConfigurationError("bandwidth_hz must be positive")
        if self.sample_rate_hz is None:
            object.__setattr__(self, "sample_rate_hz", float(self.bandwidth_hz))
        if self.sample_rate_hz < self.bandwidth_hz:
            raise ConfigurationError("sample_rate_hz below bandwidth_hz")
        if self.prototype_taps is None:
            object.__setattr__(self, "prototype_taps", TAPS_PER_FILTER * int(self.num_filters))
        if self.prototype_kind != "windowed-sinc":
            raise ConfigurationError(f"unknown prototype_kind {self.prototype_kind!r}")

    @property
    def filter_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.num_filters

    def center_frequencies(self) -> np.ndarray:
        n = np.arange(1, self.num_filters + 1)
        return -self.bandwidth_hz * (self.num_filters - 2 * n + 1) / (2 * self.num_filters)


@dataclass(frozen=True)
class PowerVector:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or np.any(values < 0):
            raise ConfigurationError("power vector must be 1-D and non-negative")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigurationError("Gamma shape and scale must be positive")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale**2


def center_frequency(n: int, spec: FilterbankSpec) -> float:
    """Centre of sub-band ``n`` (1-based): ``-B(N - 2n + 1) / (2N)``."""
    if not 1 <= n <= spec.num_filters:
        raise DomainError(f"filter index {n} outside 1..{spec.num_filters}")
    N = spec.num_filters
    return -spec.bandwidth_hz * (N - 2 * n + 1) / (2 * N)


def _response_at(taps: np.ndarray, freq: float) -> float:
    k = np.arange(taps.size)
    return abs(np.sum(taps * np.exp(-2j * np.pi * freq * k)))


def design_prototype(spec: FilterbankSpec) -> np.ndarray:
    """Hamming-windowed sinc low-pass with unit DC gain.

    The sinc cutoff is tuned so the -3 dB point falls exactly on the
    sub-band edge ``B/(2N)``; adjacent filters then cross at half power and
    the bank is close to power complementary.  When the band edge reaches
    Nyquist (``N = 1`` at critical sampling) the prototype is a centred
    unit impulse.
    """
    taps = spec.prototype_taps
    if taps < 3:
        raise ConfigurationError(f"prototype_taps must be >= 3, got {taps}")
    edge = spec.filter_bandwidth_hz / 2 / spec.sample_rate_hz
    if edge >= 0.5 - 1e-12:
        proto = np.zeros(taps)
        proto[(taps - 1) // 2] = 1.0
        return proto

    def excess(cutoff):
        h = signal.firwin(taps, cutoff, window="hamming", fs=1.0)
        return _response_at(h, edge) ** 2 - 0.5

    hi = min(0.5 - 1e-9, 2 * edge)
    if excess(hi) < 0:
        raise ConfigurationError(f"{taps} taps cannot reach -3 dB at the band edge")
    cutoff = optimize.brentq(excess, edge * 0.5, hi, xtol=1e-13)
    return signal.firwin(taps, cutoff, window="hamming", fs=1.0)


@dataclass(frozen=True)
class Filterbank:
    spec: FilterbankSpec
    prototype: np.ndarray
    filters: np.ndarray
    _fft_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_filters(self) -> int:
        return self.spec.num_filters

    @property
    def taps(self) -> int:
        return self.prototype.size

    def __len__(self) -> int:
        return self.num_filters

    def __iter__(self):
        return iter(self.filters)

    def __getitem__(self, n):
        return self.filters[n]

    def spectra(self, nfft: int) -> np.ndarray:
        if nfft not in self._fft_cache:
            self._fft_cache[nfft] = sfft.fft(self.filters, nfft, axis=-1)
        return self._fft_cache[nfft]


def build_filterbank(spec: FilterbankSpec) -> Filterbank:
    proto = design_prototype(spec)
    k = np.arange(proto.size)
    freqs = spec.center_frequencies() / spec.sample_rate_hz
    filters = proto[None, :] * np.exp(2j * np.pi * freqs[:, None] * k[None, :])
    return Filterbank(spec, proto, filters)


def filter_outputs(samples: np.ndarray, bank: Filterbank) -> np.ndarray:
    """Fully-overlapped outputs ``(g_n * y)_k`` for a batch of signals.

    ``samples`` has shape ``(..., L)``; the result has shape
    ``(..., N, L - taps + 1)``.
    """
    samples = np.asarray(samples, dtype=complex)
    length = samples.shape[-1]
    if length < bank.taps:
        raise UsageError(f"signal of {length} samples shorter than {bank.taps}-tap prototype")
    # Circular convolution over the signal length is exact on the valid span.
    Y = sfft.fft(samples, axis=-1)
    out = sfft.ifft(Y[..., None, :] * bank.spectra(length), axis=-1)
    return out[..., bank.taps - 1 :]


def power_matrix(samples: np.ndarray, bank: Filterbank, chunk: int = 32) -> np.ndarray:
    """Per-filter mean output power for each row of ``samples``."""
    samples = np.atleast_2d(samples)
    out = np.empty((samples.shape[0], bank.num_filters))
    for start in range(0, samples.shape[0], chunk):
        y = filter_outputs(samples[start : start + chunk], bank)
        out[start : start + chunk] = np.mean(y.real**2 + y.imag**2, axis=-1)
    return out


def circular_power_matrix(samples: np.ndarray, bank: Filterbank) -> np.ndarray:
    """Per-filter power of circular filter outputs over one probe period.

    This is the receiver that drops the cyclic prefix and filters the
    remaining ``L`` samples circularly; by Parseval the power is
    ``sum_f |G_n(f)|**2 |Y(f)|**2 / L**2``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=complex))
    L = samples.shape[-1]
    if L < bank.taps:
        raise UsageError(f"signal of {L} samples shorter than {bank.taps}-tap prototype")
    Y = sfft.fft(samples, axis=-1)
    gains = np.abs(bank.spectra(L)) ** 2
    return (Y.real**2 + Y.imag**2) @ gains.T / L**2


def circular_outputs(samples: np.ndarray, bank: Filterbank) -> np.ndarray:
    """Circular filter outputs ``(g_n (*) y)_k`` over one period, shape ``(..., N, L)``."""
    samples = np.asarray(samples, dtype=complex)
    L = samples.shape[-1]
    if L < bank.taps:
        raise UsageError(f"signal of {L} samples shorter than {bank.taps}-tap prototype")
    return sfft.ifft(sfft.fft(samples, axis=-1)[..., None, :] * bank.spectra(L), axis=-1)


def measure_powers(y, bank: Filterbank) -> PowerVector:
    """Time-averaged output power of every sub-band over the valid span."""
    samples = y.samples if isinstance(y, ComplexSignal) else np.asarray(y)
    if samples.ndim != 1:
        raise UsageError("measure_powers takes a single signal; use power_matrix for batches")
    return PowerVector(power_matrix(samples, bank)[0])


def gamma_approx(
    components: Sequence[tuple], noise_var: float, samples_per_filter: float
) -> GammaParams:
    """Single-Gamma approximation of ``sum_m Gamma(k_m, t_m)`` plus noise.

    shape = (sum k_m t_m + 2 s2)**2 / (sum k_m t_m**2 + 8 s2**2 / (K - 1))
    scale = (sum k_m t_m + 2 s2) / shape
    """
    if samples_per_filter < 2:
        raise DomainError(f"samples_per_filter must be >= 2, got {samples_per_filter}")
    if noise_var < 0:
        raise DomainError("noise_var must be >= 0")
    comps = np.asarray(components, dtype=float).reshape(-1, 2)
    if np.any(comps <= 0):
        raise DomainError("component shapes and scales must be positive")
    kappa, theta = comps[:, 0], comps[:, 1]
    mean = float(np.sum(kappa * theta)) + 2 * noise_var
    spread = float(np.sum(kappa * theta**2)) + 8 * noise_var**2 / (samples_per_filter - 1)
    if mean <= 0 or spread <= 0:
        raise DomainError("approximation needs a component or positive noise")
    shape = mean**2 / spread
    return GammaParams(shape, mean / shape)


def nominal_samples_per_filter(num_samples: int, num_filters: int) -> float:
    """Samples of a critically sampled probe that fall in one sub-band."""
    return num_samples / num_filters


def _noise_autocorr(g: np.ndarray, noise_var: float) -> np.ndarray:
    """``R(d) = E[w_{k+d} conj(w_k)]`` for d = -(taps-1)..taps-1."""
    return noise_var * np.correlate(g, g, mode="full")


def power_moments(clean: np.ndarray, g: np.ndarray, noise_var: float, circular: bool = False):
    """Exact mean and variance of one sub-band power under AWGN.

    ``clean`` is the noise-free filter output over the averaging window
    and the measurement is ``mean_k |s_k + w_k|**2`` with ``w = g * noise``.
    With ``circular=True`` the window is one full period and the filter is
    applied circularly, so noise correlations wrap around.
    Returns ``(signal_power, cross_var, noise_power, noise_var_of_mean)``.
    """
    clean = np.asarray(clean, dtype=complex)
    K = clean.size
    R = _noise_autocorr(g, noise_var)
    lags = np.arange(-(g.size - 1), g.size)
    if circular:
        Rc = np.zeros(K, dtype=complex)
        np.add.at(Rc, lags % K, R)
        noise_power = float(Rc[0].real)
        noise_var_mean = float(np.sum(np.abs(Rc) ** 2)) / K
        # (Rc circularly convolved with s)[k] = sum_k' Rc(k - k') s_k'
        quad = np.vdot(clean, np.fft.ifft(np.fft.fft(Rc) * np.fft.fft(clean)))
    else:
        keep = np.abs(lags) < K
        R, lags = R[keep], lags[keep]
        noise_power = float(R[lags == 0].real[0])
        noise_var_mean = float(np.sum((K - np.abs(lags)) * np.abs(R) ** 2)) / K**2
        # sum_{k,k'} conj(s_k) s_k' R(k - k')
        conv = np.convolve(clean, R)
        offset = -lags.min()
        quad = np.vdot(clean, conv[offset : offset + K])
    cross_var = 2 * float(quad.real) / K**2
    signal_power = float(np.mean(np.abs(clean) ** 2))
    return signal_power, max(cross_var, 0.0), noise_power, noise_var_mean


def moment_matched_gamma(
    clean: np.ndarray, g: np.ndarray, noise_var: float, circular: bool = False
) -> GammaParams:
    """Two-moment Gamma prediction for one sub-band via :func:`gamma_approx`.

    The signal-noise cross term becomes one Gamma component with the
    signal power as its mean; the noise enters as ``2 s2 = noise power``
    with ``K - 1 = 2 * (effective independent complex samples)``.
    """
    ps, vx, pw, vw = power_moments(clean, g, noise_var, circular)
    components = [(ps**2 / vx, vx / ps)] if ps > 0 and vx > 0 else []
    if pw <= 0:
        if not components:
            raise DomainError("noise-free zero signal has no distribution")
        return gamma_approx(components, 0.0, 2)
    return gamma_approx(components or np.empty((0, 2)), pw / 2, 1 + 2 * pw**2 / vw)

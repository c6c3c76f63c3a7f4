import math

import numpy as np
import pytest

from chirpskg.errors import ConfigurationError, DomainError
from chirpskg.waveform import ChirpSpec, ComplexSignal, generate_chirp, instantaneous_frequency

PROBE = ChirpSpec(17.1875e-6, 70e6, center_freq_hz=3.75e9)


def test_probe_sample_count():
    # ceil(17.1875e-6 * 70e6) = ceil(1203.125)
    assert PROBE.num_samples == 1204
    assert len(generate_chirp(PROBE)) == 1204


def test_single_sample_unit_magnitude():
    x = generate_chirp(ChirpSpec(1.0, 1.0, sample_rate_hz=1.0))
    assert len(x) == 1
    assert abs(x.samples[0]) == pytest.approx(1.0)


@pytest.mark.parametrize("T,B,fs", [(17.1875e-6, 70e6, None), (1e-3, 2e5, 5e5), (2.0, 3.0, 7.0)])
def test_constant_envelope(T, B, fs):
    x = generate_chirp(ChirpSpec(T, B, sample_rate_hz=fs)).samples
    mag = np.abs(x)
    assert np.allclose(mag, 1 / T, rtol=1e-12)
    assert mag.max() - mag.min() <= 1e-12 / T


def test_phase_increments_are_affine():
    x = generate_chirp(PROBE).samples
    dphi = np.angle(x[1:] * np.conj(x[:-1]))
    k = np.arange(dphi.size)
    # Oracle: the increment of pi*c*(t - T/2)^2 between samples k and k+1.
    fs, c, T = PROBE.sample_rate_hz, PROBE.chirp_rate, PROBE.duration_s
    t = k / fs - T / 2
    expected = np.pi * c * ((t + 1 / fs) ** 2 - t**2)
    wrapped = np.angle(np.exp(1j * (dphi - expected)))
    assert np.max(np.abs(wrapped)) < 1e-9
    slope, icpt = np.polyfit(k, np.unwrap(dphi), 1)
    resid = np.unwrap(dphi) - (slope * k + icpt)
    assert np.max(np.abs(resid)) < 1e-9


def test_energy_within_band():
    spec = ChirpSpec(1e-4, 2e6, sample_rate_hz=8e6)  # T*B = 200
    x = generate_chirp(spec).samples
    X = np.fft.fft(x)
    f = np.fft.fftfreq(x.size, 1 / spec.sample_rate_hz)
    inside = np.abs(f) <= spec.bandwidth_hz / 2
    assert np.sum(np.abs(X[inside]) ** 2) / np.sum(np.abs(X) ** 2) >= 0.95


def test_instantaneous_frequency_endpoints():
    fc, B, T = PROBE.center_freq_hz, PROBE.bandwidth_hz, PROBE.duration_s
    assert instantaneous_frequency(PROBE, 0.0) == pytest.approx(fc - B / 2)
    assert instantaneous_frequency(PROBE, T) == pytest.approx(fc + B / 2)
    assert instantaneous_frequency(PROBE, T / 2) == pytest.approx(fc)


@pytest.mark.parametrize("t", [-1e-9, 17.1875e-6 * 1.001])
def test_instantaneous_frequency_domain(t):
    with pytest.raises(DomainError):
        instantaneous_frequency(PROBE, t)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(duration_s=0, bandwidth_hz=1),
        dict(duration_s=1, bandwidth_hz=-1),
        dict(duration_s=1, bandwidth_hz=10, sample_rate_hz=5),
        dict(duration_s=math.inf, bandwidth_hz=1),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigurationError):
        ChirpSpec(**kwargs)


def test_wavelength():
    assert PROBE.wavelength_m == pytest.approx(299_792_458.0 / 3.75e9)


def test_signal_validation():
    with pytest.raises(ConfigurationError):
        ComplexSignal(np.array([]), 1.0)
    with pytest.raises(ConfigurationError):
        ComplexSignal(np.ones(3), 0.0)
    assert ComplexSignal(np.ones(3) * 2, 1.0).energy == pytest.approx(12.0)

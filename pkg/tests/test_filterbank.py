import numpy as np
import pytest

from chirpskg.errors import ConfigurationError, DomainError, UsageError
from chirpskg.filterbank import (
    FilterbankSpec,
    GammaParams,
    PowerVector,
    build_filterbank,
    center_frequency,
    circular_outputs,
    circular_power_matrix,
    design_prototype,
    filter_outputs,
    gamma_approx,
    measure_powers,
    moment_matched_gamma,
    power_matrix,
    power_moments,
)
from chirpskg.waveform import ComplexSignal

B = 70e6


def test_two_filter_centres():
    spec = FilterbankSpec(2, 4.0)
    assert center_frequency(1, spec) == -1.0
    assert center_frequency(2, spec) == 1.0


def test_five_filter_middle_is_dc():
    assert center_frequency(3, FilterbankSpec(5, B)) == 0.0


@pytest.mark.parametrize("N", range(1, 65))
def test_grid(N):
    spec = FilterbankSpec(N, B)
    f = np.array([center_frequency(n, spec) for n in range(1, N + 1)])
    assert abs(f.sum()) <= 1e-6
    assert np.allclose(np.diff(f), B / N, rtol=0, atol=1e-6)
    assert np.all(np.abs(f) < B / 2)
    assert np.array_equal(f, spec.center_frequencies())


@pytest.mark.parametrize("n", [0, 5])
def test_centre_index_range(n):
    with pytest.raises(DomainError):
        center_frequency(n, FilterbankSpec(4, B))


def test_single_filter_is_prototype():
    bank = build_filterbank(FilterbankSpec(1, B))
    assert np.allclose(bank[0], bank.prototype)


@pytest.mark.parametrize("N", [2, 8, 16])
def test_filters_are_shifted_copies(N):
    bank = build_filterbank(FilterbankSpec(N, B))
    nfft = 64 * N
    mags = np.abs(np.fft.fft(bank.filters, nfft, axis=-1))
    for n in range(1, N):
        assert np.allclose(mags[n], np.roll(mags[0], n * nfft // N), atol=1e-9)


@pytest.mark.parametrize("N", [2, 4, 8, 16, 32, 64])
def test_half_power_at_band_edge(N):
    spec = FilterbankSpec(N, B)
    g = design_prototype(spec)
    f = np.linspace(0, 1.5 / N, 20001)  # normalized to fs = B
    H = np.abs(np.exp(-2j * np.pi * np.outer(f, np.arange(g.size))) @ g) ** 2
    edge = f[np.argmax(H < 0.5)]
    assert abs(edge - 1 / (2 * N)) <= 0.05 / N
    assert g.sum() == pytest.approx(1.0)
    assert g.size == 8 * N


def test_prototype_taps_minimum():
    with pytest.raises(ConfigurationError):
        build_filterbank(FilterbankSpec(4, B, prototype_taps=2))


def test_zero_signal_powers():
    bank = build_filterbank(FilterbankSpec(8, B))
    assert np.all(measure_powers(np.zeros(200, complex), bank).values == 0)


@pytest.mark.parametrize("N", [2, 4, 8, 16, 32, 64])
def test_sinusoid_lands_in_its_filter(N):
    spec = FilterbankSpec(N, B)
    bank = build_filterbank(spec)
    k = np.arange(4096)
    for n in range(1, N + 1):
        y = np.exp(2j * np.pi * center_frequency(n, spec) / B * k)
        p = measure_powers(ComplexSignal(y, B), bank).values
        assert p[n - 1] / p.sum() >= 0.9


def test_power_scaling(rng):
    bank = build_filterbank(FilterbankSpec(8, B))
    y = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    p = measure_powers(y, bank).values
    assert np.allclose(measure_powers(3 * y, bank).values, 9 * p)


@pytest.mark.parametrize("N", [4, 16, 64])
def test_white_noise_power_roughly_conserved(rng, N):
    bank = build_filterbank(FilterbankSpec(N, B))
    y = (rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)) / np.sqrt(2)
    total = measure_powers(y, bank).values.sum()
    assert total == pytest.approx(np.mean(np.abs(y) ** 2), rel=0.10)


def test_short_signal_rejected():
    bank = build_filterbank(FilterbankSpec(8, B))
    with pytest.raises(UsageError):
        measure_powers(np.ones(10), bank)
    with pytest.raises(UsageError):
        circular_power_matrix(np.ones(10), bank)


def test_outputs_match_direct_convolution(rng):
    bank = build_filterbank(FilterbankSpec(4, B))
    y = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    out = filter_outputs(y, bank)
    for n in range(4):
        assert np.allclose(out[n], np.convolve(y, bank[n], mode="valid"))
    assert np.allclose(power_matrix(y, bank)[0], np.mean(np.abs(out) ** 2, axis=-1))


def test_circular_parseval_matches_time_domain(rng):
    bank = build_filterbank(FilterbankSpec(8, B))
    y = rng.standard_normal((3, 256)) + 1j * rng.standard_normal((3, 256))
    direct = np.mean(np.abs(circular_outputs(y, bank)) ** 2, axis=-1)
    assert np.allclose(circular_power_matrix(y, bank), direct)


def test_gamma_single_component_is_itself():
    g = gamma_approx([(1.0, 1.0)], 0.0, 2)
    assert g.shape == pytest.approx(1.0) and g.scale == pytest.approx(1.0)


def test_gamma_two_components_hand_value():
    g = gamma_approx([(2, 3), (4, 5)], 0.0, 10)
    assert g.shape == pytest.approx(676 / 118)
    assert g.scale == pytest.approx(26 * 118 / 676)
    assert g.mean == pytest.approx(26.0)


def test_gamma_k_too_small():
    with pytest.raises(DomainError):
        gamma_approx([(1, 1)], 0.1, 1)


def _mc_sum(rng, kappa, theta, s2, K, draws):
    x = sum(rng.gamma(k, t, draws) for k, t in zip(kappa, theta))
    # Sample variance of K real Gaussians of variance 2 s2: mean 2 s2, var 8 s2^2 / (K - 1).
    return x + 2 * s2 * rng.chisquare(K - 1, draws) / (K - 1)


def test_gamma_monte_carlo(rng):
    for _ in range(5):
        m = rng.integers(1, 5)
        kappa, theta = rng.uniform(0.5, 4, m), rng.uniform(0.2, 2, m)
        s2, K = rng.uniform(0.1, 1), int(rng.integers(5, 100))
        x = _mc_sum(rng, kappa, theta, s2, K, 100_000)
        g = gamma_approx(list(zip(kappa, theta)), s2, K)
        assert x.mean() == pytest.approx(g.mean, rel=0.03)
        assert x.var() == pytest.approx(g.var, rel=0.10)


@pytest.mark.parametrize("circular", [False, True])
def test_power_moments_against_monte_carlo(rng, circular):
    bank = build_filterbank(FilterbankSpec(4, B))
    L, nv, frames = 128, 0.5, 20_000
    clean_in = np.exp(2j * np.pi * 0.13 * np.arange(L))
    if circular:
        clean = circular_outputs(clean_in, bank)[1]
        noise = (rng.standard_normal((frames, L)) + 1j * rng.standard_normal((frames, L))) * np.sqrt(nv / 2)
        p = circular_power_matrix(clean_in + noise, bank)[:, 1]
    else:
        clean = filter_outputs(clean_in, bank)[1]
        noise = (rng.standard_normal((frames, L)) + 1j * rng.standard_normal((frames, L))) * np.sqrt(nv / 2)
        p = power_matrix(clean_in + noise, bank)[:, 1]
    ps, vx, pw, vw = power_moments(clean, bank[1], nv, circular)
    assert p.mean() == pytest.approx(ps + pw, rel=0.01)
    assert p.var() == pytest.approx(vx + vw, rel=0.05)
    g = moment_matched_gamma(clean, bank[1], nv, circular)
    assert g.mean == pytest.approx(ps + pw)
    assert g.var == pytest.approx(vx + vw)


def test_value_types():
    with pytest.raises(ConfigurationError):
        PowerVector([-1.0])
    with pytest.raises(ConfigurationError):
        GammaParams(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        FilterbankSpec(0, B)
    with pytest.raises(ConfigurationError):
        FilterbankSpec(4, B, sample_rate_hz=B / 2)

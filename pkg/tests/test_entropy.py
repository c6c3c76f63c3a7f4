import math

import numpy as np
import pytest

from chirpskg.entropy import (
    EntropyEstimate,
    SampleSet,
    check_budget,
    cond_min_entropy,
    cond_min_entropy_exact,
    leakage,
    min_entropy,
    min_entropy_exact,
    nn_estimate,
)
from chirpskg.errors import ConfigurationError, UsageError

# P[secret, observation] for a uniform 2-bit secret whose first bit is revealed.
FIRST_BIT = np.zeros((4, 2))
for a in range(4):
    FIRST_BIT[a, a >> 1] = 0.25


def test_min_entropy_exact_examples():
    assert min_entropy(np.full(4, 0.25)).bits == pytest.approx(2.0)
    assert min_entropy(np.array([1.0, 0.0])).bits == 0.0
    assert min_entropy(np.array([0.5, 0.25, 0.25])).bits == pytest.approx(1.0)


def test_min_entropy_counts():
    est = min_entropy([0, 1, 2, 3, 0, 1, 2, 3])
    assert est.bits == pytest.approx(2.0) and est.estimator == "frequentist"
    with pytest.raises(UsageError):
        min_entropy([])


def test_first_bit_revealed():
    worst = cond_min_entropy_exact(FIRST_BIT, "worst")
    avg = cond_min_entropy_exact(FIRST_BIT, "average")
    h = min_entropy_exact(FIRST_BIT)
    assert worst.bits == 1.0 and avg.bits == 1.0 and h.bits == 2.0
    assert leakage(h, worst) == 1.0


def test_independent_and_deterministic_tables():
    indep = np.full((4, 3), 1 / 12)
    for mode in ("worst", "average"):
        assert cond_min_entropy_exact(indep, mode).bits == pytest.approx(2.0)
    assert leakage(min_entropy_exact(indep), cond_min_entropy_exact(indep, "average")) == pytest.approx(0.0)
    reveal = np.eye(8) / 8
    assert cond_min_entropy_exact(reveal, "worst").bits == 0.0
    assert leakage(min_entropy_exact(reveal), cond_min_entropy_exact(reveal)) == pytest.approx(3.0)


def test_frequentist_matches_hand_counts():
    # Observation 0: secrets {0, 0, 1}; observation 1: secrets {2, 3}.
    s = SampleSet.from_ints([0, 0, 1, 2, 3], [0, 0, 0, 1, 1], 2, 1)
    worst = cond_min_entropy(s, "worst")
    avg = cond_min_entropy(s, "average")
    assert worst.bits == pytest.approx(-math.log2(2 / 3))
    assert avg.bits == pytest.approx(-math.log2(3 / 5))
    assert worst.low_support == 2


def test_frequentist_independent_uniform(rng):
    a, o = rng.integers(0, 4, (2, 200_000))
    s = SampleSet.from_ints(a, o, 2, 2)
    assert cond_min_entropy(s, "average").bits == pytest.approx(2.0, abs=0.02)
    assert cond_min_entropy(SampleSet.from_ints(a, a, 2, 2), "worst").bits == 0.0


def _random_table(rng, sb, ob):
    return rng.dirichlet(np.ones(2 ** (sb + ob))).reshape(2**sb, 2**ob)


def test_conditioning_reduces_average_entropy(rng):
    for _ in range(20):
        P = _random_table(rng, 3, 2)
        assert cond_min_entropy_exact(P, "average").bits <= min_entropy_exact(P).bits + 1e-12


def test_extra_observation_never_increases_average_entropy(rng):
    # Joint of (secret, e, s); conditioning on (e, s) vs e alone.
    for _ in range(20):
        P = rng.dirichlet(np.ones(8 * 4 * 2)).reshape(8, 4, 2)
        h_e = cond_min_entropy_exact(P.sum(axis=2), "average").bits
        h_es = cond_min_entropy_exact(P.reshape(8, 8), "average").bits
        assert h_es <= h_e + 1e-12


def test_frequentist_converges_on_small_tables(rng):
    for _ in range(5):
        P = _random_table(rng, 2, 2)
        cells = rng.choice(P.size, 1_000_000, p=P.ravel())
        s = SampleSet.from_ints(cells // 4, cells % 4, 2, 2)
        for mode in ("worst", "average"):
            exact = cond_min_entropy_exact(P, mode).bits
            assert cond_min_entropy(s, mode).bits == pytest.approx(exact, abs=0.05)


def test_nn_copy_channel(rng):
    a = rng.integers(0, 4, 100_000)
    est = nn_estimate(SampleSet.from_ints(a, a, 2, 2))
    assert est.bits <= 0.1 and est.estimator == "nearest-neighbor"


def test_nn_independent(rng):
    a, o = rng.integers(0, 4, (2, 100_000))
    assert nn_estimate(SampleSet.from_ints(a, o, 2, 2)).bits == pytest.approx(2.0, abs=0.1)


def test_nn_single_observation_falls_back(rng):
    a = rng.integers(0, 4, 1000)
    s = SampleSet.from_ints(a, np.zeros(1000, int), 2, 3)
    est = nn_estimate(s)
    assert est.estimator == "frequentist"
    assert est.bits == cond_min_entropy(s, "average").bits


def test_nn_uses_hamming_neighbours():
    # Observations 000/001 carry secret 0, 110/111 carry secret 1; each value is
    # seen once, so every record is predicted from its one-bit-away neighbour.
    s = SampleSet.from_ints([0, 0, 1, 1], [0b000, 0b001, 0b110, 0b111], 1, 3)
    assert nn_estimate(s, k=1).bits == 0.0


def test_nn_needs_two_records():
    with pytest.raises(UsageError):
        nn_estimate(SampleSet.from_ints([0], [0], 1, 1))


def test_budget_guard():
    check_budget(12, 12)
    with pytest.raises(UsageError):
        check_budget(13, 12)
    s = SampleSet.from_ints([0, 1], [0, 1], 4, 4)
    with pytest.raises(UsageError):
        cond_min_entropy(s, "worst", budget=2**7)


def test_leakage_mode_mismatch():
    a = EntropyEstimate(2.0, "exact", 0)
    b = EntropyEstimate(1.0, "frequentist", 10)
    with pytest.raises(UsageError):
        leakage(a, b)


def test_csv_round_trip(rng):
    a, o = rng.integers(0, 2**10, (2, 50))
    s = SampleSet.from_ints(a, o, 10, 10)
    text = s.to_csv()
    assert text.splitlines()[0] == "secret_hex,observation_hex"
    assert text.splitlines()[1] == f"{a[0]:03x},{o[0]:03x}"
    back = SampleSet.from_csv(text, 10, 10)
    assert np.array_equal(back.secrets, s.secrets) and np.array_equal(back.observations, s.observations)


def test_estimate_invariants():
    with pytest.raises(ConfigurationError):
        EntropyEstimate(-0.1, "exact", 0)
    with pytest.raises(ConfigurationError):
        EntropyEstimate(1.0, "magic", 0)
    with pytest.raises(ConfigurationError):
        cond_min_entropy_exact(FIRST_BIT, "best")


def test_clamped_to_secret_length():
    s = SampleSet.from_ints([0, 1], [0, 0], 1, 1)
    assert cond_min_entropy(s, "average").bits <= 1.0

"""Min-entropy, conditional min-entropy and leakage estimators.

Three estimators are available:

* ``exact`` works on a known joint probability table ``P[secret, observation]``;
* ``frequentist`` plugs empirical frequencies of a :class:`SampleSet` into the
  same formulas;
* ``nearest-neighbor`` predicts each secret from its nearest observations
  (Hamming metric, leave-one-out) and converts the hit rate into bits.

Conditioning comes in two flavours.  ``worst`` is
``-log2 max_{a,o} p(a|o)``; ``average`` is the guessing form
``-log2 sum_o p(o) max_a p(a|o)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .errors import ConfigurationError, UsageError

ESTIMATORS = ("exact", "frequentist", "nearest-neighbor")
CONDITIONING = ("worst", "average")
DEFAULT_BUDGET = 2**24
LOW_SUPPORT = 5


@dataclass(frozen=True)
class EntropyEstimate:
    bits: float
    estimator: str
    sample_count: int
    conditioning: Optional[str] = None
    secret_bits: Optional[int] = None
    low_support: int = 0

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError(f"unknown estimator {self.estimator!r}")
        if self.bits < 0:
            raise ConfigurationError("entropy cannot be negative")


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return ((values[:, None] >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


@dataclass(frozen=True)
class SampleSet:
    """Joint samples of (secret, observation) as fixed-width bit rows."""

    secrets: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.secrets, dtype=np.uint8)
        o = np.asarray(self.observations, dtype=np.uint8)
        if s.ndim == 1:
            s = s[:, None]
        if o.ndim == 1:
            o = o[:, None]
        if s.ndim != 2 or o.ndim != 2 or s.shape[0] != o.shape[0] or s.shape[0] < 1:
            raise UsageError("secrets and observations need the same number (>= 1) of rows")
        if s.shape[1] > 62 or o.shape[1] > 62:
            raise UsageError("symbols wider than 62 bits are not supported")
        object.__setattr__(self, "secrets", s)
        object.__setattr__(self, "observations", o)

    @classmethod
    def from_ints(cls, secrets, observations, secret_bits: int, observation_bits: int):
        return cls(
            _int_to_bits(np.asarray(secrets), secret_bits),
            _int_to_bits(np.asarray(observations), observation_bits),
        )

    def __len__(self) -> int:
        return self.secrets.shape[0]

    @property
    def secret_bits(self) -> int:
        return self.secrets.shape[1]

    @property
    def observation_bits(self) -> int:
        return self.observations.shape[1]

    def secret_ints(self) -> np.ndarray:
        return _bits_to_int(self.secrets)

    def observation_ints(self) -> np.ndarray:
        return _bits_to_int(self.observations)

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``secret_hex,observation_hex`` rows (MSB-first, zero padded)."""
        out = fh if fh is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["secret_hex", "observation_hex"])
        sw = max(1, -(-self.secret_bits // 4))
        ow = max(1, -(-self.observation_bits // 4))
        for a, o in zip(self.secret_ints(), self.observation_ints()):
            writer.writerow([f"{int(a):0{sw}x}", f"{int(o):0{ow}x}"])
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, source, secret_bits: int, observation_bits: int) -> "SampleSet":
        text = source if isinstance(source, str) else source.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise UsageError("no samples in CSV")
        secrets = [int(r["secret_hex"], 16) for r in rows]
        obs = [int(r["observation_hex"], 16) for r in rows]
        return cls.from_ints(secrets, obs, secret_bits, observation_bits)


def check_budget(secret_bits: int, observation_bits: int, budget: int = DEFAULT_BUDGET):
    if 2 ** (secret_bits + observation_bits) > budget:
        raise UsageError(
            f"joint alphabet 2^{secret_bits + observation_bits} exceeds the budget of {budget} cells"
        )


def _clamp(bits: float, width: Optional[int]) -> float:
    bits = max(0.0, float(bits))
    if width is not None:
        bits = min(bits, float(width))
    return bits + 0.0


def min_entropy(data: Union[np.ndarray, SampleSet, Iterable], budget: int = DEFAULT_BUDGET) -> EntropyEstimate:
    """``-log2 max_a p(a)``.

    A 1-D float array summing to one is treated as an exact distribution;
    a :class:`SampleSet` (secrets only) or a sequence of symbols is counted.
    """
    if isinstance(data, SampleSet):
        check_budget(data.secret_bits, 0, budget)
        symbols, width = data.secret_ints(), data.secret_bits
    else:
        arr = np.asarray(list(data) if not isinstance(data, np.ndarray) else data)
        if arr.size == 0:
            raise UsageError("min-entropy of an empty input")
        if arr.dtype.kind == "f":
            if np.any(arr < 0) or not math.isclose(arr.sum(), 1.0, rel_tol=1e-9, abs_tol=1e-12):
                raise UsageError("an exact distribution must be non-negative and sum to 1")
            return EntropyEstimate(_clamp(-math.log2(arr.max()), None), "exact", 0)
        symbols, width = arr.ravel(), None
    if len(symbols) == 0:
        raise UsageError("min-entropy of an empty input")
    _, counts = np.unique(symbols, return_counts=True)
    bits = -math.log2(counts.max() / len(symbols))
    return EntropyEstimate(_clamp(bits, width), "frequentist", int(len(symbols)), secret_bits=width)


def cond_min_entropy_exact(table: np.ndarray, mode: str = "worst") -> EntropyEstimate:
    """Conditional min-entropy of a joint table ``P[secret, observation]``."""
    P = np.asarray(table, dtype=float)
    if P.ndim != 2 or np.any(P < 0) or not math.isclose(P.sum(), 1.0, rel_tol=1e-9):
        raise UsageError("joint table must be a non-negative 2-D array summing to 1")
    _check_mode(mode)
    col = P.sum(axis=0)
    live = col > 0
    best = P.max(axis=0)[live]
    if mode == "worst":
        bits = -math.log2(float(np.max(best / col[live])))
    else:
        bits = -math.log2(float(best.sum()))
    width = math.log2(P.shape[0]) if P.shape[0] > 1 else 0.0
    return EntropyEstimate(_clamp(bits, width), "exact", 0, mode)


def min_entropy_exact(table: np.ndarray) -> EntropyEstimate:
    """Unconditional min-entropy of the secret marginal of a joint table."""
    return min_entropy(np.asarray(table, dtype=float).sum(axis=1))


def _check_mode(mode: str):
    if mode not in CONDITIONING:
        raise ConfigurationError(f"conditioning must be one of {CONDITIONING}, got {mode!r}")


def _joint_counts(samples: SampleSet):
    """Per observation value: total count and the count of its modal secret."""
    a = samples.secret_ints()
    o = samples.observation_ints()
    joint = (o << samples.secret_bits) | a
    cells, counts = np.unique(joint, return_counts=True)
    obs_of_cell = cells >> samples.secret_bits
    obs_vals, starts = np.unique(obs_of_cell, return_index=True)
    totals = np.add.reduceat(counts, starts)
    modal = np.maximum.reduceat(counts, starts)
    return obs_vals, totals, modal


def cond_min_entropy(
    samples: SampleSet, mode: str = "worst", budget: int = DEFAULT_BUDGET
) -> EntropyEstimate:
    """Frequentist conditional min-entropy of the secret given the observation.

    Observation values seen fewer than five times still contribute but are
    counted in ``low_support``.
    """
    _check_mode(mode)
    check_budget(samples.secret_bits, samples.observation_bits, budget)
    _, totals, modal = _joint_counts(samples)
    if mode == "worst":
        bits = -math.log2(float(np.max(modal / totals)))
    else:
        bits = -math.log2(float(modal.sum()) / len(samples))
    return EntropyEstimate(
        _clamp(bits, samples.secret_bits),
        "frequentist",
        len(samples),
        mode,
        samples.secret_bits,
        int(np.sum(totals < LOW_SUPPORT)),
    )


def leakage(h_uncond: EntropyEstimate, h_cond: EntropyEstimate) -> float:
    """Information leaked: ``H(secret) - H(secret | observation)`` in bits."""
    if h_uncond.estimator != h_cond.estimator:
        raise UsageError(
            f"estimator mismatch: {h_uncond.estimator} vs {h_cond.estimator}"
        )
    if (
        h_uncond.secret_bits is not None
        and h_cond.secret_bits is not None
        and h_uncond.secret_bits != h_cond.secret_bits
    ):
        raise UsageError("estimates refer to secrets of different lengths")
    return h_uncond.bits - h_cond.bits


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return count


def nn_estimate(
    samples: SampleSet, k: Optional[int] = None, budget: int = DEFAULT_BUDGET
) -> EntropyEstimate:
    """Leave-one-out k-nearest-neighbour estimate of conditional min-entropy.

    Each record's secret is guessed by majority vote among its ``k``
    nearest other records (Hamming distance on observations, ties broken
    by smallest record index; vote ties go to the nearest neighbour's
    label).  The hit rate estimates the Bayes guessing probability.  ``k``
    defaults to ``max(1, floor(ln n))``.  If every observation is identical
    the frequentist estimate is returned instead.
    """
    n = len(samples)
    if n < 2:
        raise UsageError("nearest-neighbour estimation needs at least two records")
    check_budget(samples.secret_bits, samples.observation_bits, budget)
    secrets = samples.secret_ints()
    values, inverse = np.unique(samples.observation_ints(), return_inverse=True)
    if values.size == 1:
        return cond_min_entropy(samples, "average", budget)
    if k is None:
        k = max(1, int(math.log(n)))

    order = np.argsort(inverse, kind="stable")
    sizes = np.bincount(inverse, minlength=values.size)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    groups = [order[a : a + m] for a, m in zip(starts, sizes)]
    firsts = np.array([grp[0] for grp in groups])

    hits = 0
    for g, members in enumerate(groups):
        if members.size > k:
            # Records beyond the first k+1 all see the same k exact matches.
            head = members[: k + 1]
            for i in head:
                hits += _vote(secrets[head[head != i][:k]]) == secrets[i]
            tail = members[k + 1 :]
            hits += int(np.sum(secrets[tail] == _vote(secrets[members[:k]])))
            continue
        dist = _popcount(values ^ values[g])
        dist[g] = -1
        extra = []
        need = k - (members.size - 1)
        for h in np.lexsort((firsts, dist))[1:]:
            extra.extend(groups[h][: need - len(extra)].tolist())
            if len(extra) >= need:
                break
        for i in members:
            others = np.concatenate([members[members != i], np.asarray(extra, dtype=np.int64)])
            hits += _vote(secrets[others]) == secrets[i]
    p_guess = max(hits / n, 1.0 / n)
    return EntropyEstimate(
        _clamp(-math.log2(p_guess), samples.secret_bits),
        "nearest-neighbor",
        n,
        "average",
        samples.secret_bits,
    )


def _vote(labels: np.ndarray) -> int:
    """Most frequent label; ties go to the one appearing first (nearest)."""
    if labels.size == 1:
        return int(labels[0])
    vals, first, counts = np.unique(labels, return_index=True, return_counts=True)
    best = counts.max()
    return int(vals[counts == best][np.argmin(first[counts == best])])

"""End-to-end simulation of the key generation protocol over parameter sweeps.

Per frame, Alice and Bob probe their reciprocal channel with the chirp and
Eve overhears Alice's probe through her own correlated channel.  Every
party turns its received probe into filterbank powers, quantizes them with
thresholds calibrated on its own measurements, and Bob reconciles to
Alice's bits from her polar syndrome.

Randomness is keyed by (run seed, purpose, block/frame index) only, so every
scenario and filter count sees the same channel draws and noise streams.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..amplification import amplify_batch, draw_seed, key_length
from ..channel import (
    FrameSchedule,
    ScenarioConfig,
    circular_response,
    sample_channel,
    sample_eve_channel,
    substream,
)
from ..entropy import EntropyEstimate, SampleSet, cond_min_entropy, nn_estimate
from ..filterbank import (
    Filterbank,
    FilterbankSpec,
    build_filterbank,
    circular_outputs,
    circular_power_matrix,
    moment_matched_gamma,
)
from ..quantizer import calibrate, mismatch_rate, quantize
from ..reconciliation import construct_code, fer as frame_error_rate, reconcile_frames
from ..waveform import generate_chirp
from .config import SCENARIO_NAMES, ExperimentConfig, auto_block_len

CSV_HEADER = (
    "scenario",
    "N",
    "Q",
    "code_rate",
    "F_bits",
    "ab_mismatch",
    "eve_mismatch",
    "fer",
    "eve_fer",
    "h_cond_bits",
    "rate_per_use",
    "rate_bps_hz",
    "rate_bps",
    "warnings",
)
_PARTIES = {"alice": 0, "bob": 1, "eve": 2}
MAX_CROSSOVER = 0.49


def key_rate(frame_bits: int, fer: float, h_cond: float, raw: bool = False) -> float:
    """Secret bits per channel use, ``F (1 - FER) h``.

    ``h_cond`` is the conditional min-entropy of the whole frame in bits;
    by default it is normalized per bit (divided by ``F``) so the result is
    in bits per frame.  ``raw=True`` multiplies by the unnormalized value.
    """
    if not 0 <= fer <= 1:
        raise ValueError(f"fer must lie in [0, 1], got {fer}")
    if h_cond < 0:
        raise ValueError("h_cond must be >= 0")
    if frame_bits <= 0:
        return 0.0
    h = h_cond if raw else h_cond / frame_bits
    return frame_bits * (1 - fer) * h


def to_bps(rate_per_use: float, round_trip_s: float) -> float:
    if not round_trip_s > 0:
        raise ValueError("round_trip_s must be positive")
    return rate_per_use / round_trip_s


def to_bps_hz(rate_per_use: float, round_trip_s: float, bandwidth_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth_hz must be positive")
    return to_bps(rate_per_use, round_trip_s) / bandwidth_hz


def sig6(x: float) -> float:
    """Round to the 6 significant digits the CSV carries."""
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class KeyRateReport:
    """One sweep cell.  ``error`` is set (and numbers are NaN) when the cell failed."""

    scenario: str
    N: int
    Q: int
    code_rate: float
    F_bits: int
    ab_mismatch: float = math.nan
    eve_mismatch: float = math.nan
    fer: float = math.nan
    eve_fer: float = math.nan
    h_cond_bits: float = math.nan
    rate_per_use: float = math.nan
    rate_bps_hz: float = math.nan
    rate_bps: float = math.nan
    warnings: str = ""
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def sort_key(self):
        return (self.scenario, self.N, self.Q, self.code_rate)

    def csv_fields(self) -> List[str]:
        def num(x):
            return "" if math.isnan(x) else f"{x:.6g}"

        notes = self.warnings if self.ok else f"error:{self.error}"
        return [
            self.scenario,
            str(self.N),
            str(self.Q),
            f"{self.code_rate:.6g}",
            str(self.F_bits),
            num(self.ab_mismatch),
            num(self.eve_mismatch),
            num(self.fer),
            num(self.eve_fer),
            num(self.h_cond_bits),
            num(self.rate_per_use),
            num(self.rate_bps_hz),
            num(self.rate_bps),
            notes,
        ]


@dataclass(frozen=True)
class PartyPowers:
    """Frames x N filterbank powers seen by each party."""

    alice: np.ndarray
    bob: np.ndarray
    eve: np.ndarray


def _bank(cfg: ExperimentConfig, num_filters: int) -> Filterbank:
    spec = FilterbankSpec(
        num_filters, cfg.chirp.bandwidth_hz, sample_rate_hz=cfg.chirp.sample_rate_hz
    )
    return build_filterbank(spec)


def _noise(seed: int, frame: int, party: str, length: int, var: float) -> np.ndarray:
    z = substream(seed, "noise", frame, _PARTIES[party]).standard_normal(2 * length)
    return math.sqrt(var / 2) * z.view(np.complex128)


def _measure(
    clean: Dict[int, np.ndarray],
    blocks: np.ndarray,
    bank: Filterbank,
    seed: int,
    party: str,
    noise_var: float,
) -> np.ndarray:
    """Powers for every frame; ``clean[b]`` is the periodic probe response of block b.

    The probe is sent with a cyclic prefix covering the channel memory, so
    after dropping the prefix each receiver holds one period of the
    steady-state response plus fresh noise and filters it circularly.
    """
    L = next(iter(clean.values())).size
    rows = np.empty((blocks.size, L), dtype=complex)
    for frame, b in enumerate(blocks):
        rows[frame] = clean[b] + _noise(seed, frame, party, L, noise_var)
    return circular_power_matrix(rows, bank)


def _clean_responses(
    cfg: ExperimentConfig,
    sc: ScenarioConfig,
    blocks: np.ndarray,
    eve_stream: Tuple[int, ...] = (),
):
    x = generate_chirp(cfg.chirp)
    fs = x.sample_rate_hz
    legit, eve = {}, {}
    for b in np.unique(blocks):
        h = sample_channel(sc, substream(cfg.rng_seed, "channel", b))
        he = sample_eve_channel(sc, h, substream(cfg.rng_seed, "eve", b, *eve_stream))
        legit[b] = circular_response(x.samples, h, fs)
        eve[b] = circular_response(x.samples, he, fs)
    return legit, eve, sc.noise_var(float(np.mean(np.abs(x.samples) ** 2)))


def simulate_powers(cfg: ExperimentConfig, scenario: str, num_filters: int) -> PartyPowers:
    """Filterbank powers of Alice, Bob and Eve for every frame of the schedule."""
    sc = cfg.scenario_for(scenario)
    blocks = cfg.schedule.block_indices(sc.dynamic)
    bank = _bank(cfg, num_filters)
    legit, eve, nv = _clean_responses(cfg, sc, blocks)
    seed = cfg.rng_seed
    return PartyPowers(
        alice=_measure(legit, blocks, bank, seed, "alice", nv),
        bob=_measure(legit, blocks, bank, seed, "bob", nv),
        eve=_measure(eve, blocks, bank, seed, "eve", nv),
    )


def quantize_party(powers: np.ndarray, cfg: ExperimentConfig, levels: int) -> np.ndarray:
    """Each party calibrates on its own measurements, then Gray-quantizes."""
    spec = replace(cfg.quantizer, levels=levels)
    return quantize(powers, calibrate(powers, spec), spec)


def frame_entropy(
    secret: np.ndarray, observation: np.ndarray, cfg: ExperimentConfig
) -> Tuple[float, int]:
    """Sum of sub-block conditional min-entropies of ``secret`` given ``observation``.

    Returns ``(bits, low_support_count)``.  Summing treats sub-blocks as
    independent, the approximation that keeps the alphabet within budget.
    """
    F = secret.shape[1]
    width = cfg.entropy_block_bits
    total, low = 0.0, 0
    for start in range(0, F, width):
        cols = slice(start, min(F, start + width))
        samples = SampleSet(secret[:, cols], observation[:, cols])
        if cfg.estimator == "nearest-neighbor":
            est: EntropyEstimate = nn_estimate(samples, budget=cfg.entropy_budget)
        else:
            est = cond_min_entropy(samples, cfg.estimator_mode, cfg.entropy_budget)
        total += est.bits
        low += est.low_support
    return total, low


def _cell_seed(cfg: ExperimentConfig, scenario: str, N: int, Q: int, rate: float):
    return substream(
        cfg.rng_seed, "hash", SCENARIO_NAMES.index(scenario), N, Q, int(round(rate * 1e6))
    )


def evaluate_cell(
    cfg: ExperimentConfig,
    scenario: str,
    N: int,
    Q: int,
    rate: float,
    bits: Dict[str, np.ndarray],
    h_eve: Tuple[float, int],
) -> KeyRateReport:
    """Reconcile, account for the syndrome, amplify and report one cell."""
    r_a, r_b, r_e = bits["alice"], bits["bob"], bits["eve"]
    F = r_a.shape[1]
    ab = mismatch_rate(r_a, r_b)
    ev = mismatch_rate(r_a, r_e)
    n = cfg.block_len or auto_block_len(F)
    p = float(np.clip(ab, cfg.min_crossover, MAX_CROSSOVER))
    code = construct_code(n, rate, p)
    est, ok = reconcile_frames(r_a, r_b, code, p)
    _, eve_ok = reconcile_frames(r_a, r_e, code, float(np.clip(ev, cfg.min_crossover, MAX_CROSSOVER)))
    fer = sig6(frame_error_rate(ok))
    eve_fer = sig6(frame_error_rate(eve_ok))

    # Conditioning on the public syndrome costs at most its length.
    disclosed = -(-F // n) * code.syndrome_len
    h_obs, low = h_eve
    h = sig6(float(np.clip(h_obs - disclosed, 0.0, F)))

    warnings = [f"subblock={cfg.entropy_block_bits}"]
    if low:
        warnings.append(f"low_support={low}")
    if cfg.raw_rate:
        warnings.append("raw_product")

    target = key_length(h, F, cfg.key_margin)
    if target and ok.any():
        seed = draw_seed(_cell_seed(cfg, scenario, N, Q, rate), F, target)
        if not np.array_equal(amplify_batch(r_a[ok], target, seed), amplify_batch(est[ok], target, seed)):
            warnings.append("key_disagreement")

    R = sig6(key_rate(F, fer, h, raw=cfg.raw_rate))
    return KeyRateReport(
        scenario=scenario,
        N=N,
        Q=Q,
        code_rate=rate,
        F_bits=F,
        ab_mismatch=sig6(ab),
        eve_mismatch=sig6(ev),
        fer=fer,
        eve_fer=eve_fer,
        h_cond_bits=h,
        rate_per_use=R,
        rate_bps_hz=sig6(to_bps_hz(R, cfg.round_trip_s, cfg.chirp.bandwidth_hz)),
        rate_bps=sig6(to_bps(R, cfg.round_trip_s)),
        warnings=";".join(warnings),
    )


def _error(scenario, N, Q, rate, F, exc: BaseException) -> KeyRateReport:
    msg = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    return KeyRateReport(scenario, N, Q, rate, F, error=msg)


def run_unit(cfg: ExperimentConfig, scenario: str, N: int) -> List[KeyRateReport]:
    """All (Q, rate) cells sharing one simulated set of powers."""
    rows: List[KeyRateReport] = []
    try:
        powers = simulate_powers(cfg, scenario, N)
    except Exception as exc:  # noqa: BLE001 - reported as error records
        for Q in cfg.levels:
            F = N * (int(Q).bit_length() - 1)
            rows.extend(_error(scenario, N, Q, r, F, exc) for r in cfg.code_rates)
        return rows
    for Q in cfg.levels:
        F = N * (int(Q).bit_length() - 1)
        try:
            bits = {
                party: quantize_party(getattr(powers, party), cfg, Q)
                for party in ("alice", "bob", "eve")
            }
            h_eve = frame_entropy(bits["alice"], bits["eve"], cfg)
        except Exception as exc:  # noqa: BLE001
            rows.extend(_error(scenario, N, Q, r, F, exc) for r in cfg.code_rates)
            continue
        for rate in cfg.code_rates:
            try:
                rows.append(evaluate_cell(cfg, scenario, N, Q, rate, bits, h_eve))
            except Exception as exc:  # noqa: BLE001
                rows.append(_error(scenario, N, Q, rate, F, exc))
    return rows


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> List[KeyRateReport]:
    """Every sweep cell, sorted by (scenario, N, Q, code_rate).

    Units of work are (scenario, N) pairs; their results do not depend on
    the execution order, so any ``workers`` count gives identical rows.
    """
    units = [(s, N) for s in cfg.scenarios for N in cfg.filters]
    if workers <= 1:
        chunks = [run_unit(cfg, s, N) for s, N in units]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda u: run_unit(cfg, *u), units))
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=KeyRateReport.sort_key)


def format_csv(rows: Iterable[KeyRateReport]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in sorted(rows, key=KeyRateReport.sort_key):
        writer.writerow(row.csv_fields())
    return out.getvalue()


def write_csv(rows: Iterable[KeyRateReport], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows))


def read_csv(text: str) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def eve_position_sweep(
    cfg: ExperimentConfig,
    scenario: str,
    offsets_wavelengths: Sequence[float],
    cells: Sequence[Tuple[int, int]],
) -> Dict[Tuple[int, int], np.ndarray]:
    """Eve's bit mismatch against Alice for each Eve position and (N, Q) cell.

    Each position draws its own Eve channel; Alice's measurements are shared.
    """
    out: Dict[Tuple[int, int], List[float]] = {cell: [] for cell in cells}
    base = cfg.scenario_for(scenario)
    blocks = cfg.schedule.block_indices(base.dynamic)
    filters = sorted({N for N, _ in cells})
    alice_bits: Dict[Tuple[int, int], np.ndarray] = {}
    banks = {N: _bank(cfg, N) for N in filters}
    legit, _, nv = _clean_responses(cfg, base, blocks)
    for N in filters:
        pa = _measure(legit, blocks, banks[N], cfg.rng_seed, "alice", nv)
        for n_, Q in cells:
            if n_ == N:
                alice_bits[(N, Q)] = quantize_party(pa, cfg, Q)
    for pos, offset in enumerate(offsets_wavelengths):
        sc = replace(base, eve_offset_wavelengths=float(offset))
        _, eve, _ = _clean_responses(cfg, sc, blocks, eve_stream=(pos + 1,))
        for N in filters:
            pe = _measure(eve, blocks, banks[N], cfg.rng_seed, "eve", nv)
            for n_, Q in cells:
                if n_ == N:
                    r_e = quantize_party(pe, cfg, Q)
                    out[(N, Q)].append(mismatch_rate(alice_bits[(N, Q)], r_e))
    return {cell: np.array(v) for cell, v in out.items()}


@dataclass(frozen=True)
class GammaFit:
    """Per-filter empirical power moments next to the Gamma prediction."""

    num_filters: int
    empirical_mean: np.ndarray
    empirical_var: np.ndarray
    predicted_mean: np.ndarray
    predicted_var: np.ndarray

    @property
    def mean_error(self) -> np.ndarray:
        return np.abs(self.empirical_mean / self.predicted_mean - 1)

    @property
    def var_error(self) -> np.ndarray:
        return np.abs(self.empirical_var / self.predicted_var - 1)

    @property
    def normalized_var(self) -> float:
        """Average ``var / mean**2`` across filters (scale free)."""
        return float(np.mean(self.empirical_var / self.empirical_mean**2))


def gamma_fit(cfg: ExperimentConfig, num_filters: int, frames: int = 10_000) -> GammaFit:
    """Monte Carlo of one static flat-fading link against the Gamma model.

    The channel is a single Rayleigh tap drawn once; only receiver noise
    changes between frames.
    """
    sc = replace(cfg.scenario_for("nlos-static"), num_taps=1, delay_spread_s=0.0)
    run = replace(cfg, scenario=sc, schedule=FrameSchedule(frames, None))
    blocks = run.schedule.block_indices(False)
    bank = _bank(run, num_filters)
    legit, _, nv = _clean_responses(run, sc, blocks)
    P = _measure(legit, blocks, bank, run.rng_seed, "alice", nv)
    clean = circular_outputs(legit[0], bank)
    fits = [
        moment_matched_gamma(clean[n], bank.filters[n], nv, circular=True)
        for n in range(num_filters)
    ]
    return GammaFit(
        num_filters,
        P.mean(axis=0),
        P.var(axis=0, ddof=1),
        np.array([g.mean for g in fits]),
        np.array([g.var for g in fits]),
    )

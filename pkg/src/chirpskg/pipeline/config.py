"""Experiment configuration: flat ``section.key=value`` files with env overrides.

Lines are ``section.key = value``; ``#`` starts a comment.  Lists are
comma separated.  An environment variable ``SKG_<SECTION>_<KEY>`` (upper
case, e.g. ``SKG_SCENARIO_SNR_DB``) overrides the file value.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Mapping, Optional, Tuple

from ..channel import FrameSchedule, ScenarioConfig
from ..entropy import CONDITIONING, DEFAULT_BUDGET
from ..errors import ConfigurationError, SKGError
from ..quantizer import QuantizerSpec
from ..waveform import ChirpSpec

SCENARIO_NAMES = ("nlos-dynamic", "nlos-static", "los-dynamic", "los-static")
PIPELINE_ESTIMATORS = ("frequentist", "nearest-neighbor")
DEFAULT_DURATION_S = 17.1875e-6
DEFAULT_BANDWIDTH_HZ = 70e6
DEFAULT_ROUND_TRIP_S = 35e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sweep needs.

    ``scenario`` holds the propagation knobs shared by every entry of
    ``scenarios``; each name (``los-dynamic`` etc.) only flips the LoS and
    dynamic switches.  ``block_len = 0`` picks the smallest power of two
    holding one frame.
    """

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    scenarios: Tuple[str, ...] = SCENARIO_NAMES
    schedule: FrameSchedule = field(default_factory=FrameSchedule)
    filters: Tuple[int, ...] = (8, 16, 32, 64)
    levels: Tuple[int, ...] = (4, 16)
    code_rates: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    block_len: int = 0
    chirp: ChirpSpec = field(
        default_factory=lambda: ChirpSpec(DEFAULT_DURATION_S, DEFAULT_BANDWIDTH_HZ)
    )
    quantizer: QuantizerSpec = field(default_factory=QuantizerSpec)
    estimator: str = "frequentist"
    estimator_mode: str = "average"
    entropy_block_bits: int = 8
    entropy_budget: int = DEFAULT_BUDGET
    round_trip_s: float = DEFAULT_ROUND_TRIP_S
    raw_rate: bool = False
    key_margin: float = 0.0
    min_crossover: float = 1e-3
    output_path: Optional[str] = None
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("scenarios", "filters", "levels", "code_rates"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigurationError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        for s in self.scenarios:
            if s not in SCENARIO_NAMES:
                raise ConfigurationError(f"unknown scenario {s!r}; choose from {SCENARIO_NAMES}")
        if len(set(self.scenarios)) != len(self.scenarios):
            raise ConfigurationError("duplicate scenario names")
        for n in self.filters:
            if int(n) != n or n < 1:
                raise ConfigurationError(f"filter counts must be integers >= 1, got {n}")
        for q in self.levels:
            QuantizerSpec(levels=q)
        for r in self.code_rates:
            if not 0 <= r <= 1:
                raise ConfigurationError(f"code rates must lie in [0, 1], got {r}")
        if self.block_len < 0 or (self.block_len and self.block_len & (self.block_len - 1)):
            raise ConfigurationError("block_len must be 0 (auto) or a power of two")
        if self.estimator not in PIPELINE_ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {PIPELINE_ESTIMATORS}")
        if self.estimator_mode not in CONDITIONING:
            raise ConfigurationError(f"estimator_mode must be one of {CONDITIONING}")
        if self.entropy_block_bits < 1:
            raise ConfigurationError("entropy_block_bits must be >= 1")
        if 2 ** (2 * self.entropy_block_bits) > self.entropy_budget:
            raise ConfigurationError("entropy_block_bits exceeds the alphabet budget")
        if not self.round_trip_s > 0:
            raise ConfigurationError("round_trip_s must be positive")
        if self.key_margin < 0:
            raise ConfigurationError("key_margin must be >= 0")
        if not 0 < self.min_crossover < 0.5:
            raise ConfigurationError("min_crossover must lie in (0, 0.5)")

    def scenario_for(self, name: str) -> ScenarioConfig:
        if name not in SCENARIO_NAMES:
            raise ConfigurationError(f"unknown scenario {name!r}")
        los, dynamic = name.startswith("los"), name.endswith("dynamic")
        return replace(self.scenario, los=los, dynamic=dynamic, rng_seed=self.rng_seed)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, rng_seed=int(seed))


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("none", "inf", "static", "") else _int(text)


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("none", "auto", "") else float(text)


def _list(conv: Callable) -> Callable:
    return lambda text: tuple(conv(t.strip()) for t in text.split(",") if t.strip())


def _str(text: str) -> str:
    return text.strip()


def _block_len(text: str) -> int:
    return 0 if text.strip().lower() == "auto" else _int(text)


# section -> key -> converter
SCHEMA: Dict[str, Dict[str, Callable]] = {
    "scenario": {
        "names": _list(_str),
        "snr_db": float,
        "num_taps": _int,
        "delay_spread_s": float,
        "eve_offset_wavelengths": float,
        "carrier_freq_hz": float,
        "k_factor_db": float,
        "diffuse_power": float,
    },
    "schedule": {"num_frames": _int, "coherence_frames": _optional_int},
    "chirp": {
        "duration_s": float,
        "bandwidth_hz": float,
        "center_freq_hz": float,
        "sample_rate_hz": _optional_float,
    },
    "sweep": {"filters": _list(_int), "levels": _list(_int), "code_rates": _list(float)},
    "quantizer": {"boundary_mode": _str, "sigma_span": float, "scope": _str},
    "reconciliation": {"block_len": _block_len, "min_crossover": float},
    "entropy": {
        "estimator": _str,
        "conditioning": _str,
        "block_bits": _int,
        "budget": _int,
    },
    "rate": {"round_trip_s": float, "raw_product": _bool},
    "amplification": {"margin": float},
    "run": {"rng_seed": _int, "output_path": _str},
}


def parse_text(text: str, source: str = "<config>") -> Dict[str, Dict[str, str]]:
    """Split config text into ``{section: {key: raw value}}``."""
    out: Dict[str, Dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected section.key=value")
        lhs, value = (p.strip() for p in line.split("=", 1))
        if "." not in lhs:
            raise ConfigurationError(f"{source}:{lineno}: key {lhs!r} lacks a section prefix")
        section, key = lhs.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {lhs!r}")
        out.setdefault(section, {})[key] = value
    return out


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Dict[str, str]]:
    environ = os.environ if environ is None else environ
    out: Dict[str, Dict[str, str]] = {}
    for section, keys in SCHEMA.items():
        for key in keys:
            name = f"SKG_{section}_{key}".upper()
            if name in environ:
                out.setdefault(section, {})[key] = environ[name]
    return out


def _convert(raw: Dict[str, Dict[str, str]]) -> Dict[str, Dict[str, object]]:
    values: Dict[str, Dict[str, object]] = {}
    for section, keys in raw.items():
        for key, text in keys.items():
            try:
                values.setdefault(section, {})[key] = SCHEMA[section][key](text)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"{section}.{key}: {exc}") from None
    return values


def build_config(raw: Dict[str, Dict[str, str]]) -> ExperimentConfig:
    """Turn raw section/key strings into a validated :class:`ExperimentConfig`."""
    v = _convert(raw)
    base = ExperimentConfig()
    try:
        sc = dict(v.get("scenario", {}))
        names = sc.pop("names", base.scenarios)
        scenario = replace(base.scenario, **sc)
        schedule = replace(base.schedule, **v.get("schedule", {}))
        chirp = replace(base.chirp, **v.get("chirp", {}))
        quantizer = replace(base.quantizer, **v.get("quantizer", {}))
        sweep = v.get("sweep", {})
        rec = v.get("reconciliation", {})
        ent = v.get("entropy", {})
        rate = v.get("rate", {})
        run = v.get("run", {})
        return ExperimentConfig(
            scenario=scenario,
            scenarios=names,
            schedule=schedule,
            filters=sweep.get("filters", base.filters),
            levels=sweep.get("levels", base.levels),
            code_rates=sweep.get("code_rates", base.code_rates),
            block_len=rec.get("block_len", base.block_len),
            min_crossover=rec.get("min_crossover", base.min_crossover),
            chirp=chirp,
            quantizer=quantizer,
            estimator=ent.get("estimator", base.estimator),
            estimator_mode=ent.get("conditioning", base.estimator_mode),
            entropy_block_bits=ent.get("block_bits", base.entropy_block_bits),
            entropy_budget=ent.get("budget", base.entropy_budget),
            round_trip_s=rate.get("round_trip_s", base.round_trip_s),
            raw_rate=rate.get("raw_product", base.raw_rate),
            key_margin=v.get("amplification", {}).get("margin", base.key_margin),
            output_path=run.get("output_path", base.output_path),
            rng_seed=run.get("rng_seed", base.rng_seed),
        )
    except SKGError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None


def load_config(
    path: Optional[str] = None,
    text: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Read a config file (or text), apply env overrides, validate."""
    if path is not None and text is not None:
        raise ConfigurationError("give a path or text, not both")
    raw: Dict[str, Dict[str, str]] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if text is not None:
        raw = parse_text(text, path or "<config>")
    for section, keys in env_overrides(environ).items():
        raw.setdefault(section, {}).update(keys)
    return build_config(raw)


def auto_block_len(frame_bits: int) -> int:
    return 1 << max(0, math.ceil(math.log2(frame_bits)))

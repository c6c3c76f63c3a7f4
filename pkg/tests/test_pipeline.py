import math

import numpy as np
import pytest

from chirpskg.channel import FrameSchedule
from chirpskg.errors import ConfigurationError
from chirpskg.pipeline.cli import best_per_scenario, main
from chirpskg.pipeline.config import ExperimentConfig, auto_block_len, load_config, parse_text
from chirpskg.pipeline.experiment import (
    CSV_HEADER,
    format_csv,
    key_rate,
    read_csv,
    run_experiment,
    simulate_powers,
    to_bps,
    to_bps_hz,
)
from chirpskg.waveform import ChirpSpec

SMALL = """
scenario.names = nlos-dynamic, los-static
schedule.num_frames = 200
sweep.filters = 8, 16
sweep.levels = 4
sweep.code_rates = 0.9, 0.1
"""


@pytest.fixture(scope="module")
def small_rows():
    return run_experiment(load_config(text=SMALL, environ={}))


def test_key_rate_examples():
    assert key_rate(64, 1.0, 40.0) == 0.0
    assert key_rate(64, 0.0, 64.0) == 64.0
    assert key_rate(64, 0.1, 32.0) == pytest.approx(28.8)
    assert key_rate(64, 0.0, 0.0) == 0.0
    assert key_rate(4, 0.5, 2.0, raw=True) == 4.0


def test_unit_conversions():
    assert to_bps(0.0, 35e-6) == 0.0 and to_bps_hz(0.0, 35e-6, 70e6) == 0.0
    assert to_bps(35.0, 35e-6) == pytest.approx(1e6)
    assert to_bps_hz(35.0, 35e-6, 70e6) == pytest.approx(1e6 / 70e6)
    with pytest.raises(ValueError):
        to_bps(1.0, 0.0)


def test_config_text_and_env_override():
    cfg = load_config(text=SMALL + "scenario.snr_db = 25\n", environ={"SKG_SCENARIO_SNR_DB": "7.5"})
    assert cfg.scenario.snr_db == 7.5
    assert cfg.filters == (8, 16) and cfg.code_rates == (0.9, 0.1)
    assert cfg.scenarios == ("nlos-dynamic", "los-static")
    assert cfg.schedule.num_frames == 200


def test_example_config_loads():
    cfg = load_config("docs/example.conf", environ={})
    assert cfg == ExperimentConfig()


@pytest.mark.parametrize(
    "text",
    [
        "snr_db = 3",
        "scenario.bogus = 1",
        "scenario.snr_db",
        "sweep.filters = ",
        "sweep.levels = 3",
        "sweep.code_rates = 1.5",
        "schedule.num_frames = 2.5",
        "scenario.names = indoor",
        "entropy.block_bits = 13",
        "reconciliation.block_len = 12",
    ],
)
def test_bad_config(text):
    with pytest.raises(ConfigurationError):
        load_config(text=text, environ={})


def test_parse_comments_and_static_schedule():
    raw = parse_text("schedule.coherence_frames = none  # static\n\n# comment\n")
    assert raw == {"schedule": {"coherence_frames": "none"}}
    assert load_config(text="schedule.coherence_frames = none", environ={}).schedule.coherence_frames is None


def test_auto_block_len():
    assert [auto_block_len(f) for f in (16, 24, 64, 100)] == [16, 32, 64, 128]


def test_scenario_switches():
    cfg = ExperimentConfig(rng_seed=4)
    sc = cfg.scenario_for("los-static")
    assert sc.los and not sc.dynamic and sc.rng_seed == 4


def test_powers_shapes_and_reciprocity():
    cfg = ExperimentConfig(schedule=FrameSchedule(50))
    p = simulate_powers(cfg, "nlos-static", 8)
    assert p.alice.shape == (50, 8) and np.all(p.alice >= 0)
    # Same channel, independent noise: close but not equal.
    assert not np.array_equal(p.alice, p.bob)
    assert np.corrcoef(p.alice.mean(0), p.bob.mean(0))[0, 1] > 0.99


def test_rows_complete_and_sorted(small_rows):
    assert len(small_rows) == 2 * 2 * 1 * 2
    keys = [r.sort_key() for r in small_rows]
    assert keys == sorted(keys)
    assert all(r.ok for r in small_rows)


def test_csv_schema(small_rows):
    text = format_csv(small_rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    first = read_csv(text)[0]
    assert first["scenario"] == "los-static" and first["N"] == "8" and first["code_rate"] == "0.1"


def test_rate_recomputes_from_row(small_rows):
    for row in read_csv(format_csv(small_rows)):
        F, fer, h = int(row["F_bits"]), float(row["fer"]), float(row["h_cond_bits"])
        assert f"{key_rate(F, fer, h):.6g}" == row["rate_per_use"]
        for field in ("ab_mismatch", "eve_mismatch", "fer", "eve_fer"):
            assert 0.0 <= float(row[field]) <= 1.0


def test_deterministic_across_workers(small_rows):
    cfg = load_config(text=SMALL, environ={})
    assert format_csv(run_experiment(cfg, workers=3)) == format_csv(small_rows)


def test_failed_unit_yields_error_records():
    # A 40-sample probe is shorter than the 64-tap prototype of N=8.
    cfg = ExperimentConfig(
        chirp=ChirpSpec(40 / 70e6, 70e6),
        filters=(4, 8),
        levels=(4,),
        code_rates=(0.5,),
        scenarios=("nlos-dynamic",),
        schedule=FrameSchedule(50),
    )
    rows = run_experiment(cfg)
    assert [r.ok for r in rows] == [True, False]
    bad = format_csv(rows).splitlines()[-1]
    assert "error:UsageError" in bad and ",,," in bad


def test_mismatch_grows_with_q_and_n():
    cfg = ExperimentConfig(
        scenarios=("nlos-dynamic",), levels=(4, 16), filters=(8, 32), code_rates=(0.5,), schedule=FrameSchedule(300)
    )
    ab = {(r.N, r.Q): r.ab_mismatch for r in run_experiment(cfg)}
    assert ab[(8, 4)] <= ab[(8, 16)] and ab[(32, 4)] <= ab[(32, 16)]
    assert ab[(8, 4)] <= ab[(32, 4)] and ab[(8, 16)] <= ab[(32, 16)]


def test_cli_run(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text(SMALL)
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(conf), "--out", str(out), "--seed", "3"]) == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_cli_config_error(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("sweep.levels = 5\n")
    assert main(["run", "--config", str(conf)]) == 2


def test_cli_partial_failure(tmp_path, capsys):
    conf = tmp_path / "p.conf"
    conf.write_text(
        "chirp.duration_s = 5.714285714285714e-07\nsweep.filters = 4, 8\nsweep.levels = 4\n"
        "sweep.code_rates = 0.5\nscenario.names = nlos-dynamic\nschedule.num_frames = 20\n"
    )
    assert main(["run", "--config", str(conf)]) == 3
    assert "error:" in capsys.readouterr().out


def test_cli_entropy_oracle(capsys):
    assert main(["entropy-oracle", "--tables", "2", "--samples", "20000", "--max-bits", "2"]) == 0
    assert "table  1" in capsys.readouterr().out


def test_cli_gamma_check(capsys):
    assert main(["gamma-check", "--sets", "2", "--draws", "20000", "--filters", "8", "--frames", "500"]) == 0
    assert "N=  8" in capsys.readouterr().out


def test_best_per_scenario(small_rows):
    best = best_per_scenario(small_rows)
    assert [b.scenario for b in best] == ["los-static", "nlos-dynamic"]
    for b in best:
        assert b.rate_per_use == max(r.rate_per_use for r in small_rows if r.scenario == b.scenario)

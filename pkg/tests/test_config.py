import pytest

from gridsync.config import ConfigError, load_scenario, parse_scenario, with_seed
from gridsync.dispatch import Source
from gridsync.switchgear import BreakerState

MINIMAL = "seed = 1\nduration_s = 5\n"


def errors_of(text, base_dir=None):
    with pytest.raises(ConfigError) as info:
        parse_scenario(text, base_dir)
    return info.value.errors


def test_minimal_defaults():
    cfg = parse_scenario(MINIMAL)
    assert cfg.dt_ms == 100
    assert cfg.n_ticks == 50
    assert cfg.generator.poles == 4
    assert cfg.grid.freq_Hz == 50 and cfg.grid.voltage_V == 230
    assert cfg.breaker_dg is BreakerState.OPEN and cfg.breaker_grid is BreakerState.CLOSED
    assert cfg.timeout_ticks is None


def test_comments_and_blank_lines():
    cfg = parse_scenario("# header\n\nseed = 3   # inline\nduration_s = 1\n")
    assert cfg.seed == 3


def test_dt_zero_rejected_with_key_and_line():
    errs = errors_of(MINIMAL + "dt_ms = 0\n")
    assert any("line 3" in e and "dt_ms" in e and "out of range" in e for e in errs)


def test_unknown_key():
    errs = errors_of(MINIMAL + "generator.pole = 4\n")
    assert errs == ["line 3: unknown key 'generator.pole'"]


def test_missing_required():
    errs = errors_of("seed = 1\n")
    assert "missing required key 'duration_s'" in errs


def test_errors_are_collected():
    errs = errors_of("seed = x\nduration_s = 5\ngenerator.poles = 3\nbogus\n")
    assert len(errs) == 3
    assert [e.split(":")[0] for e in errs] == ["line 1", "line 3", "line 4"]


def test_duplicate_key():
    errs = errors_of(MINIMAL + "seed = 2\n")
    assert "duplicate key 'seed'" in errs[0]


def test_both_breakers_closed_rejected():
    errs = errors_of(MINIMAL + "breaker.dg = closed\n")
    assert any("breaker" in e for e in errs)


def test_slip_bias_must_be_inside_tolerance():
    errs = errors_of(MINIMAL + "sync.slip_bias_rpm = 2\n")
    assert any("slip_bias_rpm" in e for e in errs)


def test_tiers_value():
    cfg = parse_scenario(MINIMAL + "sync.tiers = 800:100, 50:5, 1:1\nsync.speed_tol_rpm = 1\nsync.slip_bias_rpm = 0.5\n")
    assert [t.increment_rpm for t in cfg.tiers.tiers] == [100, 5, 1]
    errs = errors_of(MINIMAL + "sync.tiers = 500:5, 2:10\n")
    assert any("sync.tiers" in e for e in errs)


def test_tariff_file_relative_to_base_dir(tmp_path):
    (tmp_path / "flat.txt").write_text("0 24 4.0\n")
    cfg = parse_scenario(MINIMAL + "dispatch.grid_tariff = flat.txt\n", tmp_path)
    assert cfg.dispatch.grid_tariff.rates == (4.0,) * 24
    assert cfg.dispatch.grid_tariff.source is Source.GRID


def test_missing_tariff_file(tmp_path):
    errs = errors_of(MINIMAL + "dispatch.load = nope.txt\n", tmp_path)
    assert any("dispatch.load" in e and "cannot read" in e for e in errs)


def test_bad_tariff_file_content(tmp_path):
    (tmp_path / "bad.txt").write_text("0 12 4.0\n")
    errs = errors_of(MINIMAL + "dispatch.gen_tariff = bad.txt\n", tmp_path)
    assert any("dispatch.gen_tariff" in e for e in errs)


def test_load_scenario_and_with_seed(scenario_path):
    cfg = load_scenario(scenario_path("speed_400rpm.cfg"))
    assert cfg.generator.poles == 6 and cfg.grid.freq_Hz == 20
    assert with_seed(cfg, 9).seed == 9


def test_shipped_scenarios_valid(scenario_path):
    for name in ("speed_400rpm.cfg", "full_sync.cfg", "golden.cfg"):
        load_scenario(scenario_path(name))

"""Scenario files: ``key = value`` lines, ``#`` comments, unknown keys rejected.

Required keys are ``seed`` and ``duration_s``; everything else has a
default. Relative file paths resolve against the scenario file's folder.
See ``KEYS`` for the full list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

from gridsync.dispatch import (
    DispatchFileError,
    DispatchOptions,
    LoadProfile,
    Source,
    TariffCurve,
    default_gen_tariff,
    default_grid_tariff,
    default_load,
    load_profile,
    load_tariff,
)
from gridsync.switchgear import BreakerState
from gridsync.synchronizer import DEFAULT_TIERS, SpeedTierTable, SyncTolerances


class ConfigError(ValueError):
    """Invalid scenario. ``errors`` lists every problem, line-numbered where possible."""

    def __init__(self, errors: list[str]):
        errors = sorted(errors, key=_line_key)
        super().__init__("\n".join(errors))
        self.errors = errors


def _line_key(message: str) -> int:
    # line-numbered messages in file order, the rest after them (stable)
    head = message.split(":", 1)[0]
    if head.startswith("line ") and head[5:].isdigit():
        return int(head[5:])
    return 1 << 30


@dataclass(frozen=True)
class GeneratorParams:
    poles: int = 4
    tau_s: float = 0.5
    emf_gain: float = 10.0
    ramp_Vps: float = 5.0
    initial_speed_rpm: float = 0.0
    initial_excitation_V: float = 0.0
    initial_phase_deg: float = 0.0
    tacho_decimals: Optional[int] = 1


@dataclass(frozen=True)
class GridParams:
    freq_Hz: float = 50.0
    voltage_V: float = 230.0
    freq_jitter_Hz: float = 0.0
    voltage_jitter_V: float = 0.0
    initial_phase_deg: float = 0.0


DISPATCH_MODES = ("generator", "grid", "schedule")


@dataclass(frozen=True)
class DispatchParams:
    mode: str = "generator"
    grid_tariff: TariffCurve = field(default_factory=default_grid_tariff)
    gen_tariff: TariffCurve = field(default_factory=default_gen_tariff)
    load: LoadProfile = field(default_factory=default_load)
    options: DispatchOptions = DispatchOptions()


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration_s: float
    dt_ms: int = 100
    start_hour: int = 0
    generator: GeneratorParams = GeneratorParams()
    grid: GridParams = GridParams()
    tolerances: SyncTolerances = SyncTolerances()
    tiers: SpeedTierTable = DEFAULT_TIERS
    slip_bias_rpm: float = 1.0
    timeout_s: float = 0.0
    filter_mode: str = "sliding"
    dispatch: DispatchParams = field(default_factory=DispatchParams)
    breaker_dg: BreakerState = BreakerState.OPEN
    breaker_grid: BreakerState = BreakerState.CLOSED

    @property
    def n_ticks(self) -> int:
        return round(self.duration_s * 1000) // self.dt_ms

    @property
    def timeout_ticks(self) -> int | None:
        if self.timeout_s <= 0:
            return None
        return math.ceil(self.timeout_s * 1000 / self.dt_ms)


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _choice(*options: str) -> Callable[[str], str]:
    def conv(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return conv


def _breaker(text: str) -> BreakerState:
    return BreakerState(_choice("open", "closed")(text.lower()))


def _optional_int(text: str) -> Optional[int]:
    return None if text.lower() == "none" else int(text)


def _tiers(text: str) -> SpeedTierTable:
    pairs = []
    for item in text.replace(",", " ").split():
        lower, _, inc = item.partition(":")
        pairs.append((float(lower), float(inc)))
    if not pairs:
        raise ValueError("empty tier list")
    return SpeedTierTable.from_thresholds(pairs)


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# key -> (converter, range check or None, range description)
KEYS: dict[str, tuple[Callable[[str], Any], Optional[Callable[[Any], bool]], str]] = {
    "seed": (_int, lambda v: 0 <= v < 2**64, "an unsigned 64-bit integer"),
    "duration_s": (_float, _positive, "> 0"),
    "dt_ms": (_int, _positive, "> 0"),
    "start_hour": (_int, lambda v: 0 <= v < 24, "in 0..23"),
    "generator.poles": (_int, lambda v: v >= 2 and v % 2 == 0, "an even integer >= 2"),
    "generator.tau_s": (_float, _positive, "> 0"),
    "generator.emf_gain": (_float, _positive, "> 0"),
    "generator.ramp_Vps": (_float, _positive, "> 0"),
    "generator.initial_speed_rpm": (_float, _nonneg, ">= 0"),
    "generator.initial_excitation_V": (_float, _nonneg, ">= 0"),
    "generator.initial_phase_deg": (_float, None, ""),
    "generator.tacho_decimals": (_optional_int, lambda v: v is None or v >= 0, ">= 0 or none"),
    "grid.freq_Hz": (_float, _positive, "> 0"),
    "grid.voltage_V": (_float, _positive, "> 0"),
    "grid.freq_jitter_Hz": (_float, _nonneg, ">= 0"),
    "grid.voltage_jitter_V": (_float, _nonneg, ">= 0"),
    "grid.initial_phase_deg": (_float, None, ""),
    "sync.speed_tol_rpm": (_float, _positive, "> 0"),
    "sync.voltage_deadband_V": (_float, _positive, "> 0"),
    "sync.phase_window_deg": (_float, _positive, "> 0"),
    "sync.slip_max_Hz": (_float, _positive, "> 0"),
    "sync.tiers": (_tiers, None, ""),
    "sync.slip_bias_rpm": (_float, _nonneg, ">= 0"),
    "sync.timeout_s": (_float, _nonneg, ">= 0"),
    "sync.filter_mode": (_choice("sliding", "batch"), None, ""),
    "dispatch.mode": (_choice(*DISPATCH_MODES), None, ""),
    "dispatch.grid_tariff": (str, None, ""),
    "dispatch.gen_tariff": (str, None, ""),
    "dispatch.load": (str, None, ""),
    "dispatch.startup_cost": (_float, _nonneg, ">= 0"),
    "dispatch.hysteresis": (_float, _nonneg, ">= 0"),
    "dispatch.power_saver": (_bool, None, ""),
    "dispatch.min_run_hours": (_int, _nonneg, ">= 0"),
    "breaker.dg": (_breaker, None, ""),
    "breaker.grid": (_breaker, None, ""),
}

REQUIRED = ("seed", "duration_s")


def _read_lines(text: str, errors: list[str]) -> dict[str, tuple[int, str]]:
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value'")
        elif key not in KEYS:
            errors.append(f"line {lineno}: unknown key '{key}'")
        elif key in raw:
            errors.append(f"line {lineno}: duplicate key '{key}' (first on line {raw[key][0]})")
        elif not value:
            errors.append(f"line {lineno}: {key}: missing value")
        else:
            raw[key] = (lineno, value)
    return raw


def parse_scenario(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    errors: list[str] = []
    raw = _read_lines(text, errors)
    values: dict[str, Any] = {}
    for key, (lineno, value) in raw.items():
        conv, check, desc = KEYS[key]
        try:
            parsed = conv(value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: malformed value {value!r} ({exc})")
            continue
        if check is not None and not check(parsed):
            errors.append(f"line {lineno}: {key}: out of range, must be {desc} (got {value})")
            continue
        values[key] = (lineno, parsed)
    for key in REQUIRED:
        if key not in raw:
            errors.append(f"missing required key '{key}'")
    if errors:
        raise ConfigError(errors)

    def get(key: str, default: Any) -> Any:
        return values[key][1] if key in values else default

    def where(key: str) -> str:
        return f"line {values[key][0]}: " if key in values else ""

    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def read_file(key: str, loader, fallback):
        if key not in values:
            return fallback()
        path = Path(values[key][1])
        path = path if path.is_absolute() else base / path
        try:
            return loader(path)
        except OSError as exc:
            errors.append(f"{where(key)}{key}: cannot read {path}: {exc.strerror}")
        except DispatchFileError as exc:
            errors.extend(f"{where(key)}{key}: {path.name}: {e}" for e in exc.errors)
        return None

    grid_tariff = read_file(
        "dispatch.grid_tariff", lambda p: load_tariff(p, Source.GRID), default_grid_tariff
    )
    gen_tariff = read_file(
        "dispatch.gen_tariff", lambda p: load_tariff(p, Source.GENERATOR), default_gen_tariff
    )
    load = read_file("dispatch.load", load_profile, default_load)

    duration_s = get("duration_s", None)
    dt_ms = get("dt_ms", 100)
    if duration_s * 1000 < dt_ms:
        errors.append(f"{where('duration_s')}duration_s: must be at least one tick ({dt_ms} ms)")
    freq = get("grid.freq_Hz", 50.0)
    if get("grid.freq_jitter_Hz", 0.0) >= freq:
        errors.append(f"{where('grid.freq_jitter_Hz')}grid.freq_jitter_Hz: must be < grid.freq_Hz")
    dg, grid_b = get("breaker.dg", BreakerState.OPEN), get("breaker.grid", BreakerState.CLOSED)
    if dg is grid_b:
        errors.append(
            f"{where('breaker.dg') or where('breaker.grid')}breaker.dg/breaker.grid: "
            "exactly one breaker must start closed"
        )
    tiers = get("sync.tiers", DEFAULT_TIERS)
    tol = get("sync.speed_tol_rpm", 2.0)
    if get("sync.slip_bias_rpm", 1.0) >= tol:
        errors.append(
            f"{where('sync.slip_bias_rpm')}sync.slip_bias_rpm: must be below sync.speed_tol_rpm ({tol})"
        )
    if errors:
        raise ConfigError(errors)

    return ScenarioConfig(
        seed=get("seed", 0),
        duration_s=duration_s,
        dt_ms=dt_ms,
        start_hour=get("start_hour", 0),
        generator=GeneratorParams(
            poles=get("generator.poles", 4),
            tau_s=get("generator.tau_s", 0.5),
            emf_gain=get("generator.emf_gain", 10.0),
            ramp_Vps=get("generator.ramp_Vps", 5.0),
            initial_speed_rpm=get("generator.initial_speed_rpm", 0.0),
            initial_excitation_V=get("generator.initial_excitation_V", 0.0),
            initial_phase_deg=get("generator.initial_phase_deg", 0.0),
            tacho_decimals=get("generator.tacho_decimals", 1),
        ),
        grid=GridParams(
            freq_Hz=freq,
            voltage_V=get("grid.voltage_V", 230.0),
            freq_jitter_Hz=get("grid.freq_jitter_Hz", 0.0),
            voltage_jitter_V=get("grid.voltage_jitter_V", 0.0),
            initial_phase_deg=get("grid.initial_phase_deg", 0.0),
        ),
        tolerances=SyncTolerances(
            speed_tol_rpm=get("sync.speed_tol_rpm", 2.0),
            voltage_deadband_V=get("sync.voltage_deadband_V", 2.0),
            phase_window_deg=get("sync.phase_window_deg", 10.0),
            slip_max_Hz=get("sync.slip_max_Hz", 0.2),
        ),
        tiers=tiers,
        slip_bias_rpm=get("sync.slip_bias_rpm", 1.0),
        timeout_s=get("sync.timeout_s", 0.0),
        filter_mode=get("sync.filter_mode", "sliding"),
        dispatch=DispatchParams(
            mode=get("dispatch.mode", "generator"),
            grid_tariff=grid_tariff,
            gen_tariff=gen_tariff,
            load=load,
            options=DispatchOptions(
                startup_cost_rupees=get("dispatch.startup_cost", 2.0),
                hysteresis_margin=get("dispatch.hysteresis", 0.0),
                power_saver=get("dispatch.power_saver", False),
                min_run_hours=get("dispatch.min_run_hours", 0),
            ),
        ),
        breaker_dg=dg,
        breaker_grid=grid_b,
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    return parse_scenario(text, base_dir=path.parent)


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    if not 0 <= seed < 2**64:
        raise ConfigError([f"seed: out of range, must be an unsigned 64-bit integer (got {seed})"])
    return replace(config, seed=seed)

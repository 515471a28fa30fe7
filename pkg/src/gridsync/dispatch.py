"""Hourly source selection between grid supply and the generator set.

Tariff files hold one block per line, ``hour_start hour_end rate`` with the
end hour exclusive; blocks must tile 0..24. Load files hold ``hour value``
lines, one per hour 0..23. ``#`` starts a comment.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

HOURS = 24


class Source(enum.Enum):
    GRID = "Grid"
    GENERATOR = "Generator"
    NONE = "None"


class DispatchFileError(ValueError):
    """Malformed tariff or load file. ``errors`` holds line-numbered messages."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class TariffCurve:
    rates: tuple[float, ...]
    source: Source = Source.GRID

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.rates) != HOURS:
            raise ValueError(f"tariff needs {HOURS} hourly rates, got {len(self.rates)}")
        if not all(r > 0 and math.isfinite(r) for r in self.rates):
            raise ValueError("tariff rates must be finite and > 0")


@dataclass(frozen=True)
class LoadProfile:
    demand_kW: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "demand_kW", tuple(float(v) for v in self.demand_kW))
        if len(self.demand_kW) != HOURS:
            raise ValueError(f"load profile needs {HOURS} entries, got {len(self.demand_kW)}")
        if not all(v >= 0 and math.isfinite(v) for v in self.demand_kW):
            raise ValueError("load demand must be finite and >= 0")

    @classmethod
    def flat(cls, kW: float = 1.0) -> "LoadProfile":
        return cls((kW,) * HOURS)


@dataclass(frozen=True)
class DispatchOptions:
    startup_cost_rupees: float = 2.0
    hysteresis_margin: float = 0.0
    power_saver: bool = False
    min_run_hours: int = 0

    def __post_init__(self) -> None:
        if self.startup_cost_rupees < 0 or self.hysteresis_margin < 0 or self.min_run_hours < 0:
            raise ValueError("dispatch options must be non-negative")


@dataclass(frozen=True)
class DispatchSchedule:
    assignment: tuple[Source, ...]
    total_cost_rupees: float
    switch_count: int
    startups: int = 0


def tariff_at(curve: TariffCurve, hour: int) -> float:
    if not isinstance(hour, int) or not 0 <= hour < HOURS:
        raise ValueError(f"hour must be in 0..{HOURS - 1}, got {hour}")
    return curve.rates[hour]


def _rates(x: TariffCurve | Sequence[float]) -> Sequence[float]:
    return x.rates if isinstance(x, TariffCurve) else x


def _demand(x: LoadProfile | Sequence[float]) -> Sequence[float]:
    return x.demand_kW if isinstance(x, LoadProfile) else x


def assign_sources(
    grid: TariffCurve | Sequence[float],
    gen: TariffCurve | Sequence[float],
    opts: DispatchOptions = DispatchOptions(),
    initial: Source = Source.GRID,
) -> tuple[Source, ...]:
    """Greedy hour-by-hour choice with a hold band.

    A source takes over only when it is cheaper by more than the hysteresis
    margin; otherwise (ties included) the previous hour's source is kept.
    ``initial`` is the source in effect before the first hour.
    """
    grid_r, gen_r = _rates(grid), _rates(gen)
    if len(grid_r) != len(gen_r):
        raise ValueError("tariff curves differ in length")
    margin = opts.hysteresis_margin
    prev, run = initial, 0
    out = []
    for g, d in zip(grid_r, gen_r):
        if prev is Source.GENERATOR and run < opts.min_run_hours:
            cur = Source.GENERATOR
        elif d < g - margin:
            cur = Source.GENERATOR
        elif g < d - margin:
            cur = Source.GRID
        else:
            cur = prev
        run = run + 1 if cur is prev else 1
        out.append(cur)
        prev = cur
    return tuple(out)


def count_switches(assignment: Sequence[Source]) -> int:
    return sum(a is not b for a, b in zip(assignment, assignment[1:]))


def count_startups(
    assignment: Sequence[Source], power_saver: bool = False, initial: Source = Source.GRID
) -> int:
    """Grid-to-generator transitions that pay a start-up charge.

    With power saver on, the set idles after its first run, so only the
    first start is charged.
    """
    starts = sum(
        cur is Source.GENERATOR and prev is not Source.GENERATOR
        for prev, cur in zip((initial, *assignment), assignment)
    )
    return min(starts, 1) if power_saver else starts


def schedule_cost(
    s: DispatchSchedule | Sequence[Source],
    load: LoadProfile | Sequence[float],
    grid: TariffCurve | Sequence[float],
    gen: TariffCurve | Sequence[float],
    opts: DispatchOptions = DispatchOptions(),
) -> float:
    assignment = s.assignment if isinstance(s, DispatchSchedule) else tuple(s)
    demand, grid_r, gen_r = _demand(load), _rates(grid), _rates(gen)
    if not len(assignment) == len(demand) == len(grid_r) == len(gen_r):
        raise ValueError("schedule, load and tariffs differ in length")
    energy = math.fsum(
        kw * (d if src is Source.GENERATOR else g)
        for src, kw, g, d in zip(assignment, demand, grid_r, gen_r)
    )
    return energy + opts.startup_cost_rupees * count_startups(assignment, opts.power_saver)


def _schedule(assignment, load, grid, gen, opts) -> DispatchSchedule:
    return DispatchSchedule(
        assignment=assignment,
        total_cost_rupees=schedule_cost(assignment, load, grid, gen, opts),
        switch_count=count_switches(assignment),
        startups=count_startups(assignment, opts.power_saver),
    )


def build_schedule(
    grid: TariffCurve,
    gen: TariffCurve,
    load: LoadProfile,
    opts: DispatchOptions = DispatchOptions(),
) -> DispatchSchedule:
    return _schedule(assign_sources(grid, gen, opts), load, grid, gen, opts)


def exhaustive_schedule(
    grid: Sequence[float],
    gen: Sequence[float],
    load: Sequence[float],
    opts: DispatchOptions = DispatchOptions(),
) -> DispatchSchedule:
    """Cheapest assignment by enumerating all ``2**n`` choices. Small ``n`` only."""
    if len(grid) > 16:
        raise ValueError("exhaustive search is limited to 16 hours")
    best = None
    for combo in itertools.product((Source.GRID, Source.GENERATOR), repeat=len(grid)):
        cost = schedule_cost(combo, load, grid, gen, opts)
        if best is None or cost < best[0]:
            best = (cost, combo)
    return _schedule(best[1], load, grid, gen, opts)


def all_grid(n: int = HOURS) -> tuple[Source, ...]:
    return (Source.GRID,) * n


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_tariff(text: str, source: Source = Source.GRID) -> TariffCurve:
    errors: list[str] = []
    rates: list[float | None] = [None] * HOURS
    for lineno, parts in _tokens(text):
        if len(parts) != 3:
            errors.append(f"line {lineno}: expected 'hour_start hour_end rate'")
            continue
        try:
            start, end, rate = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            errors.append(f"line {lineno}: malformed number in {' '.join(parts)!r}")
            continue
        if not 0 <= start < end <= HOURS:
            errors.append(f"line {lineno}: hour range {start}-{end} outside 0..{HOURS}")
            continue
        if not (rate > 0 and math.isfinite(rate)):
            errors.append(f"line {lineno}: rate must be > 0, got {parts[2]}")
            continue
        for h in range(start, end):
            if rates[h] is not None:
                errors.append(f"line {lineno}: hour {h} already has a rate")
                break
            rates[h] = rate
    missing = [h for h, r in enumerate(rates) if r is None]
    if missing and not errors:
        errors.append(f"no rate for hours {missing}")
    if errors:
        raise DispatchFileError(errors)
    return TariffCurve(tuple(rates), source)


def format_tariff(curve: TariffCurve) -> str:
    lines = [f"# {curve.source.value} tariff, rupees/kWh: hour_start hour_end rate"]
    start = 0
    for h in range(1, HOURS + 1):
        if h == HOURS or curve.rates[h] != curve.rates[start]:
            lines.append(f"{start} {h} {curve.rates[start]!r}")
            start = h
    return "\n".join(lines) + "\n"


def parse_load(text: str) -> LoadProfile:
    errors: list[str] = []
    demand: list[float | None] = [None] * HOURS
    for lineno, parts in _tokens(text):
        if len(parts) != 2:
            errors.append(f"line {lineno}: expected 'hour value'")
            continue
        try:
            hour, value = int(parts[0]), float(parts[1])
        except ValueError:
            errors.append(f"line {lineno}: malformed number in {' '.join(parts)!r}")
            continue
        if not 0 <= hour < HOURS:
            errors.append(f"line {lineno}: hour {hour} outside 0..{HOURS - 1}")
        elif not (value >= 0 and math.isfinite(value)):
            errors.append(f"line {lineno}: demand must be >= 0, got {parts[1]}")
        elif demand[hour] is not None:
            errors.append(f"line {lineno}: hour {hour} listed twice")
        else:
            demand[hour] = value
    missing = [h for h, v in enumerate(demand) if v is None]
    if missing and not errors:
        errors.append(f"no demand for hours {missing}")
    if errors:
        raise DispatchFileError(errors)
    return LoadProfile(tuple(demand))


def format_load(profile: LoadProfile) -> str:
    lines = ["# load profile, kW: hour value"]
    lines += [f"{h} {v!r}" for h, v in enumerate(profile.demand_kW)]
    return "\n".join(lines) + "\n"


def _data_text(name: str) -> str:
    return resources.files("gridsync.data").joinpath(name).read_text()


def default_grid_tariff() -> TariffCurve:
    return parse_tariff(_data_text("grid_tariff.txt"), Source.GRID)


def default_gen_tariff() -> TariffCurve:
    return parse_tariff(_data_text("gen_tariff.txt"), Source.GENERATOR)


def default_load() -> LoadProfile:
    return parse_load(_data_text("flat_load.txt"))


def load_tariff(path: str | Path, source: Source = Source.GRID) -> TariffCurve:
    return parse_tariff(Path(path).read_text(), source)


def load_profile(path: str | Path) -> LoadProfile:
    return parse_load(Path(path).read_text())

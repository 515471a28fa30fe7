"""Per-tick trace records and their CSV rendering."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Iterable

from gridsync.dispatch import Source
from gridsync.switchgear import BreakerState


@dataclass(frozen=True)
class TraceRecord:
    """One row per tick.

    Plant quantities are taken after the plant stage. The permissive flags,
    ``grid_*`` readings and ``phase_diff_deg`` are the values the controller
    acted on during the tick, so a breaker closing in a row can be checked
    against the flags of that same row.
    """

    time_ms: int
    gen_speed_rpm: float
    gen_setpoint_rpm: float
    grid_speed_rpm: float
    gen_voltage_V: float
    grid_voltage_V: float
    phase_diff_deg: float
    speed_ok: bool
    voltage_ok: bool
    phase_ok: bool
    permissive: bool
    breaker_dg: BreakerState
    breaker_grid: BreakerState
    active_source: Source
    cumulative_cost_rupees: float


COLUMNS = tuple(f.name for f in fields(TraceRecord))


def _cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = f"{value:.6g}"
        return "0" if text == "-0" else text
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def export_trace(records: Iterable[TraceRecord]) -> str:
    """CSV text: a header row, then one line per record, 6 significant digits."""
    lines = [",".join(COLUMNS)]
    lines += [",".join(_cell(getattr(r, c)) for c in COLUMNS) for r in records]
    return "\n".join(lines) + "\n"

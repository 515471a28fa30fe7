"""Meter readings, the 8-sample averaging filter and frequency/speed conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

from gridsync.plant import GridState

FILTER_CAPACITY = 8

FilterMode = Literal["sliding", "batch"]


@dataclass(frozen=True)
class FilterWindow:
    """Averaging window over the last ``capacity`` samples.

    In ``sliding`` mode every push after warm-up yields the mean of the most
    recent ``capacity`` samples. In ``batch`` mode the window is emptied after
    each output, so only every ``capacity``-th push yields a value.
    """

    capacity: int = FILTER_CAPACITY
    samples: tuple[float, ...] = ()
    mode: FilterMode = "sliding"

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if len(self.samples) > self.capacity:
            raise ValueError("window holds more samples than its capacity")
        if self.mode not in ("sliding", "batch"):
            raise ValueError(f"unknown filter mode {self.mode!r}")

    @property
    def count(self) -> int:
        return len(self.samples)


def filter_push(w: FilterWindow, sample: float) -> tuple[FilterWindow, Optional[float]]:
    if not math.isfinite(sample):
        raise ValueError(f"filter sample must be finite, got {sample}")
    samples = (w.samples + (float(sample),))[-w.capacity:]
    if len(samples) < w.capacity:
        return FilterWindow(w.capacity, samples, w.mode), None
    # fsum is correctly rounded: constant input averages back to itself
    # and the mean never leaves [min, max] of the window
    mean = math.fsum(samples) / w.capacity
    if w.mode == "batch":
        samples = ()
    return FilterWindow(w.capacity, samples, w.mode), mean


def speed_from_frequency(f_Hz: float, poles: int) -> float:
    """Synchronous speed in rpm, ``N = 120 f / P``."""
    if not isinstance(poles, int) or poles < 2 or poles % 2:
        raise ValueError(f"poles must be an even integer >= 2, got {poles}")
    if not f_Hz > 0:
        raise ValueError(f"frequency must be > 0, got {f_Hz}")
    return 120.0 * f_Hz / poles


@dataclass(frozen=True)
class MeterReading:
    frequency_Hz: float
    voltage_V: float

    def __post_init__(self) -> None:
        if not self.frequency_Hz > 0:
            raise ValueError(f"frequency_Hz must be > 0, got {self.frequency_Hz}")
        if self.voltage_V < 0:
            raise ValueError(f"voltage_V must be >= 0, got {self.voltage_V}")


def meter_read(grid: GridState) -> MeterReading:
    return MeterReading(frequency_Hz=grid.measured_freq_Hz, voltage_V=grid.measured_voltage_V)


def tacho_read(speed_rpm: float, decimals: int | None = 1) -> float:
    """Shaft speed as shown by a tachometer display with ``decimals`` digits.

    ``decimals=None`` returns the exact speed.
    """
    if decimals is None:
        return speed_rpm
    if decimals < 0:
        raise ValueError(f"decimals must be >= 0, got {decimals}")
    return round(speed_rpm, decimals)

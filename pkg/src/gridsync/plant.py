"""Simulated plant: generator set, excitation module, grid source and load."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from gridsync.simcore import RngState, noise_sample


def wrap_deg(angle: float) -> float:
    """Wrap an angle into ``[0, 360)``."""
    wrapped = angle % 360.0
    # float modulo can return exactly 360.0 for tiny negative inputs
    return 0.0 if wrapped >= 360.0 else wrapped


def electrical_freq_hz(speed_rpm: float, poles: int) -> float:
    return speed_rpm * poles / 120.0


@dataclass(frozen=True)
class GeneratorState:
    """Rotating machine with a first-order prime-mover lag and a linear EMF.

    Attributes:
        speed_rpm: Shaft speed.
        setpoint_rpm: Governor speed reference, moved by the speed loop.
        poles: Number of magnetic poles (even).
        excitation_V: Field voltage fed from the excitation module.
        terminal_V: No-load terminal voltage, ``emf_gain_VperV * excitation_V``.
        phase_deg: Electrical angle of the terminal voltage, ``[0, 360)``.
        speed_tau_s: Time constant of the speed lag.
        emf_gain_VperV: Terminal volts per field volt.
    """

    speed_rpm: float = 0.0
    setpoint_rpm: float = 0.0
    poles: int = 4
    excitation_V: float = 0.0
    phase_deg: float = 0.0
    speed_tau_s: float = 0.5
    emf_gain_VperV: float = 10.0

    def __post_init__(self) -> None:
        if self.poles < 2 or self.poles % 2:
            raise ValueError(f"poles must be an even integer >= 2, got {self.poles}")
        if self.speed_tau_s <= 0:
            raise ValueError(f"speed_tau_s must be > 0, got {self.speed_tau_s}")
        if self.emf_gain_VperV <= 0:
            raise ValueError(f"emf_gain_VperV must be > 0, got {self.emf_gain_VperV}")
        if self.speed_rpm < 0 or self.setpoint_rpm < 0 or self.excitation_V < 0:
            raise ValueError("speed, setpoint and excitation must be >= 0")

    @property
    def terminal_V(self) -> float:
        return self.emf_gain_VperV * self.excitation_V

    @property
    def freq_hz(self) -> float:
        return electrical_freq_hz(self.speed_rpm, self.poles)


def generator_step(
    g: GeneratorState, dt_s: float, excitation_V: float | None = None
) -> GeneratorState:
    """Advance the machine by ``dt_s``.

    ``excitation_V`` is the field voltage applied during this step; when
    omitted the machine keeps its current field.
    """
    if dt_s <= 0:
        raise ValueError(f"dt_s must be > 0, got {dt_s}")
    alpha = min(1.0, dt_s / g.speed_tau_s)
    speed = g.speed_rpm + (g.setpoint_rpm - g.speed_rpm) * alpha
    phase = wrap_deg(g.phase_deg + 360.0 * electrical_freq_hz(speed, g.poles) * dt_s)
    field = g.excitation_V if excitation_V is None else excitation_V
    return replace(
        g,
        speed_rpm=speed,
        phase_deg=phase,
        excitation_V=field,
    )


@dataclass(frozen=True)
class ExcitationModule:
    """Excitation module driven by four push-button inputs.

    ON/OFF latch the module; UP/DOWN ramp the field voltage only while it
    is enabled. Pins are plain booleans: ``True`` means the button input is
    being driven through its relay contact.
    """

    enabled: bool = False
    output_V: float = 0.0
    ramp_Vps: float = 5.0
    pin_on: bool = False
    pin_off: bool = False
    pin_up: bool = False
    pin_down: bool = False

    def __post_init__(self) -> None:
        if self.ramp_Vps <= 0:
            raise ValueError(f"ramp_Vps must be > 0, got {self.ramp_Vps}")
        if self.output_V < 0:
            raise ValueError(f"output_V must be >= 0, got {self.output_V}")


def excitation_step(m: ExcitationModule, dt_s: float) -> ExcitationModule:
    if dt_s <= 0:
        raise ValueError(f"dt_s must be > 0, got {dt_s}")
    enabled = m.enabled
    # OFF wins over ON when both are pressed
    if m.pin_off:
        enabled = False
    elif m.pin_on:
        enabled = True
    output = m.output_V
    if enabled and m.pin_up != m.pin_down:
        delta = m.ramp_Vps * dt_s
        output = output + delta if m.pin_up else max(0.0, output - delta)
    return replace(m, enabled=enabled, output_V=output)


@dataclass(frozen=True)
class GridState:
    """Stiff grid source with bounded frequency and voltage jitter."""

    nominal_freq_Hz: float = 50.0
    freq_jitter_Hz: float = 0.0
    voltage_V: float = 230.0
    voltage_jitter_V: float = 0.0
    phase_deg: float = 0.0
    measured_freq_Hz: float | None = None
    measured_voltage_V: float | None = None

    def __post_init__(self) -> None:
        if self.nominal_freq_Hz <= 0:
            raise ValueError(f"nominal_freq_Hz must be > 0, got {self.nominal_freq_Hz}")
        if self.voltage_V <= 0:
            raise ValueError(f"voltage_V must be > 0, got {self.voltage_V}")
        if self.freq_jitter_Hz < 0 or self.voltage_jitter_V < 0:
            raise ValueError("jitter amplitudes must be >= 0")
        if self.freq_jitter_Hz >= self.nominal_freq_Hz:
            raise ValueError("freq_jitter_Hz must be smaller than nominal_freq_Hz")
        if self.measured_freq_Hz is None:
            object.__setattr__(self, "measured_freq_Hz", self.nominal_freq_Hz)
        if self.measured_voltage_V is None:
            object.__setattr__(self, "measured_voltage_V", self.voltage_V)


def grid_step(s: GridState, rng: RngState, dt_s: float) -> tuple[GridState, RngState]:
    """Draw new frequency and voltage samples, then advance the grid phase.

    Two draws per call, frequency first.
    """
    if dt_s <= 0:
        raise ValueError(f"dt_s must be > 0, got {dt_s}")
    df, rng = noise_sample(rng, s.freq_jitter_Hz)
    dv, rng = noise_sample(rng, s.voltage_jitter_V)
    freq = s.nominal_freq_Hz + df
    state = replace(
        s,
        measured_freq_Hz=freq,
        measured_voltage_V=s.voltage_V + dv,
        phase_deg=wrap_deg(s.phase_deg + 360.0 * freq * dt_s),
    )
    return state, rng


@dataclass(frozen=True)
class LoadState:
    """Hourly demand profile; ``demand_kW`` for the current hour."""

    profile_kW: tuple[float, ...] = (1.0,) * 24
    hour: int = 0

    def __post_init__(self) -> None:
        if len(self.profile_kW) != 24:
            raise ValueError(f"load profile needs 24 entries, got {len(self.profile_kW)}")
        if any(v < 0 for v in self.profile_kW):
            raise ValueError("load demand must be >= 0")
        if not 0 <= self.hour < 24:
            raise ValueError(f"hour must be in 0..23, got {self.hour}")

    @property
    def demand_kW(self) -> float:
        return self.profile_kW[self.hour]


def load_at(profile_kW: Sequence[float], hour: int) -> LoadState:
    return LoadState(profile_kW=tuple(profile_kW), hour=hour)

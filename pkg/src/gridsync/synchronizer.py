"""Automatic synchronizer: speed matching, voltage matching and close permissive.

The supervisor walks a fixed path and may fall back along it whenever a
condition it already passed is lost::

    Idle -> SpeedSync -> VoltageSync -> PhaseWait -> Closing -> Synced
                 ^            ^   |         |  |         |
                 |            +---|---------+  |         |
                 +----------------+------------+---------+   (regressions)

Any non-terminal phase goes to Aborted on an abort request, on timeout, or
if a close would be emitted without the overall permissive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from gridsync.plant import GeneratorState, GridState, electrical_freq_hz
from gridsync.sensing import speed_from_frequency


class SpeedTier(NamedTuple):
    """Speed differences in ``(lower_rpm, upper_rpm]`` step by ``increment_rpm``."""

    lower_rpm: float
    upper_rpm: float
    increment_rpm: float


@dataclass(frozen=True)
class SpeedTierTable:
    tiers: tuple[SpeedTier, ...]
    tolerance_rpm: float = 2.0

    def __post_init__(self) -> None:
        tiers = tuple(SpeedTier(*t) for t in self.tiers)
        object.__setattr__(self, "tiers", tiers)
        if not tiers:
            raise ValueError("tier table is empty")
        if not self.tolerance_rpm >= 0:
            raise ValueError(f"tolerance_rpm must be >= 0, got {self.tolerance_rpm}")
        if tiers[0].upper_rpm != math.inf:
            raise ValueError("the largest tier must be unbounded above")
        for hi, lo in zip(tiers, tiers[1:]):
            if lo.upper_rpm != hi.lower_rpm:
                raise ValueError(
                    f"tiers must be contiguous: {lo.upper_rpm} != {hi.lower_rpm}"
                )
            if lo.increment_rpm > hi.increment_rpm:
                raise ValueError("increments must not grow as the speed difference shrinks")
        if tiers[-1].lower_rpm != self.tolerance_rpm:
            raise ValueError(
                f"smallest tier must start at the tolerance ({self.tolerance_rpm} rpm)"
            )
        for t in tiers:
            if not t.lower_rpm < t.upper_rpm:
                raise ValueError(f"empty tier {t}")
            if not t.increment_rpm > 0:
                raise ValueError(f"tier increment must be > 0, got {t.increment_rpm}")

    @classmethod
    def from_thresholds(
        cls, thresholds: Sequence[tuple[float, float]]
    ) -> "SpeedTierTable":
        """Build from ``(lower_rpm, increment_rpm)`` pairs, largest first.

        The smallest lower bound becomes the loop tolerance.
        """
        pairs = sorted(thresholds, key=lambda p: p[0], reverse=True)
        uppers = [math.inf] + [p[0] for p in pairs[:-1]]
        tiers = tuple(SpeedTier(lo, up, inc) for (lo, inc), up in zip(pairs, uppers))
        return cls(tiers=tiers, tolerance_rpm=pairs[-1][0])


DEFAULT_TIERS = SpeedTierTable.from_thresholds([(500.0, 50.0), (100.0, 10.0), (2.0, 2.0)])


def speed_increment(diff_rpm: float, tiers: SpeedTierTable = DEFAULT_TIERS) -> float:
    """Signed setpoint step for a speed difference ``grid - setpoint``."""
    size = abs(diff_rpm)
    if size <= tiers.tolerance_rpm:
        return 0.0
    for tier in tiers.tiers:
        if tier.lower_rpm < size <= tier.upper_rpm:
            return math.copysign(tier.increment_rpm, diff_rpm)
    raise AssertionError(f"no tier covers {size} rpm")  # table validation forbids gaps


def speed_sync_step(
    setpoint_rpm: float, grid_speed_rpm: float, tiers: SpeedTierTable = DEFAULT_TIERS
) -> float:
    diff = grid_speed_rpm - setpoint_rpm
    step = speed_increment(diff, tiers)
    if abs(step) > abs(diff):
        step = diff
    return setpoint_rpm + step


def slip_trim_step(
    setpoint_rpm: float,
    grid_speed_rpm: float,
    bias_rpm: float,
    tiers: SpeedTierTable = DEFAULT_TIERS,
) -> float:
    """Hold the setpoint ``bias_rpm`` below grid speed while waiting for phase.

    With speed already inside tolerance the grid and generator phasors can
    sit still relative to each other; a small steady slip makes the angle
    difference sweep through the closing window. The move per call is
    limited to the smallest tier increment.
    """
    if bias_rpm < 0:
        raise ValueError(f"bias_rpm must be >= 0, got {bias_rpm}")
    target = max(0.0, grid_speed_rpm - bias_rpm)
    limit = tiers.tiers[-1].increment_rpm
    return setpoint_rpm + max(-limit, min(limit, target - setpoint_rpm))


class VoltageCommand(enum.Enum):
    SWITCH_ON = "SwitchOn"
    UP = "Up"
    DOWN = "Down"
    HOLD = "Hold"
    SWITCH_OFF = "SwitchOff"


def voltage_sync_step(
    gen_V: float, grid_V: float, deadband_V: float, excitation_enabled: bool
) -> VoltageCommand:
    if not deadband_V > 0:
        raise ValueError(f"deadband_V must be > 0, got {deadband_V}")
    within = abs(gen_V - grid_V) <= deadband_V
    if not excitation_enabled:
        return VoltageCommand.HOLD if within else VoltageCommand.SWITCH_ON
    if gen_V < grid_V - deadband_V:
        return VoltageCommand.UP
    if gen_V > grid_V + deadband_V:
        return VoltageCommand.DOWN
    return VoltageCommand.SWITCH_OFF


@dataclass(frozen=True)
class SyncTolerances:
    speed_tol_rpm: float = 2.0
    voltage_deadband_V: float = 2.0
    phase_window_deg: float = 10.0
    slip_max_Hz: float = 0.2

    def __post_init__(self) -> None:
        for name in ("speed_tol_rpm", "voltage_deadband_V", "phase_window_deg", "slip_max_Hz"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")


def phase_difference(gen_phase_deg: float, grid_phase_deg: float) -> float:
    """Signed angle ``gen - grid`` in ``[-180, 180)``."""
    return (gen_phase_deg - grid_phase_deg + 180.0) % 360.0 - 180.0


def phase_permissive(phase_diff_deg: float, slip_Hz: float, tol: SyncTolerances) -> bool:
    return abs(phase_diff_deg) <= tol.phase_window_deg and abs(slip_Hz) <= tol.slip_max_Hz


@dataclass(frozen=True)
class SyncPermissive:
    speed_ok: bool = False
    voltage_ok: bool = False
    phase_ok: bool = False

    @property
    def overall(self) -> bool:
        return self.speed_ok and self.voltage_ok and self.phase_ok


NO_PERMISSIVE = SyncPermissive()


def evaluate_permissives(
    gen: GeneratorState,
    grid: GridState,
    tol: SyncTolerances,
    *,
    gen_speed_rpm: float | None = None,
    grid_freq_Hz: float | None = None,
    grid_voltage_V: float | None = None,
) -> SyncPermissive:
    """Check the three closing conditions.

    The keyword overrides let the caller feed sensed values (tachometer
    reading, filtered meter values) instead of the true plant state.
    """
    speed = gen.speed_rpm if gen_speed_rpm is None else gen_speed_rpm
    f_grid = grid.measured_freq_Hz if grid_freq_Hz is None else grid_freq_Hz
    v_grid = grid.measured_voltage_V if grid_voltage_V is None else grid_voltage_V
    grid_speed = speed_from_frequency(f_grid, gen.poles)
    slip = electrical_freq_hz(speed, gen.poles) - f_grid
    return SyncPermissive(
        speed_ok=abs(speed - grid_speed) <= tol.speed_tol_rpm,
        voltage_ok=abs(gen.terminal_V - v_grid) <= tol.voltage_deadband_V,
        phase_ok=phase_permissive(phase_difference(gen.phase_deg, grid.phase_deg), slip, tol),
    )


class SyncPhase(enum.Enum):
    IDLE = "Idle"
    SPEED_SYNC = "SpeedSync"
    VOLTAGE_SYNC = "VoltageSync"
    PHASE_WAIT = "PhaseWait"
    CLOSING = "Closing"
    SYNCED = "Synced"
    ABORTED = "Aborted"


_ACTIVE = (SyncPhase.SPEED_SYNC, SyncPhase.VOLTAGE_SYNC, SyncPhase.PHASE_WAIT, SyncPhase.CLOSING)
_VOLTAGE_ACTIVE = _ACTIVE[1:]

ALLOWED_TRANSITIONS: dict[SyncPhase, frozenset[SyncPhase]] = {
    SyncPhase.IDLE: frozenset({SyncPhase.SPEED_SYNC, SyncPhase.ABORTED}),
    SyncPhase.SPEED_SYNC: frozenset({SyncPhase.VOLTAGE_SYNC, SyncPhase.ABORTED}),
    SyncPhase.VOLTAGE_SYNC: frozenset(
        {SyncPhase.SPEED_SYNC, SyncPhase.PHASE_WAIT, SyncPhase.ABORTED}
    ),
    SyncPhase.PHASE_WAIT: frozenset(
        {SyncPhase.SPEED_SYNC, SyncPhase.VOLTAGE_SYNC, SyncPhase.CLOSING, SyncPhase.ABORTED}
    ),
    SyncPhase.CLOSING: frozenset(
        {
            SyncPhase.SPEED_SYNC,
            SyncPhase.VOLTAGE_SYNC,
            SyncPhase.PHASE_WAIT,
            SyncPhase.SYNCED,
            SyncPhase.ABORTED,
        }
    ),
    SyncPhase.SYNCED: frozenset(),
    SyncPhase.ABORTED: frozenset(),
}


@dataclass(frozen=True)
class SyncSupervisorState:
    phase: SyncPhase = SyncPhase.IDLE
    entered_tick: int = 0
    started_tick: int | None = None
    abort_reason: str | None = None


@dataclass(frozen=True)
class SupervisorInputs:
    """Per-tick requests and feedback seen by the supervisor."""

    tick: int = 0
    start: bool = False
    abort: bool = False
    breaker_closed: bool = False
    excitation_enabled: bool = False


@dataclass(frozen=True)
class SupervisorCommands:
    run_speed_loop: bool = False
    run_slip_trim: bool = False
    run_voltage_loop: bool = False
    close_breaker: bool = False
    transfer_window: bool = False


def _enter(state: SyncSupervisorState, phase: SyncPhase, tick: int, **kw) -> SyncSupervisorState:
    if phase is state.phase:
        return state
    if phase not in ALLOWED_TRANSITIONS[state.phase]:
        raise AssertionError(f"illegal supervisor transition {state.phase} -> {phase}")
    return SyncSupervisorState(
        phase=phase,
        entered_tick=tick,
        started_tick=kw.get("started_tick", state.started_tick),
        abort_reason=kw.get("abort_reason"),
    )


def supervisor_step(
    state: SyncSupervisorState,
    permissive: SyncPermissive,
    pending: SupervisorInputs,
    timeout_ticks: int | None = None,
) -> tuple[SyncSupervisorState, SupervisorCommands]:
    tick = pending.tick
    phase = state.phase

    if phase in (SyncPhase.SYNCED, SyncPhase.ABORTED):
        return state, SupervisorCommands()
    if pending.abort:
        return _enter(state, SyncPhase.ABORTED, tick, abort_reason="abort requested"), SupervisorCommands()
    if phase is SyncPhase.IDLE:
        if not pending.start:
            return state, SupervisorCommands()
        state = _enter(state, SyncPhase.SPEED_SYNC, tick, started_tick=tick)
        return state, SupervisorCommands(run_speed_loop=True)
    if (
        timeout_ticks is not None
        and state.started_tick is not None
        and tick - state.started_tick >= timeout_ticks
    ):
        return _enter(state, SyncPhase.ABORTED, tick, abort_reason="timeout"), SupervisorCommands()

    close = False
    if phase is SyncPhase.CLOSING and pending.breaker_closed:
        nxt = SyncPhase.SYNCED
    elif not permissive.speed_ok:
        nxt = SyncPhase.SPEED_SYNC
    elif phase is SyncPhase.SPEED_SYNC:
        nxt = SyncPhase.VOLTAGE_SYNC
    elif not permissive.voltage_ok or (
        phase is SyncPhase.VOLTAGE_SYNC and pending.excitation_enabled
    ):
        nxt = SyncPhase.VOLTAGE_SYNC
    elif not permissive.phase_ok or phase is SyncPhase.VOLTAGE_SYNC:
        nxt = SyncPhase.PHASE_WAIT
    else:
        nxt = SyncPhase.CLOSING
        close = True

    if close and not permissive.overall:
        return (
            _enter(state, SyncPhase.ABORTED, tick, abort_reason="close without permissive"),
            SupervisorCommands(),
        )
    state = _enter(state, nxt, tick)
    if state.phase is SyncPhase.SYNCED:
        return state, SupervisorCommands()
    trim = state.phase in (SyncPhase.PHASE_WAIT, SyncPhase.CLOSING)
    return state, SupervisorCommands(
        run_speed_loop=not trim,
        run_slip_trim=trim,
        run_voltage_loop=state.phase in _VOLTAGE_ACTIVE,
        close_breaker=close,
        transfer_window=state.phase is SyncPhase.CLOSING,
    )

"""Scenario runner.

Each tick runs five stages in a fixed order:

1. sense    -- meter reading into the 8-sample filters, tachometer, permissives
2. control  -- source selection, supervisor, speed loop, voltage loop
3. actuate  -- relay pins, excitation buttons, breakers
4. plant    -- excitation module, generator, grid (two noise draws)
5. record   -- clock advance, energy cost, one TraceRecord

The golden trace under ``tests/golden`` pins this order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from gridsync.config import ScenarioConfig
from gridsync.dispatch import Source, assign_sources
from gridsync.plant import (
    ExcitationModule,
    GeneratorState,
    GridState,
    excitation_step,
    generator_step,
    grid_step,
    wrap_deg,
)
from gridsync.sensing import FilterWindow, filter_push, meter_read, speed_from_frequency, tacho_read
from gridsync.simcore import RngState, SimClock, advance
from gridsync.switchgear import (
    Breaker,
    BreakerId,
    BreakerState,
    Channel,
    PinBank,
    SafetyEvent,
    breaker_step,
    drive_channels,
    energised_channels,
)
from gridsync.synchronizer import (
    NO_PERMISSIVE,
    SupervisorInputs,
    SyncPhase,
    SyncSupervisorState,
    VoltageCommand,
    evaluate_permissives,
    phase_difference,
    slip_trim_step,
    speed_sync_step,
    supervisor_step,
    voltage_sync_step,
)
from gridsync.trace import TraceRecord

log = logging.getLogger(__name__)

_MS_PER_HOUR = 3_600_000
_DRIVEN_CHANNELS = tuple(range(Channel.EXCITATION_ON, Channel.SWITCH_OFF + 1))
_VOLTAGE_CHANNEL = {
    VoltageCommand.SWITCH_ON: Channel.EXCITATION_ON,
    VoltageCommand.SWITCH_OFF: Channel.EXCITATION_OFF,
    VoltageCommand.UP: Channel.EXCITATION_UP,
    VoltageCommand.DOWN: Channel.EXCITATION_DOWN,
}


class ScenarioError(RuntimeError):
    def __init__(self, tick: int, cause: Exception):
        super().__init__(f"tick {tick}: {cause}")
        self.tick = tick
        self.cause = cause


@dataclass
class ScenarioResult:
    records: list[TraceRecord] = field(default_factory=list)
    safety_events: list[SafetyEvent] = field(default_factory=list)
    phases: list[SyncPhase] = field(default_factory=list)
    speed_steps: int = 0
    supervisor: SyncSupervisorState = SyncSupervisorState()

    @property
    def safety_violation(self) -> bool:
        return bool(self.safety_events)


def _active_source(dg: Breaker, grid: Breaker) -> Source:
    if grid.closed:
        return Source.GRID
    if dg.closed:
        return Source.GENERATOR
    return Source.NONE


def _target_schedule(config: ScenarioConfig) -> tuple[Source, ...]:
    d = config.dispatch
    if d.mode == "generator":
        return (Source.GENERATOR,) * 24
    if d.mode == "grid":
        return (Source.GRID,) * 24
    return assign_sources(d.grid_tariff, d.gen_tariff, d.options)


def simulate(config: ScenarioConfig) -> ScenarioResult:
    gp, rp = config.generator, config.grid
    dt_s = config.dt_ms / 1000.0
    clock = SimClock(dt_ms=config.dt_ms)
    rng = RngState.from_seed(config.seed)
    gen = GeneratorState(
        speed_rpm=gp.initial_speed_rpm,
        setpoint_rpm=gp.initial_speed_rpm,
        poles=gp.poles,
        excitation_V=gp.initial_excitation_V,
        phase_deg=wrap_deg(gp.initial_phase_deg),
        speed_tau_s=gp.tau_s,
        emf_gain_VperV=gp.emf_gain,
    )
    exc = ExcitationModule(output_V=gp.initial_excitation_V, ramp_Vps=gp.ramp_Vps)
    grid = GridState(
        nominal_freq_Hz=rp.freq_Hz,
        freq_jitter_Hz=rp.freq_jitter_Hz,
        voltage_V=rp.voltage_V,
        voltage_jitter_V=rp.voltage_jitter_V,
        phase_deg=wrap_deg(rp.initial_phase_deg),
    )
    f_filter = FilterWindow(mode=config.filter_mode)
    v_filter = FilterWindow(mode=config.filter_mode)
    f_grid = v_grid = None
    pins = PinBank()
    dg = Breaker(BreakerId.DG, config.breaker_dg, interlock_with=BreakerId.GRID)
    mains = Breaker(BreakerId.GRID, config.breaker_grid, interlock_with=BreakerId.DG)
    sup = SyncSupervisorState()
    targets = _target_schedule(config)
    opts = config.dispatch.options
    load = config.dispatch.load.demand_kW
    grid_rates = config.dispatch.grid_tariff.rates
    gen_rates = config.dispatch.gen_tariff.rates
    timeout = config.timeout_ticks

    cost = 0.0
    gen_has_run = False
    active = _active_source(dg, mains)
    out = ScenarioResult()

    for _ in range(config.n_ticks):
        tick = clock.tick
        try:
            hour = (config.start_hour + clock.elapsed_ms // _MS_PER_HOUR) % 24

            # sense
            reading = meter_read(grid)
            f_filter, f_new = filter_push(f_filter, reading.frequency_Hz)
            v_filter, v_new = filter_push(v_filter, reading.voltage_V)
            f_grid = f_new if f_new is not None else f_grid
            v_grid = v_new if v_new is not None else v_grid
            gen_speed = tacho_read(gen.speed_rpm, gp.tacho_decimals)
            phase_diff = phase_difference(gen.phase_deg, grid.phase_deg)
            warm = f_grid is not None and v_grid is not None
            if warm:
                permissive = evaluate_permissives(
                    gen,
                    grid,
                    config.tolerances,
                    gen_speed_rpm=gen_speed,
                    grid_freq_Hz=f_grid,
                    grid_voltage_V=v_grid,
                )
                grid_speed = speed_from_frequency(f_grid, gen.poles)
            else:
                permissive = NO_PERMISSIVE
                grid_speed = speed_from_frequency(reading.frequency_Hz, gen.poles)

            # control
            target = targets[hour]
            dg_open_req = mains_close_req = mains_open_req = False
            if target is Source.GRID:
                if sup.phase not in (SyncPhase.IDLE, SyncPhase.ABORTED):
                    sup = SyncSupervisorState(entered_tick=tick)
                dg_open_req = dg.closed
                mains_close_req = not mains.closed and not dg.closed
            elif dg.closed and mains.closed:
                mains_open_req = True
            start = (
                target is Source.GENERATOR
                and not dg.closed
                and mains.closed
                and sup.phase is SyncPhase.IDLE
            )
            sup, cmds = supervisor_step(
                sup,
                permissive,
                SupervisorInputs(
                    tick=tick,
                    start=start,
                    breaker_closed=dg.closed,
                    excitation_enabled=exc.enabled,
                ),
                timeout_ticks=timeout,
            )
            if f_grid is not None and (cmds.run_speed_loop or cmds.run_slip_trim):
                if cmds.run_speed_loop:
                    new_setpoint = speed_sync_step(gen.setpoint_rpm, grid_speed, config.tiers)
                    out.speed_steps += new_setpoint != gen.setpoint_rpm
                else:
                    new_setpoint = slip_trim_step(
                        gen.setpoint_rpm, grid_speed, config.slip_bias_rpm, config.tiers
                    )
                if new_setpoint != gen.setpoint_rpm:
                    gen = replace(gen, setpoint_rpm=new_setpoint)
            vcmd = VoltageCommand.HOLD
            if cmds.run_voltage_loop and v_grid is not None:
                vcmd = voltage_sync_step(
                    gen.terminal_V, v_grid, config.tolerances.voltage_deadband_V, exc.enabled
                )

            # actuate
            asserted = set()
            if vcmd in _VOLTAGE_CHANNEL:
                asserted.add(_VOLTAGE_CHANNEL[vcmd])
            if cmds.close_breaker:
                asserted.add(Channel.SWITCH_ON)
            if dg_open_req:
                asserted.add(Channel.SWITCH_OFF)
            pins = drive_channels(pins, asserted, _DRIVEN_CHANNELS)
            live = energised_channels(pins)
            exc = replace(
                exc,
                pin_on=Channel.EXCITATION_ON in live,
                pin_off=Channel.EXCITATION_OFF in live,
                pin_up=Channel.EXCITATION_UP in live,
                pin_down=Channel.EXCITATION_DOWN in live,
            )
            was_closed = dg.closed
            mains_state = mains.state
            dg, event = breaker_step(
                dg,
                Channel.SWITCH_ON in live,
                permissive.overall,
                mains_state,
                open_request=Channel.SWITCH_OFF in live,
                transfer_window=cmds.transfer_window,
            )
            if event is not None:
                out.safety_events.append(replace(event, tick=tick))
            # mains closes onto a dead bus only, so its permissive is "DG open"
            mains, event = breaker_step(
                mains,
                mains_close_req,
                not dg.closed,
                dg.state,
                open_request=mains_open_req,
            )
            if event is not None:
                out.safety_events.append(replace(event, tick=tick))
            if dg.closed and not was_closed and mains_state is BreakerState.CLOSED and not permissive.overall:
                out.safety_events.append(
                    SafetyEvent(BreakerId.DG, "trace", "DG closed with permissive false", tick)
                )

            # plant
            exc = excitation_step(exc, dt_s)
            gen = generator_step(gen, dt_s, excitation_V=exc.output_V)
            grid, rng = grid_step(grid, rng, dt_s)

            # record
            new_active = _active_source(dg, mains)
            if new_active is Source.GENERATOR and active is not Source.GENERATOR:
                if not (opts.power_saver and gen_has_run):
                    cost += opts.startup_cost_rupees
                gen_has_run = True
            active = new_active
            if active is not Source.NONE:
                rate = gen_rates[hour] if active is Source.GENERATOR else grid_rates[hour]
                cost += load[hour] * rate * config.dt_ms / _MS_PER_HOUR
            clock = advance(clock)
            out.phases.append(sup.phase)
            out.records.append(
                TraceRecord(
                    time_ms=clock.elapsed_ms,
                    gen_speed_rpm=gen.speed_rpm,
                    gen_setpoint_rpm=gen.setpoint_rpm,
                    grid_speed_rpm=grid_speed,
                    gen_voltage_V=gen.terminal_V,
                    grid_voltage_V=v_grid if v_grid is not None else reading.voltage_V,
                    phase_diff_deg=phase_diff,
                    speed_ok=permissive.speed_ok,
                    voltage_ok=permissive.voltage_ok,
                    phase_ok=permissive.phase_ok,
                    permissive=permissive.overall,
                    breaker_dg=dg.state,
                    breaker_grid=mains.state,
                    active_source=active,
                    cumulative_cost_rupees=cost,
                )
            )
        except (ValueError, AssertionError) as exc_:
            raise ScenarioError(tick, exc_) from exc_
    out.supervisor = sup
    for event in out.safety_events:
        log.warning("tick %d: %s", event.tick, event.message)
    return out


def run_scenario(config: ScenarioConfig) -> list[TraceRecord]:
    return simulate(config).records

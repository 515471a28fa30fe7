import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from gridsync.plant import ExcitationModule, GeneratorState, GridState, excitation_step, generator_step
from gridsync.synchronizer import (
    ALLOWED_TRANSITIONS,
    DEFAULT_TIERS,
    SpeedTier,
    SpeedTierTable,
    SupervisorInputs,
    SyncPermissive,
    SyncPhase,
    SyncSupervisorState,
    SyncTolerances,
    VoltageCommand,
    evaluate_permissives,
    phase_difference,
    phase_permissive,
    slip_trim_step,
    speed_increment,
    speed_sync_step,
    supervisor_step,
    voltage_sync_step,
)


def rule_oracle(diff):
    """Tier rules transcribed directly, mirrored for negative differences."""
    a = abs(diff)
    if a > 500:
        step = 50
    elif a > 100:
        step = 10
    elif a > 2:
        step = 2
    else:
        step = 0
    return math.copysign(step, diff) if step else 0.0


@pytest.mark.parametrize(
    "diff, step", [(600, 50), (200, 10), (50, 2), (1, 0), (-200, -10)]
)
def test_tier_examples(diff, step):
    assert speed_increment(diff) == step


@pytest.mark.parametrize(
    "diff, step", [(500, 10), (500.001, 50), (100, 2), (100.5, 10), (2, 0), (2.01, 2), (0, 0)]
)
def test_tier_boundaries(diff, step):
    assert speed_increment(diff) == step
    assert speed_increment(-diff) == -step


@given(st.floats(-1e5, 1e5))
def test_increment_matches_rule_oracle(diff):
    assert speed_increment(diff) == rule_oracle(diff)


@given(st.floats(-1e5, 1e5), st.floats(-1e5, 1e5))
def test_tier_monotonicity(a, b):
    if abs(a) >= abs(b):
        assert abs(speed_increment(a)) >= abs(speed_increment(b))


def test_speed_step_examples():
    assert speed_sync_step(1000, 1600) == 1050
    assert speed_sync_step(398, 400) == 398


def iterate_oracle(setpoint, target):
    steps = sizes = 0
    sizes = []
    while abs(target - setpoint) > 2:
        inc = rule_oracle(target - setpoint)
        if abs(inc) > abs(target - setpoint):
            inc = target - setpoint
        setpoint += inc
        sizes.append(abs(inc))
        steps += 1
    return steps, sizes


def test_zero_to_400_takes_79_steps():
    steps, sizes = iterate_oracle(0, 400)
    assert steps == 79
    assert sizes == [10] * 30 + [2] * 49
    sp, n = 0.0, 0
    while abs(400 - sp) > 2:
        sp = speed_sync_step(sp, 400)
        n += 1
    assert n == 79
    assert sp == 398


def test_termination_and_no_overshoot_over_grid():
    points = range(0, 10001, 250)
    for start in points:
        for target in points:
            sp = float(start)
            diff = abs(target - sp)
            bound = math.ceil(diff / 2)
            n = 0
            while abs(target - sp) > 2:
                sp = speed_sync_step(sp, target)
                new = abs(target - sp)
                assert new < diff
                assert (target - sp) * (target - start) >= 0  # never crosses the target
                diff = new
                n += 1
            assert n <= bound
            assert speed_sync_step(sp, target) == sp
            assert n == iterate_oracle(start, target)[0]


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_no_overshoot_property(start, target):
    sp, diff = start, abs(target - start)
    for _ in range(2000):
        if diff <= 2:
            assert speed_sync_step(sp, target) == sp
            return
        sp = speed_sync_step(sp, target)
        assert abs(target - sp) < diff
        diff = abs(target - sp)
    pytest.fail("did not converge")


def test_clamp_with_coarse_custom_tiers():
    tiers = SpeedTierTable.from_thresholds([(5.0, 20.0), (1.0, 8.0)])
    # |diff| = 6 is in the 8 rpm tier; stepping 8 would overshoot, so land on target
    assert speed_sync_step(100.0, 106.0, tiers) == 106.0


@pytest.mark.parametrize(
    "tiers",
    [
        [SpeedTier(500, math.inf, 50), SpeedTier(100, 400, 10), SpeedTier(2, 100, 2)],
        [SpeedTier(500, 1000, 50), SpeedTier(2, 500, 2)],
        [SpeedTier(500, math.inf, 5), SpeedTier(2, 500, 10)],
        [SpeedTier(500, math.inf, 50), SpeedTier(2, 500, 0)],
    ],
)
def test_tier_table_rejects_bad_partitions(tiers):
    with pytest.raises(ValueError):
        SpeedTierTable(tuple(tiers), tolerance_rpm=2)


def test_default_table_shape():
    assert DEFAULT_TIERS.tolerance_rpm == 2
    assert [t.increment_rpm for t in DEFAULT_TIERS.tiers] == [50, 10, 2]


def test_slip_trim_holds_below_grid():
    assert slip_trim_step(398.0, 400.0, 1.0) == 399.0
    assert slip_trim_step(390.0, 400.0, 1.0) == 392.0  # rate limited to 2 rpm
    assert slip_trim_step(405.0, 400.0, 1.0) == 403.0


@pytest.mark.parametrize(
    "gen, grid, enabled, cmd",
    [
        (200, 230, True, VoltageCommand.UP),
        (240, 230, True, VoltageCommand.DOWN),
        (230, 230, True, VoltageCommand.SWITCH_OFF),
        (200, 230, False, VoltageCommand.SWITCH_ON),
        (229, 230, False, VoltageCommand.HOLD),
    ],
)
def test_voltage_commands(gen, grid, enabled, cmd):
    assert voltage_sync_step(gen, grid, 2.0, enabled) is cmd


def close_voltage_loop(v0, grid_v, k, ramp, dt, deadband, max_ticks=100000):
    gen = GeneratorState(excitation_V=v0 / k, emf_gain_VperV=k)
    exc = ExcitationModule(output_V=v0 / k, ramp_Vps=ramp)
    for tick in range(1, max_ticks + 1):
        cmd = voltage_sync_step(gen.terminal_V, grid_v, deadband, exc.enabled)
        exc = excitation_step(
            ExcitationModule(
                enabled=exc.enabled,
                output_V=exc.output_V,
                ramp_Vps=ramp,
                pin_on=cmd is VoltageCommand.SWITCH_ON,
                pin_off=cmd is VoltageCommand.SWITCH_OFF,
                pin_up=cmd is VoltageCommand.UP,
                pin_down=cmd is VoltageCommand.DOWN,
            ),
            dt,
        )
        gen = generator_step(gen, dt, excitation_V=exc.output_V)
        if abs(gen.terminal_V - grid_v) <= deadband and not exc.enabled:
            return tick, gen, exc
    raise AssertionError("voltage loop did not settle")


def test_voltage_direction_converges_from_both_sides():
    for v0 in (180.0, 280.0):
        ticks, gen, exc = close_voltage_loop(v0, 230.0, 10.0, 5.0, 0.1, 2.0)
        assert abs(gen.terminal_V - 230.0) <= 2.0
        assert not exc.enabled


@settings(max_examples=200)
@given(
    st.floats(0, 400),
    st.floats(100, 300),
    st.floats(1, 20),
    st.floats(0.5, 10),
    st.floats(0.5, 5),
)
def test_voltage_loop_tick_bound(v0, grid_v, k, ramp, deadband):
    dt = 0.1
    step = ramp * k * dt
    if step > 2 * deadband:
        return  # the ramp step must not jump over the deadband window
    if abs(v0 - grid_v) <= deadband:
        assert voltage_sync_step(v0, grid_v, deadband, False) is VoltageCommand.HOLD
        return
    ticks, _, _ = close_voltage_loop(v0, grid_v, k, ramp, dt, deadband)
    assert ticks <= math.ceil(abs(v0 - grid_v) / step) + 2
    if step <= deadband:
        assert ticks <= abs(v0 - grid_v) / step + 2


def test_voltage_bound_needs_ceiling_for_wide_steps():
    # step 7.04 V > deadband 5 V: ten ramp ticks are needed, one more than 69.5/7.04
    v0, k, ramp = 169.5255566309443, 10.277150421651028, 6.848985055225259
    ticks, _, _ = close_voltage_loop(v0, 100.0, k, ramp, 0.1, 5.0)
    assert ticks == 12


TOL = SyncTolerances()


def test_phase_permissive_truth_table():
    for angle_ok in (True, False):
        for slip_ok in (True, False):
            angle = 5.0 if angle_ok else 90.0
            slip = 0.05 if slip_ok else 0.5
            assert phase_permissive(angle, slip, TOL) is (angle_ok and slip_ok)


def test_phase_permissive_examples():
    assert phase_permissive(0.0, 0.0, TOL)
    assert not phase_permissive(180.0, 0.0, TOL)
    assert not phase_permissive(-180.0, 0.0, TOL)
    assert not phase_permissive(5.0, 0.5, TOL)


@given(st.floats(0, 359.999), st.floats(0, 359.999))
def test_phase_difference_normalised(a, b):
    d = phase_difference(a, b)
    assert -180.0 <= d < 180.0
    assert math.isclose((b + d) % 360.0, a % 360.0, abs_tol=1e-9) or math.isclose(
        abs((b + d) % 360.0 - a), 360.0, abs_tol=1e-9
    )


def matched():
    gen = GeneratorState(speed_rpm=1500, setpoint_rpm=1500, poles=4, excitation_V=23.0, phase_deg=40)
    grid = GridState(nominal_freq_Hz=50, voltage_V=230, phase_deg=40)
    return gen, grid


def test_permissives_all_matched():
    gen, grid = matched()
    p = evaluate_permissives(gen, grid, TOL)
    assert (p.speed_ok, p.voltage_ok, p.phase_ok, p.overall) == (True, True, True, True)


def test_permissives_speed_off():
    gen, grid = matched()
    p = evaluate_permissives(GeneratorState(speed_rpm=1200, poles=4, excitation_V=23, phase_deg=40), grid, TOL)
    assert not p.speed_ok and p.voltage_ok and not p.overall


def test_permissives_phase_off():
    gen, grid = matched()
    p = evaluate_permissives(
        GeneratorState(speed_rpm=1500, poles=4, excitation_V=23, phase_deg=130), grid, TOL
    )
    assert p.speed_ok and p.voltage_ok and not p.phase_ok and not p.overall


def test_permissive_overall_is_conjunction():
    for bits in range(8):
        p = SyncPermissive(bool(bits & 1), bool(bits & 2), bool(bits & 4))
        assert p.overall == (bits == 7)


ALL_OK = SyncPermissive(True, True, True)


def step(state, permissive=ALL_OK, **kw):
    return supervisor_step(state, permissive, SupervisorInputs(**kw))


def test_idle_start_enters_speed_sync():
    state, cmds = step(SyncSupervisorState(), start=True, tick=3)
    assert state.phase is SyncPhase.SPEED_SYNC
    assert state.entered_tick == 3
    assert cmds.run_speed_loop


def test_idle_without_start_stays():
    state, cmds = step(SyncSupervisorState())
    assert state.phase is SyncPhase.IDLE
    assert not cmds.close_breaker


def test_phase_wait_closes_when_permissive():
    state, cmds = step(SyncSupervisorState(SyncPhase.PHASE_WAIT))
    assert state.phase is SyncPhase.CLOSING
    assert cmds.close_breaker and cmds.transfer_window


def test_voltage_sync_regresses_on_speed_loss():
    state, cmds = step(
        SyncSupervisorState(SyncPhase.VOLTAGE_SYNC), SyncPermissive(False, True, True)
    )
    assert state.phase is SyncPhase.SPEED_SYNC
    assert not cmds.close_breaker


def test_voltage_sync_waits_for_excitation_off():
    state, _ = step(SyncSupervisorState(SyncPhase.VOLTAGE_SYNC), excitation_enabled=True)
    assert state.phase is SyncPhase.VOLTAGE_SYNC
    state, cmds = step(state)
    assert state.phase is SyncPhase.PHASE_WAIT
    assert not cmds.close_breaker


def test_closing_to_synced_on_feedback():
    state, cmds = step(SyncSupervisorState(SyncPhase.CLOSING), breaker_closed=True)
    assert state.phase is SyncPhase.SYNCED
    assert not cmds.close_breaker


def test_phase_wait_regressions():
    s = SyncSupervisorState(SyncPhase.PHASE_WAIT)
    assert step(s, SyncPermissive(False, True, True))[0].phase is SyncPhase.SPEED_SYNC
    assert step(s, SyncPermissive(True, False, True))[0].phase is SyncPhase.VOLTAGE_SYNC
    assert step(s, SyncPermissive(True, True, False))[0].phase is SyncPhase.PHASE_WAIT


def test_abort_and_timeout():
    state, _ = step(SyncSupervisorState(SyncPhase.SPEED_SYNC), abort=True)
    assert state.phase is SyncPhase.ABORTED
    s = SyncSupervisorState(SyncPhase.PHASE_WAIT, started_tick=0)
    state, cmds = supervisor_step(s, ALL_OK, SupervisorInputs(tick=50), timeout_ticks=50)
    assert state.phase is SyncPhase.ABORTED and state.abort_reason == "timeout"
    assert not cmds.close_breaker


def test_supervisor_fuzz_never_closes_without_permissive():
    rng = random.Random(20261014)
    for _ in range(300):
        state = SyncSupervisorState()
        for tick in range(200):
            # jittery conditions: each flag holds most of the time
            p = SyncPermissive(rng.random() < 0.8, rng.random() < 0.8, rng.random() < 0.5)
            inputs = SupervisorInputs(
                tick=tick,
                start=rng.random() < 0.9,
                breaker_closed=state.phase is SyncPhase.CLOSING and rng.random() < 0.5,
                excitation_enabled=rng.random() < 0.2,
            )
            new, cmds = supervisor_step(state, p, inputs)
            if new.phase is not state.phase:
                assert new.phase in ALLOWED_TRANSITIONS[state.phase]
            if cmds.close_breaker:
                assert p.overall
                assert new.phase is SyncPhase.CLOSING
            if new.phase is SyncPhase.CLOSING and state.phase is not SyncPhase.CLOSING:
                assert state.phase is SyncPhase.PHASE_WAIT
            state = new

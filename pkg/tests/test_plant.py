"""Plant model checks against hand-derived values.

Every expected number below was computed independently from the synthetic
vehicle's parameter tables (linear interpolation and the closed-form model
relations worked out by hand), then frozen.  Comparisons use a 1e-12
relative tolerance where the reference arithmetic could associate
differently, and exact equality where the contract is exact (engine-off
fuel, zero-power current, flat road load).
"""

import math

import numpy as np
import pytest

from ecodrive.errors import (
    InfeasiblePowerError,
    VehicleFormatError,
    ZeroMeanVelocityError,
)
from ecodrive.fixtures import make_vehicle
from ecodrive.plant import (
    ActionVector,
    StateVector,
    action_limits,
    battery_current,
    drivetrain_state,
    dump_vehicle,
    fuel_rate,
    load_vehicle,
    propagate_state,
    propagate_state_full,
    road_load_force,
    tractive_force,
)
from ecodrive.route import NODE_PLAIN, NODE_SIGNAL, NODE_STOP, SignalTiming

R12 = 1.0e-12


@pytest.fixture(scope="module")
def veh():
    return make_vehicle()


# -- drivetrain -------------------------------------------------------------

def test_gear_and_shaft_speeds_at_10mps(veh):
    st = drivetrain_state(veh, 10.0)
    assert st.gear == 2                      # third gear: 8 < 10 <= 12 m/s
    assert st.omega_eng == pytest.approx(193.09446254071662, rel=R12)
    assert st.omega_bsg == pytest.approx(521.3550488599349, rel=R12)


def test_engine_speed_clamped_at_idle(veh):
    st = drivetrain_state(veh, 0.0)
    assert st.gear == 0
    assert st.omega_eng == 78.5
    assert st.omega_bsg == pytest.approx(211.95, rel=R12)


def test_road_load_flat_is_exact(veh):
    assert road_load_force(veh, 10.0) == 209.0


def test_road_load_with_grade(veh):
    assert road_load_force(veh, 10.0, 0.03) == pytest.approx(
        659.1507157454314, rel=R12
    )


def test_road_load_rejects_negative_speed(veh):
    with pytest.raises(ValueError):
        road_load_force(veh, -1.0)


def test_tractive_force_hand_values(veh):
    assert tractive_force(veh, 10.0, ActionVector(100.0, 10.0)) == pytest.approx(
        2354.207687296417, rel=R12
    )
    # negative axle torque divides by the gear efficiency
    assert tractive_force(veh, 10.0, ActionVector(-20.0, 0.0)) == pytest.approx(
        -402.2801302931596, rel=R12
    )
    # crank torque mixes both machines through the belt
    assert tractive_force(veh, 2.0, ActionVector(50.0, -10.0)) == pytest.approx(
        1088.087296416938, rel=R12
    )


# -- fuel -------------------------------------------------------------------

def test_fuel_rate_zero_when_engine_off(veh):
    for te in (0.0, -5.0, -40.0):
        assert fuel_rate(veh, 200.0, te) == 0.0


def test_fuel_rate_at_map_nodes(veh):
    # axis nodes: speed index 3, torque index 5 / speed 0, torque 1
    assert fuel_rate(veh, 235.66666666666666, 77.27272727272727) == pytest.approx(
        1.3240963172905524, rel=R12
    )
    assert fuel_rate(veh, 78.5, 15.454545454545455) == pytest.approx(
        0.14253543048128345, rel=R12
    )


def test_fuel_rate_monotone_in_torque(veh):
    rates = [fuel_rate(veh, 250.0, te) for te in np.linspace(5.0, 160.0, 12)]
    assert all(b > a for a, b in zip(rates, rates[1:]))


# -- battery ----------------------------------------------------------------

def test_battery_current_hand_values(veh):
    assert battery_current(veh, 5000.0, 0.5) == pytest.approx(
        108.22197807275262, rel=R12
    )
    assert battery_current(veh, -4000.0, 0.42) == pytest.approx(
        -83.48098143111216, rel=R12
    )


def test_battery_current_zero_power_is_exact(veh):
    assert battery_current(veh, 0.0, 0.63) == 0.0


def test_battery_current_infeasible_above_deliverable_max(veh):
    # V_oc(0.5)^2 / (4 R0) = 47005.2 W
    with pytest.raises(InfeasiblePowerError):
        battery_current(veh, 47100.0, 0.5)
    battery_current(veh, 46900.0, 0.5)       # just below: fine


def test_battery_current_sign_follows_power(veh):
    assert battery_current(veh, 800.0, 0.5) > 0.0
    assert battery_current(veh, -800.0, 0.5) < 0.0


# -- action limits ----------------------------------------------------------

def test_action_limits_at_10mps(veh):
    lim = action_limits(veh, 10.0)
    assert lim.t_eng_min == pytest.approx(-17.65472312703583, rel=R12)
    assert lim.t_eng_max == pytest.approx(158.27361563517917, rel=R12)
    assert lim.t_bsg_min == pytest.approx(-26.86565844578874, rel=R12)
    assert lim.t_bsg_max == pytest.approx(26.86565844578874, rel=R12)


def test_action_limits_at_standstill(veh):
    lim = action_limits(veh, 0.0)
    assert lim.t_eng_min == -12.0
    assert lim.t_eng_max == 95.0
    assert lim.t_bsg_max == pytest.approx(57.738289473684205, rel=R12)
    assert lim.t_bsg_min == -lim.t_bsg_max


# -- one-step propagation ---------------------------------------------------

def test_propagate_accelerating_step(veh):
    x2, info = propagate_state_full(
        veh, StateVector(v=10.0, soc=0.5, t=0.0), ActionVector(100.0, 0.0), 10.0
    )
    assert x2.v == pytest.approx(11.022678250865486, rel=R12)
    assert x2.t == pytest.approx(0.9513535697658607, rel=R12)
    assert x2.soc == 0.5                     # no BSG torque, no battery flow
    assert info.fuel_g == pytest.approx(1.2698572167440862, rel=R12)
    assert info.wait == 0.0
    assert info.gear == 2
    assert not info.clamped


def test_propagate_regen_step(veh):
    x2, info = propagate_state_full(
        veh, StateVector(v=10.0, soc=0.5, t=0.0), ActionVector(0.0, -25.0), 10.0
    )
    assert x2.v == pytest.approx(8.917416725103632, rel=R12)
    assert x2.t == pytest.approx(1.0572268027198326, rel=R12)
    assert x2.soc == pytest.approx(0.5066980303758931, rel=R12)
    assert info.fuel_g == 0.0


def test_propagate_kinematic_consistency(veh):
    x = StateVector(v=12.0, soc=0.55, t=3.0)
    x2, info = propagate_state_full(veh, x, ActionVector(60.0, 5.0), 10.0)
    assert x2.v * x2.v - x.v * x.v == pytest.approx(
        2.0 * 10.0 * info.accel, rel=1.0e-9
    )
    assert info.dt_move * (x.v + x2.v) / 2.0 == pytest.approx(10.0, rel=1.0e-9)


def test_propagate_rejects_out_of_box_torque(veh):
    with pytest.raises(ValueError):
        propagate_state(veh, StateVector(v=10.0, soc=0.5, t=0.0),
                        ActionVector(170.0, 0.0), 10.0)
    with pytest.raises(ValueError):
        propagate_state(veh, StateVector(v=10.0, soc=0.5, t=0.0),
                        ActionVector(0.0, -40.0), 10.0)


def test_propagate_zero_mean_velocity_raises(veh):
    with pytest.raises(ZeroMeanVelocityError):
        propagate_state(veh, StateVector(v=0.0, soc=0.5, t=0.0),
                        ActionVector(0.0, 0.0), 10.0)


def test_propagate_midstep_stop_needs_signal_or_stop_dest(veh):
    x = StateVector(v=2.0, soc=0.5, t=0.0)
    hard = ActionVector(0.0, 0.0)
    with pytest.raises(ValueError):
        propagate_state(veh, x, hard, 10.0, brake_force=4000.0,
                        dest_kind=NODE_PLAIN)
    x2 = propagate_state(veh, x, hard, 10.0, brake_force=4000.0,
                         dest_kind=NODE_SIGNAL)
    assert x2.v == 0.0


def test_propagate_moving_arrival_at_stop_sign_rejected(veh):
    with pytest.raises(ValueError):
        propagate_state(veh, StateVector(v=10.0, soc=0.5, t=0.0),
                        ActionVector(50.0, 0.0), 10.0, dest_kind=NODE_STOP)


def test_stop_sign_departure_adds_dwell(veh):
    x = StateVector(v=0.0, soc=0.5, t=14.0)
    x2, info = propagate_state_full(
        veh, x, ActionVector(80.0, 20.0), 10.0,
        source_kind=NODE_STOP, stop_dwell=2.0,
    )
    assert info.wait == 2.0
    assert x2.t == pytest.approx(16.0 + info.dt_move, rel=R12)


def test_red_wait_jumps_to_next_green_start(veh):
    sig = SignalTiming(cycle=60.0, offset=0.0, green_windows=((0.0, 30.0),))
    x = StateVector(v=0.0, soc=0.5, t=40.0)     # red until 60
    x2, info = propagate_state_full(
        veh, x, ActionVector(80.0, 20.0), 10.0,
        source_kind=NODE_SIGNAL, signal=sig,
    )
    assert info.wait == 20.0                     # exactly to the green edge
    assert x2.t == 60.0 + info.dt_move


def test_red_wall_without_teleport_raises(veh):
    sig = SignalTiming(cycle=60.0, offset=0.0, green_windows=((0.0, 30.0),))
    x = StateVector(v=0.0, soc=0.5, t=40.0)
    with pytest.raises(ValueError):
        propagate_state(veh, x, ActionVector(80.0, 20.0), 10.0,
                        source_kind=NODE_SIGNAL, signal=sig, teleport=False)


def test_green_departure_needs_no_wait(veh):
    sig = SignalTiming(cycle=60.0, offset=0.0, green_windows=((0.0, 30.0),))
    x = StateVector(v=0.0, soc=0.5, t=10.0)
    _, info = propagate_state_full(
        veh, x, ActionVector(80.0, 20.0), 10.0,
        source_kind=NODE_SIGNAL, signal=sig,
    )
    assert info.wait == 0.0


# -- vehicle document round-trip -------------------------------------------

def test_vehicle_document_round_trip(veh):
    doc = dump_vehicle(veh)
    veh2 = load_vehicle(doc)
    assert veh2.params.mass == veh.params.mass
    assert np.array_equal(veh2.params.gear_ratios, veh.params.gear_ratios)
    assert np.array_equal(veh2.engine.fuel_map, veh.engine.fuel_map)
    assert np.array_equal(veh2.battery.voc, veh.battery.voc)
    # loaded copy behaves identically
    assert tractive_force(veh2, 10.0, ActionVector(100.0, 10.0)) == \
        tractive_force(veh, 10.0, ActionVector(100.0, 10.0))


def test_vehicle_document_rejects_bad_fields(veh):
    doc = dump_vehicle(veh)
    bad = dict(doc)
    bad["chassis"] = dict(doc["chassis"], mass_kg=-5.0)
    with pytest.raises(VehicleFormatError):
        load_vehicle(bad)
    missing = {k: v for k, v in doc.items() if k != "battery"}
    with pytest.raises(VehicleFormatError):
        load_vehicle(missing)

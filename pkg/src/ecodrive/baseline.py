"""Heuristic comparator: driver speed tracking plus a rule-based torque split.

The driver model tracks the posted speed limit minus a margin with
proportional control, looks ahead for limit drops so it can brake at a
comfortable rate, and applies the kinematic stopping rule ``v^2 / (2 d)``
toward the nearest stop sign or red signal within its line of sight.  The
torque split converts the demanded wheel force into crank torques:
engine-led traction with BSG assist when torque demand is high and the
battery has surplus charge, BSG charging when it runs low, and
regeneration-first braking with the friction brake absorbing the exact
remainder.

Both pieces are pure per-step functions of the current state — there are no
latches or internal estimators — so a trajectory is fully reproducible from
its start state.  Calibration lives in the bundled experiment config and is
never tuned against specific test routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import _kernels as K
from .mpc import ControlDecision
from .plant import ActionVector, StateVector, Vehicle
from .route import NODE_SIGNAL, NODE_STOP, Route, SpatSchedule

# Fraction of the BSG's regeneration torque limit used for opportunity
# charging when the SoC falls below its band.
_CHARGE_FRACTION = 0.5

# Proportional gain of the cruise tracking law (1/s).
_CRUISE_GAIN = 0.5

# A signal is treated as crossable only if it is green now AND green this
# many seconds past the projected arrival.  The slack absorbs the arrival
# delay that tracking or late braking can add, so a phase edge cannot slip
# between the decision and the actual crossing.
_ARRIVAL_MARGIN_S = 4.0

# Over-braking factor of the stopping rule.  Stops at a node must resolve
# to an exact standstill in the plant's square-root kinematics; the margin
# forces the rounding error to the stopped side (a vanishing residual
# speed would count as a moving crossing).
_STOP_FIRM = 1.0 + 1.0e-9


@dataclass(frozen=True)
class DriverParams:
    """Calibration of the heuristic driver.

    ``margin_mps`` is the gap kept below the posted limit, ``accel`` /
    ``decel`` the comfortable acceleration bounds (m/s^2, decel negative),
    ``line_of_sight_m`` how far ahead signals and stop signs are reacted
    to, and ``stop_tolerance_m`` the distance under which the driver
    considers itself at the stopping point.
    """

    margin_mps: float = 0.5
    accel: float = 1.2
    decel: float = -2.0
    line_of_sight_m: float = 130.0
    stop_tolerance_m: float = 1.0

    def __post_init__(self):
        if not self.decel < 0.0 < self.accel:
            raise ValueError("need decel < 0 < accel")
        if self.margin_mps < 0.0:
            raise ValueError("speed margin must be >= 0")
        if self.line_of_sight_m <= 0.0 or self.stop_tolerance_m < 0.0:
            raise ValueError("line of sight must be positive, tolerance >= 0")

    def validate_route(self, route: Route) -> None:
        """The line of sight must cover the braking distance from the
        route's highest speed limit at the comfortable deceleration rate,
        otherwise the stopping rule cannot guarantee red-phase compliance."""
        v_top = float(max(route.v_max))
        braking = v_top * v_top / (2.0 * -self.decel)
        if self.line_of_sight_m <= braking:
            raise ValueError(
                f"line of sight {self.line_of_sight_m:.0f} m does not cover "
                f"the braking distance {braking:.0f} m from {v_top:.1f} m/s"
            )


@dataclass(frozen=True)
class SplitParams:
    """Calibration of the rule-based torque split.

    ``assist_threshold_nm`` is the crank torque above which the BSG assists,
    ``regen_fraction`` the share of braking demand sent to the BSG, and
    ``soc_lo`` / ``soc_hi`` the band edges: charge below the band, allow
    assist above it, neither inside.
    """

    assist_threshold_nm: float = 20.0
    regen_fraction: float = 0.9
    soc_lo: float = 0.495
    soc_hi: float = 0.505

    def __post_init__(self):
        if not 0.0 <= self.soc_lo < self.soc_hi <= 1.0:
            raise ValueError("need 0 <= soc_lo < soc_hi <= 1")
        if not 0.0 <= self.regen_fraction <= 1.0:
            raise ValueError("regen fraction must lie in [0, 1]")
        if self.assist_threshold_nm < 0.0:
            raise ValueError("assist threshold must be >= 0")


# ---------------------------------------------------------------------------
# Driver model: demanded acceleration
# ---------------------------------------------------------------------------

def _cruise_setpoint(route: Route, s: int, params: DriverParams) -> float:
    """Speed setpoint at node s: limit minus margin, shaved down where a
    lower limit ahead could not otherwise be reached at comfortable decel."""
    b = -params.decel
    look_nodes = int(math.ceil(params.line_of_sight_m / route.delta_d))
    last = min(route.node_count - 1, s + look_nodes)
    v_set = float(route.v_max[s])
    for j in range(s + 1, last + 1):
        d = (j - s) * route.delta_d
        reachable = math.sqrt(float(route.v_max[j]) ** 2 + 2.0 * b * d)
        v_set = min(v_set, reachable)
    return max(0.0, v_set - params.margin_mps)


def _next_stop_target(route: Route, spat: SpatSchedule, s: int, t: float,
                      v: float, params: DriverParams) -> Optional[int]:
    """Nearest node ahead, within line of sight, the driver must stop at:
    any stop sign, or a signal not guaranteed green through the projected
    (constant-speed) arrival plus the safety margin."""
    kinds = route.node_kinds()
    look_nodes = int(params.line_of_sight_m // route.delta_d)
    last = min(route.node_count - 1, s + look_nodes)
    for j in range(s + 1, last + 1):
        kind = int(kinds[j])
        if kind == NODE_STOP:
            return j
        if kind == NODE_SIGNAL:
            timing = spat.timing(route.traffic_lights[j])
            d = (j - s) * route.delta_d
            t_arr = t + d / max(v, 1.0)
            if not (timing.is_green(t)
                    and timing.is_green(t_arr + _ARRIVAL_MARGIN_S)):
                return j
    return None


def driver_demand(x: StateVector, s: int, route: Route, spat: SpatSchedule,
                  params: DriverParams) -> float:
    """Demanded acceleration (m/s^2) of the heuristic driver at node s.

    Standstill at a stop sign or signal node resolves to the comfortable
    launch acceleration: the plant realizes the departure after the dwell
    or at the red-to-green transition, so the commanded step is the launch.
    """
    v, t = float(x.v), float(x.t)
    kind = route.node_kind(s)

    if v == 0.0 and kind in (NODE_SIGNAL, NODE_STOP):
        return params.accel

    v_set = _cruise_setpoint(route, s, params)
    a = _CRUISE_GAIN * (v_set - v)
    a = min(max(a, params.decel), params.accel)

    target = _next_stop_target(route, spat, s, t, v, params)
    if target is not None and v > 0.0:
        d = (target - s) * route.delta_d
        if d > params.stop_tolerance_m:
            a = min(a, -(v * v) * _STOP_FIRM / (2.0 * d))

    return min(max(a, route.accel_min), route.accel_max)


# ---------------------------------------------------------------------------
# Rule-based torque split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitDecision:
    """Split outcome: crank torques, friction brake force, saturation flag."""

    action: ActionVector
    brake_force: float
    saturated: bool


def _crank_from_wheel(pack, gear: int, f_wheel: float) -> float:
    """Invert the driveline force map: crank torque producing ``f_wheel``."""
    ratio = pack.gear_ratios[gear] * pack.final_drive
    eff = pack.gear_eff[gear]
    if f_wheel >= 0.0:
        return f_wheel * pack.wheel_radius / (eff * ratio)
    return f_wheel * pack.wheel_radius * eff / ratio


def _cap_assist_power(pack, w_bsg: float, tb: float) -> float:
    """Largest BSG torque <= tb whose electrical draw fits the battery's
    deliverable power.  The efficiency map makes the draw nonlinear in the
    torque, so the cap is found by damped fixed-point scaling."""
    if tb <= 0.0:
        return tb
    for _ in range(8):
        p = K.bsg_electrical_power(pack, w_bsg, tb)
        if p <= pack.p_bat_max:
            return tb
        tb *= 0.97 * pack.p_bat_max / p
    return 0.0


def rule_based_torque_split(f_demand: float, x: StateVector, vehicle: Vehicle,
                            params: SplitParams) -> SplitDecision:
    """Convert a demanded wheel force (N) into crank torques and brake force.

    Braking demand goes to BSG regeneration first — up to ``regen_fraction``
    of the demand and the machine's torque floor — with the friction brake
    absorbing the exact remainder, so the realized wheel force equals the
    demand.  Traction demand is engine-led; the BSG assists with the torque
    above the assist threshold while the SoC is above its band, and charges
    (negative torque, engine covering it) while the SoC is below.  Demands
    beyond the combined limits saturate and are flagged.
    """
    pack = vehicle.pack()
    v, soc = float(x.v), float(x.soc)
    gear, _, w_bsg = K.drivetrain_speeds(pack, v)
    te_lo, te_hi, tb_lo, tb_hi = K.torque_limits(pack, v)

    if f_demand == 0.0:
        return SplitDecision(ActionVector(0.0, 0.0), 0.0, False)

    if f_demand < 0.0:
        t_crank = _crank_from_wheel(pack, gear, f_demand)
        tb = max(params.regen_fraction * t_crank / pack.belt_ratio, tb_lo)
        tb = min(tb, 0.0)
        action = ActionVector(0.0, tb)
        f_act = K.tractive_force(pack, gear, 0.0, tb)
        # f_act >= f_demand here, so the friction brake closes the gap
        # exactly and the realized wheel force equals the demand.
        return SplitDecision(action, max(0.0, f_act - f_demand), False)

    t_crank = _crank_from_wheel(pack, gear, f_demand)
    tb = 0.0
    if soc > params.soc_hi and t_crank > params.assist_threshold_nm:
        tb = min((t_crank - params.assist_threshold_nm) / pack.belt_ratio, tb_hi)
        tb = _cap_assist_power(pack, w_bsg, tb)
    elif soc < params.soc_lo:
        tb = _CHARGE_FRACTION * tb_lo

    te = t_crank - tb * pack.belt_ratio
    saturated = False
    if te > te_hi:
        # Engine cannot cover the demand (plus any charging torque): shed
        # the charging first, then admit the shortfall.
        if tb < 0.0:
            tb = min(0.0, tb + (te - te_hi) / pack.belt_ratio)
            te = t_crank - tb * pack.belt_ratio
        if te > te_hi:
            te = te_hi
            saturated = True
    te = max(te, max(te_lo, 0.0))

    action = ActionVector(te, tb)
    f_act = K.tractive_force(pack, gear, te, tb)
    brake = max(0.0, f_act - f_demand)
    return SplitDecision(action, brake, saturated)


# ---------------------------------------------------------------------------
# Closed-loop controller facade
# ---------------------------------------------------------------------------

class BaselineDriver:
    """Driver model + torque split packaged for the closed-loop harness.

    ``fit`` binds a route and signal schedule; ``control`` produces one
    spatial step's decision.  No prediction is attached to the decision —
    the plant alone integrates the state.
    """

    name = "baseline"
    backend = "heuristic"

    def __init__(self, vehicle: Vehicle,
                 driver: Optional[DriverParams] = None,
                 split: Optional[SplitParams] = None,
                 teleport: bool = True):
        self.vehicle = vehicle
        self.driver = driver if driver is not None else DriverParams()
        self.split = split if split is not None else SplitParams()
        self.teleport = teleport
        self.route_: Optional[Route] = None
        self.spat_: Optional[SpatSchedule] = None

    def fit(self, route: Route, spat: SpatSchedule) -> "BaselineDriver":
        self.driver.validate_route(route)
        self.route_ = route
        self.spat_ = spat
        return self

    def control(self, x: StateVector, s: int) -> ControlDecision:
        if self.route_ is None:
            raise RuntimeError("controller is not fitted to a route")
        route, spat = self.route_, self.spat_
        a_dem = driver_demand(x, s, route, spat, self.driver)
        f_road = float(K.road_load(self.vehicle.pack(), float(x.v),
                                   float(route.grade[s])))
        f_dem = self.vehicle.params.mass * a_dem + f_road
        dec = rule_based_torque_split(f_dem, x, self.vehicle, self.split)
        note = "saturated" if dec.saturated else ""
        return ControlDecision(action=dec.action, brake_force=dec.brake_force,
                               note=note)

"""Quasi-static longitudinal plant of a 48V P0 mild-hybrid vehicle.

The belt-starter-generator (BSG) acts on the crankshaft through a belt ratio;
torque-converter slip is abstracted (engine speed clamps at idle).  The
battery is a zero-th order equivalent circuit.  State propagation works in the
spatial domain: one call advances the vehicle by one node spacing.

All continuous physics is evaluated by the shared compiled primitives in
:mod:`ecodrive._kernels`, so solver kernels and this Python API produce
bit-identical numbers for identical inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import InfeasiblePowerError, VehicleFormatError, ZeroMeanVelocityError
from .route import NODE_PLAIN, NODE_SIGNAL, NODE_STOP, SignalTiming
from .validation import check_array_1d, check_scalar, check_strictly_increasing


@dataclass(frozen=True)
class StateVector:
    """Solver state: speed, battery state of charge, trip clock."""

    v: float          # Vehicle speed (m/s)
    soc: float        # Battery state of charge (0..1)
    t: float          # Travel time since trip start (s)

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.soc, self.t], dtype=np.float64)


@dataclass(frozen=True)
class ActionVector:
    """Control input: engine torque and BSG torque at their own shafts."""

    t_eng: float      # Engine crankshaft torque (N*m)
    t_bsg: float      # BSG shaft torque (N*m), negative = generating

    def as_array(self) -> np.ndarray:
        return np.array([self.t_eng, self.t_bsg], dtype=np.float64)


class DrivetrainState(NamedTuple):
    gear: int         # 0-based gear index
    omega_eng: float  # Engine speed (rad/s), >= idle
    omega_bsg: float  # BSG shaft speed (rad/s)


class ActionLimits(NamedTuple):
    t_eng_min: float
    t_eng_max: float
    t_bsg_min: float
    t_bsg_max: float


class StepInfo(NamedTuple):
    """Diagnostics of one spatial step."""

    dt_move: float    # Time spent moving across the step (s)
    wait: float       # Standstill time before the move: red wait or dwell (s)
    fuel_g: float     # Fuel burned during the step (g)
    accel: float      # Mean acceleration over the step (m/s^2)
    clamped: bool     # Vehicle came to rest inside the step
    gear: int


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

def _coerce_arrays(obj, *names):
    """Turn sequence fields of a frozen dataclass into float64 arrays."""
    for name in names:
        value = np.ascontiguousarray(np.asarray(getattr(obj, name), dtype=np.float64))
        object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class VehicleParams:
    """Chassis and driveline parameters."""

    mass: float                 # Curb + payload mass (kg)
    c0: float                   # Rolling resistance force (N)
    c1: float                   # Speed-proportional road load (N/(m/s))
    c2: float                   # Aerodynamic coefficient (N/(m/s)^2)
    wheel_radius: float         # m
    final_drive: float
    gear_ratios: np.ndarray
    gear_efficiencies: np.ndarray
    shift_speeds: np.ndarray    # Upshift thresholds (m/s), len = gears - 1
    idle_speed: float           # rad/s

    def __post_init__(self):
        _coerce_arrays(self, "gear_ratios", "gear_efficiencies", "shift_speeds")
        check_scalar(self.mass, "mass", gt=0.0, err=VehicleFormatError)
        check_scalar(self.c0, "c0", ge=0.0, err=VehicleFormatError)
        check_scalar(self.c1, "c1", ge=0.0, err=VehicleFormatError)
        check_scalar(self.c2, "c2", ge=0.0, err=VehicleFormatError)
        check_scalar(self.wheel_radius, "wheel_radius", gt=0.0, err=VehicleFormatError)
        check_scalar(self.final_drive, "final_drive", gt=0.0, err=VehicleFormatError)
        check_scalar(self.idle_speed, "idle_speed", gt=0.0, err=VehicleFormatError)
        g = self.gear_ratios.shape[0]
        if g < 1:
            raise VehicleFormatError("gear_ratios", "at least one gear required")
        if np.any(self.gear_ratios <= 0):
            raise VehicleFormatError("gear_ratios", "must be positive")
        if self.gear_efficiencies.shape[0] != g:
            raise VehicleFormatError("gear_efficiencies", f"length must be {g}")
        if np.any((self.gear_efficiencies <= 0) | (self.gear_efficiencies > 1)):
            raise VehicleFormatError("gear_efficiencies", "must lie in (0, 1]")
        if self.shift_speeds.shape[0] != g - 1:
            raise VehicleFormatError("shift_speeds", f"length must be {g - 1}")
        check_strictly_increasing(self.shift_speeds, "shift_speeds", err=VehicleFormatError)


@dataclass(frozen=True)
class EngineModel:
    """Torque bounds and fuel map over engine speed."""

    speed_axis: np.ndarray      # rad/s, strictly increasing
    torque_min: np.ndarray      # N*m (engine braking is negative)
    torque_max: np.ndarray      # N*m
    fuel_speed_axis: np.ndarray
    fuel_torque_axis: np.ndarray
    fuel_map: np.ndarray        # g/s, shape (speed, torque), row-major

    def __post_init__(self):
        _coerce_arrays(self, "speed_axis", "torque_min", "torque_max",
                       "fuel_speed_axis", "fuel_torque_axis", "fuel_map")
        check_strictly_increasing(self.speed_axis, "speed_axis", err=VehicleFormatError)
        n = self.speed_axis.shape[0]
        if self.torque_min.shape[0] != n or self.torque_max.shape[0] != n:
            raise VehicleFormatError("torque_min/torque_max", f"length must be {n}")
        if np.any(self.torque_min > self.torque_max):
            raise VehicleFormatError("torque_min", "must be <= torque_max pointwise")
        check_strictly_increasing(self.fuel_speed_axis, "fuel_speed_axis", err=VehicleFormatError)
        check_strictly_increasing(self.fuel_torque_axis, "fuel_torque_axis", err=VehicleFormatError)
        shape = (self.fuel_speed_axis.shape[0], self.fuel_torque_axis.shape[0])
        if self.fuel_map.shape != shape:
            raise VehicleFormatError("fuel_map", f"shape must be {shape}, got {self.fuel_map.shape}")
        if np.any(self.fuel_map < 0):
            raise VehicleFormatError("fuel_map", "fuel rates must be >= 0")
        if np.any(np.diff(self.fuel_map, axis=1) < 0):
            raise VehicleFormatError("fuel_map", "must be non-decreasing in torque")


@dataclass(frozen=True)
class BsgModel:
    """Belt-starter-generator: pulley ratio, torque bounds, efficiency map."""

    belt_ratio: float           # omega_bsg / omega_eng, > 0
    speed_axis: np.ndarray      # BSG shaft speed (rad/s)
    torque_min: np.ndarray      # N*m, <= 0 (generating limit)
    torque_max: np.ndarray      # N*m, >= 0 (assist limit)
    eff_speed_axis: np.ndarray
    eff_torque_axis: np.ndarray # |T| axis
    eff_map: np.ndarray         # electrical efficiency (0, 1], shape (speed, |T|)

    def __post_init__(self):
        _coerce_arrays(self, "speed_axis", "torque_min", "torque_max",
                       "eff_speed_axis", "eff_torque_axis", "eff_map")
        check_scalar(self.belt_ratio, "belt_ratio", gt=0.0, err=VehicleFormatError)
        check_strictly_increasing(self.speed_axis, "speed_axis", err=VehicleFormatError)
        n = self.speed_axis.shape[0]
        if self.torque_min.shape[0] != n or self.torque_max.shape[0] != n:
            raise VehicleFormatError("torque_min/torque_max", f"length must be {n}")
        if np.any(self.torque_min > self.torque_max):
            raise VehicleFormatError("torque_min", "must be <= torque_max pointwise")
        check_strictly_increasing(self.eff_speed_axis, "eff_speed_axis", err=VehicleFormatError)
        check_strictly_increasing(self.eff_torque_axis, "eff_torque_axis", err=VehicleFormatError)
        shape = (self.eff_speed_axis.shape[0], self.eff_torque_axis.shape[0])
        if self.eff_map.shape != shape:
            raise VehicleFormatError("eff_map", f"shape must be {shape}, got {self.eff_map.shape}")
        if np.any((self.eff_map <= 0) | (self.eff_map > 1)):
            raise VehicleFormatError("eff_map", "efficiencies must lie in (0, 1]")


@dataclass(frozen=True)
class BatteryModel:
    """Zero-th order equivalent circuit of the 48V pack."""

    r0: float                   # Internal resistance (ohm), > 0
    c_nom: float                # Nominal charge capacity (A*s), > 0
    voc_soc_axis: np.ndarray    # SoC breakpoints
    voc: np.ndarray             # Open-circuit voltage (V), > 0
    soc_min: float = 0.2
    soc_max: float = 0.9

    def __post_init__(self):
        _coerce_arrays(self, "voc_soc_axis", "voc")
        check_scalar(self.r0, "r0", gt=0.0, err=VehicleFormatError)
        check_scalar(self.c_nom, "c_nom", gt=0.0, err=VehicleFormatError)
        check_strictly_increasing(self.voc_soc_axis, "voc_soc_axis", err=VehicleFormatError)
        if self.voc.shape != self.voc_soc_axis.shape:
            raise VehicleFormatError("voc", "length must match voc_soc_axis")
        if np.any(self.voc <= 0):
            raise VehicleFormatError("voc", "open-circuit voltage must be > 0")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise VehicleFormatError(
                "soc_min/soc_max", f"need 0 <= {self.soc_min} < {self.soc_max} <= 1"
            )

    def max_deliverable_power(self) -> float:
        """Largest discharge power the pack can source anywhere in the SoC
        window (V_oc^2 / (4 R0) at the most favorable voltage)."""
        return float(np.max(self.voc) ** 2 / (4.0 * self.r0))


@dataclass(frozen=True)
class Vehicle:
    """Full plant bundle: chassis, engine, BSG, battery."""

    params: VehicleParams
    engine: EngineModel
    bsg: BsgModel
    battery: BatteryModel
    name: str = "vehicle"

    _pack_cache: list = field(default_factory=list, repr=False, compare=False)

    def pack(self) -> K.PlantPack:
        """Numba-friendly packed view (cached; arrays are shared)."""
        if not self._pack_cache:
            p, e, b, bat = self.params, self.engine, self.bsg, self.battery
            self._pack_cache.append(
                K.PlantPack(
                    mass=p.mass,
                    c0=p.c0, c1=p.c1, c2=p.c2,
                    wheel_radius=p.wheel_radius,
                    final_drive=p.final_drive,
                    gear_ratios=np.ascontiguousarray(p.gear_ratios),
                    gear_eff=np.ascontiguousarray(p.gear_efficiencies),
                    shift_v=np.ascontiguousarray(p.shift_speeds),
                    idle_speed=p.idle_speed,
                    belt_ratio=b.belt_ratio,
                    eng_w=np.ascontiguousarray(e.speed_axis),
                    eng_tmin=np.ascontiguousarray(e.torque_min),
                    eng_tmax=np.ascontiguousarray(e.torque_max),
                    fuel_w=np.ascontiguousarray(e.fuel_speed_axis),
                    fuel_t=np.ascontiguousarray(e.fuel_torque_axis),
                    fuel_vals=np.ascontiguousarray(e.fuel_map),
                    bsg_w=np.ascontiguousarray(b.speed_axis),
                    bsg_tmin=np.ascontiguousarray(b.torque_min),
                    bsg_tmax=np.ascontiguousarray(b.torque_max),
                    bsgeff_w=np.ascontiguousarray(b.eff_speed_axis),
                    bsgeff_t=np.ascontiguousarray(b.eff_torque_axis),
                    bsgeff_vals=np.ascontiguousarray(b.eff_map),
                    r0=bat.r0,
                    c_nom=bat.c_nom,
                    voc_soc=np.ascontiguousarray(bat.voc_soc_axis),
                    voc_v=np.ascontiguousarray(bat.voc),
                    soc_min=bat.soc_min,
                    soc_max=bat.soc_max,
                    p_bat_max=bat.max_deliverable_power(),
                )
            )
        return self._pack_cache[0]


# ---------------------------------------------------------------------------
# Plant operations
# ---------------------------------------------------------------------------

def road_load_force(vehicle: Vehicle, v: float, grade: float = 0.0) -> float:
    """Road-load force at speed ``v`` on the given grade (N)."""
    if v < 0:
        raise ValueError(f"speed must be >= 0, got {v}")
    return float(K.road_load(vehicle.pack(), float(v), float(grade)))


def drivetrain_state(vehicle: Vehicle, v: float) -> DrivetrainState:
    """Gear index and shaft speeds at vehicle speed ``v``."""
    if v < 0:
        raise ValueError(f"speed must be >= 0, got {v}")
    g, w_eng, w_bsg = K.drivetrain_speeds(vehicle.pack(), float(v))
    return DrivetrainState(gear=int(g), omega_eng=float(w_eng), omega_bsg=float(w_bsg))


def tractive_force(vehicle: Vehicle, v: float, u: ActionVector) -> float:
    """Wheel force produced by the action at speed ``v`` (N)."""
    g, _, _ = K.drivetrain_speeds(vehicle.pack(), float(v))
    return float(K.tractive_force(vehicle.pack(), g, float(u.t_eng), float(u.t_bsg)))


def fuel_rate(vehicle: Vehicle, omega_eng: float, t_eng: float) -> float:
    """Fuel mass flow (g/s); exactly 0 when the engine is off (T_eng <= 0)."""
    return float(K.fuel_rate(vehicle.pack(), float(omega_eng), float(t_eng)))


def battery_current(vehicle: Vehicle, p_bat: float, soc: float) -> float:
    """Terminal current (A, discharge positive) for an electrical power demand.

    Raises
    ------
    InfeasiblePowerError
        When ``p_bat`` exceeds the deliverable power V_oc(soc)^2 / (4 R0).
    """
    current, ok = K.battery_current(vehicle.pack(), float(p_bat), float(soc))
    if not ok:
        raise InfeasiblePowerError(
            f"battery power {p_bat:.1f} W exceeds the deliverable maximum at soc={soc:.3f}"
        )
    return float(current)


def action_limits(vehicle: Vehicle, v: float) -> ActionLimits:
    """Speed-dependent torque box for both machines."""
    te_lo, te_hi, tb_lo, tb_hi = K.torque_limits(vehicle.pack(), float(v))
    return ActionLimits(float(te_lo), float(te_hi), float(tb_lo), float(tb_hi))


def propagate_state(
    vehicle: Vehicle,
    x: StateVector,
    u: ActionVector,
    delta_d: float,
    grade: float = 0.0,
    source_kind: int = NODE_PLAIN,
    dest_kind: int = NODE_PLAIN,
    signal: SignalTiming | None = None,
    stop_dwell: float = 2.0,
    teleport: bool = True,
    brake_force: float = 0.0,
) -> StateVector:
    """Advance the state by one spatial step.  See :func:`propagate_state_full`."""
    x_next, _ = propagate_state_full(
        vehicle, x, u, delta_d, grade, source_kind, dest_kind, signal,
        stop_dwell, teleport, brake_force,
    )
    return x_next


def propagate_state_full(
    vehicle: Vehicle,
    x: StateVector,
    u: ActionVector,
    delta_d: float,
    grade: float = 0.0,
    source_kind: int = NODE_PLAIN,
    dest_kind: int = NODE_PLAIN,
    signal: SignalTiming | None = None,
    stop_dwell: float = 2.0,
    teleport: bool = True,
    brake_force: float = 0.0,
) -> tuple[StateVector, StepInfo]:
    """Advance the state by one spatial step and report step diagnostics.

    Standstill handling at the source node: at a red traffic light the
    departure clock first jumps to the next green start (the red wait); at a
    stop sign the fixed dwell is added.  Departing a signal node from
    standstill requires green — with the teleport disabled (debug), a
    stopped-at-red state cannot legally depart and this raises.

    A stop inside the step (clamped speed radicand) is admissible only when
    the destination node is a traffic light or stop sign.

    Raises
    ------
    ZeroMeanVelocityError
        If the step cannot be crossed (zero mean velocity).
    InfeasiblePowerError
        If the battery cannot deliver the requested power.
    ValueError
        For torque outside :func:`action_limits`, a mid-step stop into a
        plain node, a moving arrival at a stop sign, or a standstill red
        departure with the teleport disabled.
    """
    pack = vehicle.pack()
    v, soc, t = float(x.v), float(x.soc), float(x.t)
    lim = action_limits(vehicle, v)
    if not (lim.t_eng_min <= u.t_eng <= lim.t_eng_max):
        raise ValueError(
            f"engine torque {u.t_eng} outside [{lim.t_eng_min:.1f}, {lim.t_eng_max:.1f}] at v={v:.2f}"
        )
    if not (lim.t_bsg_min <= u.t_bsg <= lim.t_bsg_max):
        raise ValueError(
            f"BSG torque {u.t_bsg} outside [{lim.t_bsg_min:.1f}, {lim.t_bsg_max:.1f}] at v={v:.2f}"
        )
    if brake_force < 0:
        raise ValueError(f"brake force must be >= 0, got {brake_force}")

    # Standstill handling at the source node happens before the move.
    wait = 0.0
    t_base = t
    if v == 0.0:
        if source_kind == NODE_SIGNAL:
            if signal is None:
                raise ValueError("signal timing required at a traffic-light node")
            if not signal.is_green(t):
                if not teleport:
                    raise ValueError(
                        "standstill departure at red is inadmissible with the red-wait disabled"
                    )
                t_base = signal.next_green_from(t)
                wait = t_base - t
        elif source_kind == NODE_STOP:
            wait = float(stop_dwell)
            t_base = t + wait

    feas, v_next, clamped, v_bar, dt_move, accel, mf, p_bat = K.step_eval(
        pack, v, float(u.t_eng), float(u.t_bsg), float(delta_d), float(grade),
        -np.inf, np.inf, float(brake_force),
    )
    if feas == K.FEAS_NO_MOTION:
        raise ZeroMeanVelocityError(
            f"zero mean velocity over a {delta_d} m step (v={v}, u=({u.t_eng}, {u.t_bsg}))"
        )
    if clamped and dest_kind == NODE_PLAIN:
        raise ValueError(
            "stop inside a step is only admissible into a traffic-light or stop-sign node"
        )
    if dest_kind == NODE_STOP and v_next > 0.0:
        raise ValueError("arrival at a stop-sign node must be at standstill")

    current, ok = K.battery_current(pack, p_bat, soc)
    if not ok:
        raise InfeasiblePowerError(
            f"battery power {p_bat:.1f} W exceeds the deliverable maximum at soc={soc:.3f}"
        )
    soc_next = soc - dt_move * current / pack.c_nom
    t_next = t_base + dt_move
    gear, w_eng, _ = K.drivetrain_speeds(pack, v)
    info = StepInfo(
        dt_move=float(dt_move),
        wait=float(wait),
        fuel_g=float(mf * dt_move),
        accel=float(accel),
        clamped=bool(clamped),
        gear=int(gear),
    )
    return StateVector(v=float(v_next), soc=float(soc_next), t=float(t_next)), info


# ---------------------------------------------------------------------------
# Vehicle document I/O
# ---------------------------------------------------------------------------

def load_vehicle(source: str | Path | dict) -> Vehicle:
    """Load a vehicle parameter document (one JSON object).

    Maps are stored as axis arrays plus row-major value arrays.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise VehicleFormatError("<document>", f"invalid JSON: {exc}") from None
    else:
        doc = source

    def arr(section: dict, key: str, parent: str) -> np.ndarray:
        if key not in section:
            raise VehicleFormatError(f"{parent}{key}", "required field is missing")
        return check_array_1d(section[key], f"{parent}{key}", err=VehicleFormatError)

    def sec(key: str) -> dict:
        if key not in doc:
            raise VehicleFormatError(key, "required section is missing")
        return doc[key]

    p, e, b, bat = sec("chassis"), sec("engine"), sec("bsg"), sec("battery")
    params = VehicleParams(
        mass=float(p["mass_kg"]),
        c0=float(p["c0_n"]),
        c1=float(p["c1_n_per_mps"]),
        c2=float(p["c2_n_per_mps2"]),
        wheel_radius=float(p["wheel_radius_m"]),
        final_drive=float(p["final_drive"]),
        gear_ratios=arr(p, "gear_ratios", "chassis."),
        gear_efficiencies=arr(p, "gear_efficiencies", "chassis."),
        shift_speeds=arr(p, "shift_speeds_mps", "chassis."),
        idle_speed=float(p["idle_speed_rad_s"]),
    )
    n_fw = len(e["fuel_speed_axis_rad_s"])
    n_ft = len(e["fuel_torque_axis_nm"])
    engine = EngineModel(
        speed_axis=arr(e, "speed_axis_rad_s", "engine."),
        torque_min=arr(e, "torque_min_nm", "engine."),
        torque_max=arr(e, "torque_max_nm", "engine."),
        fuel_speed_axis=arr(e, "fuel_speed_axis_rad_s", "engine."),
        fuel_torque_axis=arr(e, "fuel_torque_axis_nm", "engine."),
        fuel_map=check_array_1d(
            e["fuel_map_g_s"], "engine.fuel_map_g_s", n=n_fw * n_ft,
            err=VehicleFormatError,
        ).reshape(n_fw, n_ft),
    )
    n_ew = len(b["eff_speed_axis_rad_s"])
    n_et = len(b["eff_torque_axis_nm"])
    bsg = BsgModel(
        belt_ratio=float(b["belt_ratio"]),
        speed_axis=arr(b, "speed_axis_rad_s", "bsg."),
        torque_min=arr(b, "torque_min_nm", "bsg."),
        torque_max=arr(b, "torque_max_nm", "bsg."),
        eff_speed_axis=arr(b, "eff_speed_axis_rad_s", "bsg."),
        eff_torque_axis=arr(b, "eff_torque_axis_nm", "bsg."),
        eff_map=check_array_1d(
            b["eff_map"], "bsg.eff_map", n=n_ew * n_et, err=VehicleFormatError
        ).reshape(n_ew, n_et),
    )
    battery = BatteryModel(
        r0=float(bat["r0_ohm"]),
        c_nom=float(bat["c_nom_as"]),
        voc_soc_axis=arr(bat, "voc_soc_axis", "battery."),
        voc=arr(bat, "voc_v", "battery."),
        soc_min=float(bat.get("soc_min", 0.2)),
        soc_max=float(bat.get("soc_max", 0.9)),
    )
    return Vehicle(
        params=params, engine=engine, bsg=bsg, battery=battery,
        name=str(doc.get("name", "vehicle")),
    )


def dump_vehicle(vehicle: Vehicle) -> dict:
    """Serialize a vehicle back to its JSON document form."""
    p, e, b, bat = vehicle.params, vehicle.engine, vehicle.bsg, vehicle.battery
    return {
        "name": vehicle.name,
        "chassis": {
            "mass_kg": p.mass,
            "c0_n": p.c0,
            "c1_n_per_mps": p.c1,
            "c2_n_per_mps2": p.c2,
            "wheel_radius_m": p.wheel_radius,
            "final_drive": p.final_drive,
            "gear_ratios": p.gear_ratios.tolist(),
            "gear_efficiencies": p.gear_efficiencies.tolist(),
            "shift_speeds_mps": p.shift_speeds.tolist(),
            "idle_speed_rad_s": p.idle_speed,
        },
        "engine": {
            "speed_axis_rad_s": e.speed_axis.tolist(),
            "torque_min_nm": e.torque_min.tolist(),
            "torque_max_nm": e.torque_max.tolist(),
            "fuel_speed_axis_rad_s": e.fuel_speed_axis.tolist(),
            "fuel_torque_axis_nm": e.fuel_torque_axis.tolist(),
            "fuel_map_g_s": e.fuel_map.ravel().tolist(),
        },
        "bsg": {
            "belt_ratio": b.belt_ratio,
            "speed_axis_rad_s": b.speed_axis.tolist(),
            "torque_min_nm": b.torque_min.tolist(),
            "torque_max_nm": b.torque_max.tolist(),
            "eff_speed_axis_rad_s": b.eff_speed_axis.tolist(),
            "eff_torque_axis_nm": b.eff_torque_axis.tolist(),
            "eff_map": b.eff_map.ravel().tolist(),
        },
        "battery": {
            "r0_ohm": bat.r0,
            "c_nom_as": bat.c_nom,
            "voc_soc_axis": bat.voc_soc_axis.tolist(),
            "voc_v": bat.voc.tolist(),
            "soc_min": bat.soc_min,
            "soc_max": bat.soc_max,
        },
    }

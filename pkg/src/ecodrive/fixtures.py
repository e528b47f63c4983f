"""Bundled synthetic test articles: a 48V mild-hybrid vehicle and routes.

Everything here is generated data with plausible magnitudes for a compact
passenger car with a belt-driven 48V starter-generator.  The generators are
deterministic: the same seed always produces byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .plant import (
    BatteryModel,
    BsgModel,
    EngineModel,
    Vehicle,
    VehicleParams,
    dump_vehicle,
)
from .route import load_route

# Willans-line fuel model constants for the synthetic engine map.
_FUEL_EFF = 0.40               # indicated efficiency of the willans line
_FUEL_LHV = 42.5e6             # J/kg lower heating value
_FUEL_LOSS_T0 = 14.0           # N*m friction/pumping torque offset
_FUEL_LOSS_T1 = 0.018          # N*m per rad/s speed-dependent loss


def make_vehicle() -> Vehicle:
    """Synthetic compact car with a 48V P0 (belt) starter-generator."""
    params = VehicleParams(
        mass=1530.0,
        c0=135.0,
        c1=3.2,
        c2=0.42,
        wheel_radius=0.307,
        final_drive=3.9,
        gear_ratios=(3.92, 2.29, 1.52, 1.13, 0.91, 0.77),
        gear_efficiencies=(0.95, 0.95, 0.96, 0.96, 0.965, 0.965),
        shift_speeds=(4.5, 8.0, 12.0, 16.5, 21.0),
        idle_speed=78.5,
    )

    eng_speed = np.array([78.5, 120.0, 160.0, 200.0, 260.0, 320.0, 400.0, 480.0, 550.0])
    eng_tmax = np.array([95.0, 125.0, 150.0, 160.0, 160.0, 155.0, 145.0, 130.0, 110.0])
    eng_tmin = np.array([-12.0, -14.0, -16.0, -18.0, -21.0, -25.0, -30.0, -36.0, -42.0])

    fuel_speed = np.linspace(78.5, 550.0, 10)
    fuel_torque = np.linspace(0.0, 170.0, 12)
    ws, ts = np.meshgrid(fuel_speed, fuel_torque, indexing="ij")
    loss = _FUEL_LOSS_T0 + _FUEL_LOSS_T1 * ws
    fuel_map = (ts + loss) * ws / (_FUEL_EFF * _FUEL_LHV) * 1000.0  # g/s

    engine = EngineModel(
        speed_axis=eng_speed,
        torque_min=eng_tmin,
        torque_max=eng_tmax,
        fuel_speed_axis=fuel_speed,
        fuel_torque_axis=fuel_torque,
        fuel_map=fuel_map,
    )

    bsg_speed = np.array([210.0, 400.0, 700.0, 1000.0, 1500.0])
    bsg_tmax = np.minimum(58.0, 13000.0 / bsg_speed)
    eff_speed = np.array([210.0, 600.0, 1000.0, 1500.0])
    eff_torque = np.array([0.0, 15.0, 30.0, 45.0, 60.0])
    we, te = np.meshgrid(eff_speed, eff_torque, indexing="ij")
    eff = 0.91 - 0.035 * (we / 1500.0) - 0.045 * (te / 60.0)
    eff = np.clip(eff, 0.80, 0.92)

    bsg = BsgModel(
        belt_ratio=2.7,
        speed_axis=bsg_speed,
        torque_min=-bsg_tmax,
        torque_max=bsg_tmax,
        eff_speed_axis=eff_speed,
        eff_torque_axis=eff_torque,
        eff_map=eff,
    )

    battery = BatteryModel(
        r0=0.012,
        c_nom=36000.0,
        voc_soc_axis=np.array([0.20, 0.35, 0.50, 0.65, 0.80, 0.90]),
        voc=np.array([45.2, 46.4, 47.5, 48.6, 49.8, 50.6]),
        soc_min=0.30,
        soc_max=0.80,
    )

    return Vehicle(params=params, engine=engine, bsg=bsg, battery=battery,
                   name="synthetic-48v-p0")


def _signal(rng: np.random.Generator, green_frac: float) -> dict:
    """One signal timing with all phase edges on the 2-second ladder."""
    cycle = float(rng.choice([60, 70, 80]))
    green = 2.0 * round(cycle * green_frac / 2.0)
    green = min(max(green, 10.0), cycle - 10.0)
    offset = 2.0 * float(rng.integers(0, int(cycle // 2)))
    return {"cycle_s": cycle, "offset_s": offset, "green_windows_s": [[0.0, green]]}


def make_route_urban(seed: int = 0) -> dict:
    """7 km urban arterial: 5 signals, 2 stop signs, 50-60 km/h zones."""
    rng = np.random.default_rng(seed)
    n = 700
    v_max = np.full(n, 13.9)
    v_max[100:350] = 15.3
    v_max[350:550] = 16.7
    signal_nodes = [80, 210, 330, 450, 610]
    signals = {f"tl{i + 1}": _signal(rng, rng.uniform(0.45, 0.62))
               for i in range(len(signal_nodes))}
    return {
        "name": "urban-7km",
        "node_count": n,
        "delta_d_m": 10.0,
        "v_min_mps": 0.0,
        "v_max_mps": v_max.tolist(),
        "grade_rad": 0.0,
        "accel_min_mps2": -3.0,
        "accel_max_mps2": 2.5,
        "stop_dwell_s": 2.0,
        "traffic_lights": [
            {"node": node, "signal": f"tl{i + 1}"}
            for i, node in enumerate(signal_nodes)
        ],
        "stop_signs": [150, 520],
        "signals": signals,
    }


def make_route_mixed(seed: int = 1) -> dict:
    """7.5 km mixed route: urban ends, 80 km/h rural stretch in the middle."""
    rng = np.random.default_rng(seed)
    n = 750
    v_max = np.full(n, 15.3)
    v_max[:60] = 13.9
    v_max[250:550] = 22.2
    signal_nodes = [70, 180, 640]
    signals = {f"tl{i + 1}": _signal(rng, rng.uniform(0.45, 0.62))
               for i in range(len(signal_nodes))}
    grade = np.zeros(n)
    grade[300:400] = 0.015
    grade[400:500] = -0.015
    return {
        "name": "mixed-7p5km",
        "node_count": n,
        "delta_d_m": 10.0,
        "v_min_mps": 0.0,
        "v_max_mps": v_max.tolist(),
        "grade_rad": grade.tolist(),
        "accel_min_mps2": -3.0,
        "accel_max_mps2": 2.5,
        "stop_dwell_s": 2.0,
        "traffic_lights": [
            {"node": node, "signal": f"tl{i + 1}"}
            for i, node in enumerate(signal_nodes)
        ],
        "stop_signs": [230],
        "signals": signals,
    }


def make_route_short(seed: int = 2) -> dict:
    """1.2 km single-signal route for fast tests and examples."""
    rng = np.random.default_rng(seed)
    n = 120
    signals = {"tl1": _signal(rng, 0.5)}
    return {
        "name": "short-1p2km",
        "node_count": n,
        "delta_d_m": 10.0,
        "v_min_mps": 0.0,
        "v_max_mps": 13.9,
        "grade_rad": 0.0,
        "accel_min_mps2": -3.0,
        "accel_max_mps2": 2.5,
        "stop_dwell_s": 2.0,
        "traffic_lights": [{"node": 60, "signal": "tl1"}],
        "stop_signs": [],
        "signals": signals,
    }


def default_config() -> dict:
    """Default experiment configuration (controller and baseline settings)."""
    return {
        "gamma": 0.5,
        "horizon_steps": 20,
        "horizon_time_s": 80.0,
        "time_step_s": 2.0,
        "grid": {"n_v": 35, "n_soc": 26, "n_t": 40, "n_t_eng": 23, "n_t_bsg": 30},
        "soc_init": 0.5,
        "soc_target": 0.5,
        "soc_weight": 1500.0,
        "infeasible_cost": 1.0e6,
        "backend": "serial",
        "workers": 8,
        "baseline": {
            "driver": {
                "margin_mps": 0.5,
                "accel": 1.2,
                "decel": -2.0,
                "line_of_sight_m": 130.0,
                "stop_tolerance_m": 1.0,
            },
            "split": {
                "assist_threshold_nm": 20.0,
                "regen_fraction": 0.9,
                "soc_lo": 0.495,
                "soc_hi": 0.505,
            },
        },
    }


def write_fixture_tree(out_dir: str, seed: int = 0) -> list[str]:
    """Write vehicle, route, and config fixtures under out_dir.

    Returns the list of files written.  Deterministic in the seed.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _dump(name: str, doc: dict) -> None:
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(path)

    _dump("vehicle.json", dump_vehicle(make_vehicle()))
    _dump("route_urban.json", make_route_urban(seed))
    _dump("route_mixed.json", make_route_mixed(seed + 1))
    _dump("route_short.json", make_route_short(seed + 2))
    _dump("config.json", default_config())
    return written


def load_fixture_route(kind: str, seed: int = 0):
    """Build one of the bundled routes in memory ("urban", "mixed", "short")."""
    if kind == "urban":
        return load_route(make_route_urban(seed))
    if kind == "mixed":
        return load_route(make_route_mixed(seed + 1))
    if kind == "short":
        return load_route(make_route_short(seed + 2))
    raise ValueError(f"unknown fixture route kind: {kind!r}")

"""Experiment output files: trajectory CSV, timing CSV, summary JSON.

Trajectory files are deterministic down to the byte: floats are written
with ``repr`` (shortest round-trip form), so identical runs produce
identical files and a reader recovers the exact binary values.  Solver
wall times are never mixed into the trajectory file — timing varies run to
run and would break byte-level comparison — they go to a separate file.

Summaries carry only quantities recomputable from the trajectory files
(totals, endpoints) plus timing statistics sourced from the timing file.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .mpc import ClosedLoopTrajectory

TRAJECTORY_COLUMNS = [
    "step", "v_mps", "soc", "t_s", "t_eng_nm", "t_bsg_nm", "brake_n",
    "gear", "wait_s", "dt_move_s", "fuel_inc_g", "accel_mps2",
    "cost_to_go", "fallback",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(path: str | Path, traj: ClosedLoopTrajectory) -> None:
    """Write the per-step trajectory; final state appears as a last row
    with only the state columns filled (action columns empty)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for st in traj.steps:
            w.writerow([
                st.s, _fmt(st.v), _fmt(st.soc), _fmt(st.t),
                _fmt(st.t_eng), _fmt(st.t_bsg), _fmt(st.brake_force),
                st.gear, _fmt(st.wait_s), _fmt(st.dt_move_s),
                _fmt(st.fuel_inc_g), _fmt(st.accel),
                _fmt(st.cost_to_go), int(st.fallback),
            ])
        if traj.final_state is not None:
            f = traj.final_state
            last = traj.steps[-1].s + 1 if traj.steps else 0
            w.writerow([
                last, _fmt(f.v), _fmt(f.soc), _fmt(f.t),
                "", "", "", "", "", "", "", "", "", "",
            ])


@dataclass
class TrajectoryFile:
    """Parsed trajectory CSV: step rows plus the final-state row."""

    steps: list
    final: dict | None

    @property
    def fuel_g(self) -> float:
        return sum(r["fuel_inc_g"] for r in self.steps)

    @property
    def travel_time_s(self) -> float:
        if self.final is not None and self.steps:
            return self.final["t_s"] - self.steps[0]["t_s"]
        return 0.0

    @property
    def soc_end(self) -> float:
        if self.final is not None:
            return self.final["soc"]
        return math.nan


def read_trajectory_csv(path: str | Path) -> TrajectoryFile:
    path = Path(path)
    steps: list = []
    final = None
    with path.open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory header in {path}")
        for row in rd:
            if row[4] == "":
                final = {
                    "step": int(row[0]), "v_mps": float(row[1]),
                    "soc": float(row[2]), "t_s": float(row[3]),
                }
                continue
            steps.append({
                "step": int(row[0]), "v_mps": float(row[1]),
                "soc": float(row[2]), "t_s": float(row[3]),
                "t_eng_nm": float(row[4]), "t_bsg_nm": float(row[5]),
                "brake_n": float(row[6]), "gear": int(row[7]),
                "wait_s": float(row[8]), "dt_move_s": float(row[9]),
                "fuel_inc_g": float(row[10]), "accel_mps2": float(row[11]),
                "cost_to_go": float(row[12]), "fallback": bool(int(row[13])),
            })
    return TrajectoryFile(steps=steps, final=final)


def write_timing_csv(path: str | Path, traj: ClosedLoopTrajectory) -> None:
    """Solver wall time per closed-loop step (ms), kept out of the
    trajectory file so trajectories stay byte-comparable."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "solver_wall_ms"])
        for i, wall in enumerate(traj.solver_wall_s):
            w.writerow([i, _fmt(wall * 1.0e3)])


def summarize(traj: ClosedLoopTrajectory) -> dict:
    """Summary of one closed-loop run, recomputable from the trajectory
    CSV.  Solver wall times deliberately stay out (see the timing CSV), so
    repeated runs produce byte-identical summaries."""
    return {
        "route": traj.route_name,
        "controller": traj.controller,
        "backend": traj.backend,
        "status": traj.status,
        "steps": len(traj.steps),
        "fuel_g": traj.fuel_g,
        "travel_time_s": traj.travel_time_s,
        "soc_start": traj.x_start.soc,
        "soc_end": traj.soc_end,
        "soc_drift": abs(traj.soc_end - traj.x_start.soc)
        if not math.isnan(traj.soc_end) else math.nan,
        "fallback_steps": sum(1 for st in traj.steps if st.fallback),
    }


def comparison_summary(mpc: dict, base: dict) -> dict:
    """Relative metrics of an MPC run against a baseline run."""
    fuel_ratio = mpc["fuel_g"] / base["fuel_g"] if base["fuel_g"] else math.nan
    time_ratio = (mpc["travel_time_s"] / base["travel_time_s"]
                  if base["travel_time_s"] else math.nan)
    return {
        "fuel_ratio": fuel_ratio,
        "fuel_saving_pct": (1.0 - fuel_ratio) * 100.0,
        "time_ratio": time_ratio,
        "time_delta_pct": (time_ratio - 1.0) * 100.0,
    }


def write_summary_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_summary_json(path: str | Path) -> dict:
    with Path(path).open() as fh:
        return json.load(fh)

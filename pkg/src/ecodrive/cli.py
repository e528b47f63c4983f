"""Command-line harness: closed-loop runs, backend diffs, solver benchmarks,
and fixture generation.

Subcommands
-----------
run            simulate baseline and/or receding-horizon controllers on a
               route; write trajectory CSV + timing CSV + summary JSON.
diff-backends  step-locked serial/parallel comparison over a route.
bench          repeated-solve timing statistics per backend.
make-fixtures  write the synthetic vehicle/route/config files.

Exit codes: 0 success, 1 configuration error, 2 infeasible simulation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as eio
from .baseline import BaselineDriver, DriverParams, SplitParams
from .bench import diff_backends_run, run_bench
from .dp import GridSpec, PenaltyConfig
from .errors import RouteFormatError, VehicleFormatError
from .fixtures import default_config, load_fixture_route, make_vehicle, write_fixture_tree
from .mpc import EcoDrivingMPC, simulate_closed_loop
from .plant import StateVector, Vehicle, load_vehicle
from .route import Route, SpatSchedule, load_route

log = logging.getLogger("ecodrive")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2

FIXTURE_ROUTES = ("urban", "mixed", "short")


class ConfigError(Exception):
    """Invalid experiment configuration; maps to exit code 1."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class ExperimentConfig:
    """One experiment invocation: where the inputs live and how to solve.

    ``route`` is either a bundled fixture name (urban, mixed, short) or a
    path to a route JSON file; ``vehicle`` is a path or None for the
    built-in vehicle.
    """

    route: str = "urban"
    vehicle: Optional[str] = None
    gamma: float = 0.5
    grid: GridSpec = dataclasses.field(default_factory=GridSpec)
    delta_d: float = 10.0
    horizon: int = 20
    backend: str = "serial"
    workers: int = 8
    out: str = "out"
    seed: int = 0
    controller: str = "both"
    teleport: bool = True
    soc_init: float = 0.5
    penalty: PenaltyConfig = dataclasses.field(default_factory=PenaltyConfig)
    driver: DriverParams = dataclasses.field(default_factory=DriverParams)
    split: SplitParams = dataclasses.field(default_factory=SplitParams)

    @property
    def t_f(self) -> float:
        return self.grid.dt * self.grid.n_t

    def validate(self) -> None:
        if self.route not in FIXTURE_ROUTES and not Path(self.route).is_file():
            raise ConfigError(f"route file not found: {self.route}")
        if self.vehicle is not None and not Path(self.vehicle).is_file():
            raise ConfigError(f"vehicle file not found: {self.vehicle}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.backend not in ("serial", "parallel"):
            raise ConfigError(f"backend must be serial or parallel, got {self.backend!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.controller not in ("mpc", "baseline", "both"):
            raise ConfigError(
                f"controller must be mpc, baseline, or both, got {self.controller!r}"
            )

    def load_inputs(self) -> tuple[Vehicle, Route, SpatSchedule]:
        """Resolve the vehicle and route; cross-check against the config."""
        try:
            vehicle = (make_vehicle() if self.vehicle is None
                       else load_vehicle(self.vehicle))
        except VehicleFormatError as exc:
            raise ConfigError(f"vehicle file: {exc}") from exc
        try:
            if self.route in FIXTURE_ROUTES:
                route, spat = load_fixture_route(self.route, self.seed)
            else:
                route, spat = load_route(self.route)
        except RouteFormatError as exc:
            raise ConfigError(f"route file: {exc}") from exc
        if route.delta_d != self.delta_d:
            log.warning(
                "route spacing %.3g m differs from configured delta_d %.3g m; "
                "using the route's value", route.delta_d, self.delta_d,
            )
        v_top = float(np.max(route.v_max))
        if v_top > 0.0 and self.t_f < self.horizon * route.delta_d / v_top:
            log.warning(
                "time ladder t_f=%.1f s is shorter than the horizon needs at "
                "top speed (%d steps x %.3g m / %.3g m/s = %.1f s); distant "
                "slow arrivals will fall off the ladder",
                self.t_f, self.horizon, route.delta_d, v_top,
                self.horizon * route.delta_d / v_top,
            )
        return vehicle, route, spat


def _grid_from_doc(doc: dict, dt: float) -> GridSpec:
    g = doc.get("grid", {})
    try:
        return GridSpec(
            n_v=int(g.get("n_v", 35)),
            n_soc=int(g.get("n_soc", 26)),
            n_t=int(g.get("n_t", 40)),
            n_t_eng=int(g.get("n_t_eng", 23)),
            n_t_bsg=int(g.get("n_t_bsg", 30)),
            dt=dt,
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def load_config(path: Optional[str], overrides: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults <- config file <- command-line flags."""
    doc = default_config()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with p.open() as fh:
                doc.update(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON: {exc}") from exc

    dt = float(doc.get("time_step_s", 2.0))
    if dt <= 0:
        raise ConfigError(f"time_step_s must be positive, got {dt}")
    grid = _grid_from_doc(doc, dt)
    t_f_doc = float(doc.get("horizon_time_s", grid.dt * grid.n_t))
    if t_f_doc != grid.dt * grid.n_t:
        raise ConfigError(
            f"horizon_time_s={t_f_doc:g} does not equal "
            f"time_step_s x n_t = {grid.dt * grid.n_t:g}"
        )
    try:
        penalty = PenaltyConfig(
            soc_target=float(doc.get("soc_target", 0.5)),
            soc_weight=float(doc.get("soc_weight", 1500.0)),
            j_inf=float(doc.get("infeasible_cost", 1.0e6)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bl = doc.get("baseline", {})
    try:
        driver = DriverParams(**bl.get("driver", {}))
        split = SplitParams(**bl.get("split", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"baseline config: {exc}") from exc

    cfg = ExperimentConfig(
        gamma=float(doc.get("gamma", 0.5)),
        grid=grid,
        delta_d=float(doc.get("delta_d_m", 10.0)),
        horizon=int(doc.get("horizon_steps", 20)),
        backend=str(doc.get("backend", "serial")),
        workers=int(doc.get("workers", 8)),
        soc_init=float(doc.get("soc_init", 0.5)),
        penalty=penalty,
        driver=driver,
        split=split,
    )
    for name in ("route", "vehicle", "gamma", "backend", "workers",
                 "out", "seed", "controller", "horizon"):
        val = getattr(overrides, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(overrides, "no_teleport", False):
        cfg.teleport = False
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_one(name: str, controller, route, spat, cfg: ExperimentConfig,
             out: Path) -> dict:
    x0 = StateVector(v=0.0, soc=cfg.soc_init, t=0.0)
    traj = simulate_closed_loop(route, spat, controller, x0)
    stem = f"trajectory_{name}_{route.name}"
    eio.write_trajectory_csv(out / f"{stem}.csv", traj)
    eio.write_timing_csv(out / f"timing_{name}_{route.name}.csv", traj)
    summary = eio.summarize(traj)
    stats = traj.timing_stats_ms()
    print(
        f"[{name}] route={route.name} status={traj.status} "
        f"fuel={traj.fuel_g:.2f} g time={traj.travel_time_s:.1f} s "
        f"soc {cfg.soc_init:.3f}->{traj.soc_end:.4f} "
        f"steps={traj.n_steps} fallbacks={summary['fallback_steps']} "
        f"solver mean {stats['mean_ms']:.1f} ms"
    )
    return summary


def cmd_run(cfg: ExperimentConfig) -> int:
    vehicle, route, spat = cfg.load_inputs()
    out = _out_dir(cfg)
    summaries: dict = {}

    if cfg.controller in ("baseline", "both"):
        base = BaselineDriver(vehicle, driver=cfg.driver, split=cfg.split)
        base.fit(route, spat)
        summaries["baseline"] = _run_one("baseline", base, route, spat, cfg, out)

    if cfg.controller in ("mpc", "both"):
        mpc = EcoDrivingMPC(
            vehicle, gamma=cfg.gamma, grids=cfg.grid, penalty=cfg.penalty,
            horizon=cfg.horizon, backend=cfg.backend, workers=cfg.workers,
            teleport=cfg.teleport,
        )
        log.info("fitting terminal cost field over %d nodes", route.node_count)
        mpc.fit(route, spat)
        summaries["mpc"] = _run_one("mpc", mpc, route, spat, cfg, out)

    payload = {
        "route": route.name,
        "gamma": cfg.gamma,
        "backend": cfg.backend,
        "seed": cfg.seed,
        "runs": summaries,
    }
    if "mpc" in summaries and "baseline" in summaries:
        comp = eio.comparison_summary(summaries["mpc"], summaries["baseline"])
        payload["comparison"] = comp
        print(
            f"[comparison] fuel ratio {comp['fuel_ratio']:.4f} "
            f"(saving {comp['fuel_saving_pct']:.1f}%), "
            f"time ratio {comp['time_ratio']:.4f} "
            f"(delta {comp['time_delta_pct']:+.1f}%)"
        )
    eio.write_summary_json(out / f"summary_{route.name}.json", payload)

    bad = [n for n, s in summaries.items() if s["status"] != "ok"]
    if bad:
        log.error("infeasible simulation for: %s", ", ".join(bad))
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_diff_backends(cfg: ExperimentConfig, perturb_ties: bool) -> int:
    vehicle, route, spat = cfg.load_inputs()
    out = _out_dir(cfg)
    report = diff_backends_run(
        vehicle, route, spat,
        gamma=cfg.gamma, grids=cfg.grid, penalty=cfg.penalty,
        horizon=cfg.horizon, workers=cfg.workers, teleport=cfg.teleport,
        x_start=StateVector(v=0.0, soc=cfg.soc_init, t=0.0),
        perturb_ties=perturb_ties,
    )
    print(report.table())
    path = out / f"diff_backends_{route.name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "horizon", "max_abs_dj", "policy_mismatches"])
        for d in report.steps:
            w.writerow([d.s, d.horizon, repr(d.max_abs_dj), d.policy_mismatches])
    if report.status.startswith("infeasible"):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_bench(cfg: ExperimentConfig, reps: int, warmup: int) -> int:
    if reps < 30:
        raise ConfigError(f"bench needs reps >= 30, got {reps}")
    if warmup < 0:
        raise ConfigError("warmup must be >= 0")
    vehicle, route, spat = cfg.load_inputs()
    out = _out_dir(cfg)
    report = run_bench(
        vehicle, route, spat,
        gamma=cfg.gamma, grids=cfg.grid, penalty=cfg.penalty,
        horizon=cfg.horizon, workers=cfg.workers,
        reps=reps, warmup=warmup, seed=cfg.seed,
    )
    print(report.table())
    report.write_csv(out / f"bench_{route.name}.csv")
    return EXIT_OK


def cmd_make_fixtures(cfg: ExperimentConfig) -> int:
    files = write_fixture_tree(cfg.out, cfg.seed)
    for f in files:
        print(f)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        # Argument problems are configuration errors (exit 1, not argparse's 2).
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ecodrive", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--route",
                        help="fixture name (urban, mixed, short) or route JSON path")
        sp.add_argument("--vehicle", help="vehicle JSON path (default: built-in)")
        sp.add_argument("--gamma", type=float, help="fuel/time trade-off in [0, 1]")
        sp.add_argument("--backend", choices=["serial", "parallel"])
        sp.add_argument("--workers", type=int, help="parallel backend worker count")
        sp.add_argument("--horizon", type=int, help="receding-horizon step count")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="fixture/bench schedule seed")
        sp.add_argument("--no-teleport", action="store_true",
                        help="disable the standstill red-wait time jump (debug)")

    sp_run = sub.add_parser("run", help="closed-loop simulation")
    common(sp_run)
    sp_run.add_argument("--controller", choices=["mpc", "baseline", "both"],
                        help="which controllers to simulate (default: both)")

    sp_diff = sub.add_parser("diff-backends", help="serial vs parallel tables")
    common(sp_diff)
    sp_diff.add_argument("--perturb-ties", action="store_true",
                         help="bias the parallel tie rule (negative control)")

    sp_bench = sub.add_parser("bench", help="solver timing statistics")
    common(sp_bench)
    sp_bench.add_argument("--reps", type=int, default=30,
                          help="timed solves per backend (>= 30)")
    sp_bench.add_argument("--warmup", type=int, default=5,
                          help="untimed warm-up solves per backend")

    sp_fix = sub.add_parser("make-fixtures", help="write synthetic input files")
    sp_fix.add_argument("--out", help="output directory (default: out)")
    sp_fix.add_argument("--seed", type=int, help="route generation seed")

    return p


def main(argv: Optional[list] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "make-fixtures":
            cfg = ExperimentConfig()
            if args.out is not None:
                cfg.out = args.out
            if args.seed is not None:
                cfg.seed = args.seed
            return cmd_make_fixtures(cfg)
        cfg = load_config(args.config, args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "diff-backends":
            return cmd_diff_backends(cfg, args.perturb_ties)
        if args.command == "bench":
            return cmd_bench(cfg, args.reps, args.warmup)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

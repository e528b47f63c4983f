"""Benchmark and backend-comparison harnesses.

``run_bench`` times repeated full-horizon solves per backend over one
shared, seed-deterministic schedule of start states and reports mean,
variance, and max wall time (milliseconds) alongside machine details.

``diff_backends_run`` drives a closed loop where every receding-horizon
solve is executed by both backends on the same inputs and the full table
stacks are compared bitwise; the vehicle then advances on the serial
backend's decision so both backends see identical states at every step.
"""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dp import GridSpec, PenaltyConfig, SolveContext, build_context, solve_horizon
from .errors import StartStateInfeasibleError
from .mpc import (
    TerminalCostField, _argmin_at_state, _max_braking_decision,
    build_terminal_cost,
)
from .plant import StateVector, Vehicle, propagate_state_full
from .route import NODE_SIGNAL, Route, SpatSchedule

# ---------------------------------------------------------------------------
# Solve-time benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchResult:
    """Timing sample of one backend over the shared solve schedule."""

    backend: str
    workers: int
    reps: int
    warmup: int
    times_ms: np.ndarray

    @property
    def mean_ms(self) -> float:
        return float(self.times_ms.mean())

    @property
    def variance_ms2(self) -> float:
        return float(self.times_ms.var())

    @property
    def max_ms(self) -> float:
        return float(self.times_ms.max())


def machine_info() -> dict:
    import numba

    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


def bench_schedule(
    route: Route,
    horizon: int,
    count: int,
    seed: int = 0,
) -> list:
    """Seed-deterministic (start node, start time) pairs, identical for
    every backend.  Nodes are drawn so the full horizon fits on the route;
    start times cover several signal cycles."""
    s_hi = route.node_count - 1 - horizon
    if s_hi < 0:
        raise ValueError(
            f"route of {route.node_count} nodes cannot host a "
            f"{horizon}-step horizon"
        )
    rng = np.random.default_rng(seed)
    nodes = rng.integers(0, s_hi + 1, size=count)
    times = rng.uniform(0.0, 120.0, size=count)
    return [(int(s), float(t)) for s, t in zip(nodes, times)]


def run_bench(
    vehicle: Vehicle,
    route: Route,
    spat: SpatSchedule,
    *,
    gamma: float = 0.5,
    grids: Optional[GridSpec] = None,
    penalty: Optional[PenaltyConfig] = None,
    horizon: int = 20,
    backends: Sequence[str] = ("serial", "parallel"),
    workers: int = 8,
    reps: int = 30,
    warmup: int = 5,
    seed: int = 0,
) -> "BenchReport":
    """Time ``reps`` full-horizon solves per backend.

    The first ``warmup`` solves per backend run on extra schedule entries
    and are excluded from the statistics (they absorb JIT compilation and
    cache effects).  All backends share one schedule and one set of
    precomputed solve contexts, so they time identical work.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    grids = grids if grids is not None else GridSpec()
    penalty = penalty if penalty is not None else PenaltyConfig()

    schedule = bench_schedule(route, horizon, warmup + reps, seed)
    contexts = [
        build_context(
            vehicle, route, spat, s, t_start,
            grids=grids, penalty=penalty, gamma=gamma, horizon=horizon,
        )
        for s, t_start in schedule
    ]

    results = []
    for backend in backends:
        times = np.empty(reps)
        for i, ctx in enumerate(contexts):
            t0 = time.perf_counter()
            solve_horizon(ctx, None, backend=backend, workers=workers)
            wall = time.perf_counter() - t0
            if i >= warmup:
                times[i - warmup] = wall * 1.0e3
        results.append(BenchResult(
            backend=backend,
            workers=workers if backend == "parallel" else 1,
            reps=reps, warmup=warmup, times_ms=times,
        ))
    return BenchReport(results=results, machine=machine_info(),
                       grids=grids, horizon=horizon, seed=seed)


@dataclass
class BenchReport:
    """Per-backend timing statistics plus the machine they ran on."""

    results: list
    machine: dict
    grids: GridSpec
    horizon: int
    seed: int

    def result(self, backend: str) -> BenchResult:
        for r in self.results:
            if r.backend == backend:
                return r
        raise KeyError(backend)

    def table(self) -> str:
        head = (f"{'backend':<10} {'workers':>7} {'reps':>5} "
                f"{'mean (ms)':>12} {'variance (ms^2)':>16} {'max (ms)':>12}")
        lines = [head, "-" * len(head)]
        for r in self.results:
            lines.append(
                f"{r.backend:<10} {r.workers:>7d} {r.reps:>5d} "
                f"{r.mean_ms:>12.3f} {r.variance_ms2:>16.3f} {r.max_ms:>12.3f}"
            )
        try:
            ser = self.result("serial")
            par = self.result("parallel")
        except KeyError:
            pass
        else:
            lines.append("-" * len(head))
            lines.append(
                f"speedup (serial mean / parallel mean): "
                f"{ser.mean_ms / par.mean_ms:.2f}x"
            )
            lines.append(
                f"variance ratio (parallel / serial):    "
                f"{par.variance_ms2 / ser.variance_ms2:.3f}"
            )
        g = self.grids
        lines.append("-" * len(head))
        lines.append(
            f"solve size: ({g.n_v} x {g.n_soc} x {g.n_t}) states, "
            f"({g.n_t_eng} x {g.n_t_bsg}) actions, {self.horizon} steps"
        )
        m = self.machine
        lines.append(
            f"machine: {m['platform']}, {m['cpu_count']} cpu, "
            f"python {m['python']}, numpy {m['numpy']}, numba {m['numba']}"
        )
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["backend", "workers", "rep", "wall_ms"])
            for r in self.results:
                for i, ms in enumerate(r.times_ms):
                    w.writerow([r.backend, r.workers, i, repr(float(ms))])


# ---------------------------------------------------------------------------
# Step-locked backend comparison
# ---------------------------------------------------------------------------


@dataclass
class StepDiff:
    """Table comparison at one closed-loop node."""

    s: int
    horizon: int
    max_abs_dj: float
    policy_mismatches: int


@dataclass
class DiffReport:
    """Bitwise backend agreement over one step-locked closed loop."""

    route_name: str
    workers: int
    perturb_ties: bool
    steps: list = dc_field(default_factory=list)
    status: str = "ok"
    fallback_steps: int = 0

    @property
    def max_abs_dj(self) -> float:
        return max((d.max_abs_dj for d in self.steps), default=0.0)

    @property
    def policy_mismatches(self) -> int:
        return sum(d.policy_mismatches for d in self.steps)

    @property
    def identical(self) -> bool:
        return (self.status == "ok" and self.max_abs_dj == 0.0
                and self.policy_mismatches == 0)

    def table(self) -> str:
        head = (f"{'node':>5} {'horizon':>7} {'max|dJ|':>14} "
                f"{'policy mismatches':>18}")
        lines = [
            f"route: {self.route_name}  workers: {self.workers}  "
            f"perturb_ties: {self.perturb_ties}",
            head, "-" * len(head),
        ]
        flagged = [d for d in self.steps
                   if d.max_abs_dj != 0.0 or d.policy_mismatches != 0]
        show = flagged if flagged else self.steps[:1] + self.steps[-1:]
        for d in show:
            lines.append(f"{d.s:>5d} {d.horizon:>7d} {d.max_abs_dj:>14.6e} "
                         f"{d.policy_mismatches:>18d}")
        if not flagged and len(self.steps) > 2:
            lines.insert(4, f"{'...':>5} ({len(self.steps) - 2} matching "
                            "steps omitted)")
        lines.append("-" * len(head))
        lines.append(
            f"steps compared: {len(self.steps)}  "
            f"max|dJ| overall: {self.max_abs_dj:.6e}  "
            f"policy mismatches total: {self.policy_mismatches}  "
            f"fallback steps: {self.fallback_steps}  "
            f"status: {self.status}"
        )
        return "\n".join(lines)


def _diff_tables(res_a, res_b, ctx: SolveContext) -> StepDiff:
    max_dj = 0.0
    for ta, tb in zip(res_a.tables, res_b.tables):
        d = float(np.max(np.abs(ta.values - tb.values)))
        if d > max_dj:
            max_dj = d
    mism = 0
    for pa, pb in zip(res_a.policies, res_b.policies):
        mism += int(np.count_nonzero(pa.values != pb.values))
    return StepDiff(s=ctx.s, horizon=ctx.horizon, max_abs_dj=max_dj,
                    policy_mismatches=mism)


def compare_solves(ctx: SolveContext, *, workers: int = 8,
                   perturb_ties: bool = False) -> StepDiff:
    """Solve one context with both backends and compare every table level
    bitwise.  ``perturb_ties`` biases the parallel tie rule as a negative
    control: costs must still match while tied policies flip."""
    res_a = solve_horizon(ctx, None, backend="serial")
    res_b = solve_horizon(ctx, None, backend="parallel", workers=workers,
                          perturb_ties=perturb_ties)
    return _diff_tables(res_a, res_b, ctx)


def diff_backends_run(
    vehicle: Vehicle,
    route: Route,
    spat: SpatSchedule,
    *,
    gamma: float = 0.5,
    grids: Optional[GridSpec] = None,
    penalty: Optional[PenaltyConfig] = None,
    horizon: int = 20,
    workers: int = 8,
    teleport: bool = True,
    use_terminal_field: bool = True,
    x_start: Optional[StateVector] = None,
    perturb_ties: bool = False,
) -> DiffReport:
    """Step-locked closed loop: at every node both backends solve the same
    context and their full table stacks are compared; the plant then
    advances on the serial pick, so no divergence can accumulate."""
    grids = grids if grids is not None else GridSpec()
    penalty = penalty if penalty is not None else PenaltyConfig()
    if x_start is None:
        x_start = StateVector(v=0.0, soc=0.5, t=0.0)
    terminal: Optional[TerminalCostField] = (
        build_terminal_cost(route, vehicle, gamma=gamma, grids=grids,
                            penalty=penalty)
        if use_terminal_field else None
    )
    report = DiffReport(route_name=route.name, workers=workers,
                        perturb_ties=perturb_ties)
    kinds = route.node_kinds()
    n = route.node_count
    x = x_start
    for s in range(n - 1):
        h = min(horizon, n - 1 - s)
        field_slice = terminal.node_slice(s + h) if terminal is not None else None
        ctx = build_context(
            vehicle, route, spat, s, x.t,
            grids=grids, penalty=penalty, gamma=gamma, horizon=h,
            teleport=teleport, terminal_field=field_slice,
        )
        res = solve_horizon(ctx, None, backend="serial")
        res_par = solve_horizon(ctx, None, backend="parallel",
                                workers=workers, perturb_ties=perturb_ties)
        report.steps.append(_diff_tables(res, res_par, ctx))
        picked = _argmin_at_state(ctx, res.tables[1], x, spat)
        brake = 0.0
        predicted = None
        if picked is not None:
            action, predicted, _, _, _ = picked
        else:
            # Same fallback the closed-loop simulator applies: friction-only
            # maximum braking, so a reduced-grid diff still walks the route.
            dec = _max_braking_decision(vehicle, route, x, s, "diff fallback")
            if dec is None:
                report.status = f"infeasible at node {s}"
                break
            action, brake = dec.action, dec.brake_force
            report.fallback_steps += 1
        signal = None
        if int(kinds[s]) == NODE_SIGNAL:
            signal = spat.timing(route.traffic_lights[s])
        x, _ = propagate_state_full(
            vehicle, x, action, route.delta_d,
            grade=float(route.grade[s]),
            source_kind=int(kinds[s]),
            dest_kind=int(kinds[s + 1]),
            signal=signal,
            stop_dwell=route.stop_dwell,
            teleport=teleport,
            brake_force=brake,
        )
        if predicted is not None and not (
            x.v == predicted.v and x.soc == predicted.soc
            and x.t == predicted.t
        ):
            report.status = f"solver/plant mismatch at node {s}"
            break
    return report

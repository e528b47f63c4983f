"""Spatial-domain dynamic programming over (speed, SoC, time).

The value recursion runs backward over route nodes.  States live on a
per-node speed axis, a global SoC axis, and a time ladder anchored at the
solve start; actions are engine-torque x BSG-torque grid points.  Hard
constraints (signal phases, stop signs, speed hull, SoC window, battery
power) are encoded as an absorbing large cost, never as a soft penalty.

Two backends produce bitwise-identical tables:

* ``serial`` — the single-threaded reference sweep with models hoisted at
  their natural loop levels and early exits, so run time varies with the
  driving scenario.
* ``parallel`` — a two-stage decomposition: stage 1 evaluates all
  (speed, action) transition quantities as independent work items; stage 2
  updates state nodes partitioned into contiguous speed slabs, keeping the
  per-node action loop in the same serial order so ties resolve identically.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import StartStateInfeasibleError
from .plant import StateVector, Vehicle
from .route import NODE_PLAIN, NODE_SIGNAL, NODE_STOP, Route, SpatSchedule

DEFAULT_J_INF = 1.0e6


# ---------------------------------------------------------------------------
# Grids and penalties
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """State and action grid resolution for one solve."""

    n_v: int = 35
    n_soc: int = 26
    n_t: int = 40
    n_t_eng: int = 23
    n_t_bsg: int = 30
    dt: float = 2.0
    horizon_steps: int = 20
    t_eng_lo: float = -40.0
    t_eng_hi: float = 180.0
    t_bsg_lo: float = -56.0
    t_bsg_hi: float = 60.0

    def __post_init__(self):
        for name in ("n_v", "n_soc", "n_t", "n_t_eng", "n_t_bsg", "horizon_steps"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def horizon_time(self) -> float:
        return self.dt * self.n_t

    def v_axis(self, route: Route, node: int) -> np.ndarray:
        return np.linspace(route.v_min[node], route.v_max[node], self.n_v)

    def soc_axis(self, vehicle: Vehicle) -> np.ndarray:
        b = vehicle.battery
        return np.linspace(b.soc_min, b.soc_max, self.n_soc)

    def t_axis(self, t_start: float) -> np.ndarray:
        t0 = self.dt * math.floor(t_start / self.dt)
        return t0 + self.dt * np.arange(self.n_t)

    def te_axis(self) -> np.ndarray:
        return np.linspace(self.t_eng_lo, self.t_eng_hi, self.n_t_eng)

    def tb_axis(self) -> np.ndarray:
        return np.linspace(self.t_bsg_lo, self.t_bsg_hi, self.n_t_bsg)


@dataclass(frozen=True)
class PenaltyConfig:
    """Terminal SoC penalty and the absorbing infeasibility cost."""

    soc_target: float = 0.5
    soc_weight: float = 1500.0
    j_inf: float = DEFAULT_J_INF

    def __post_init__(self):
        if self.soc_weight < 0:
            raise ValueError("soc_weight must be non-negative")
        if self.j_inf <= 0:
            raise ValueError("j_inf must be positive")


# ---------------------------------------------------------------------------
# Result tables
# ---------------------------------------------------------------------------

@dataclass
class CostToGoTable:
    """Cost-to-go values on one node's (v, soc, t) grid."""

    values: np.ndarray          # (n_v, n_soc, n_t)
    v_axis: np.ndarray
    soc_axis: np.ndarray
    t_axis: np.ndarray
    j_inf: float

    def interpolate(self, v: float, soc: float, t: float) -> float:
        """Trilinear value at an off-grid query; j_inf outside the hull or
        next to an infeasible corner (infeasibility is absorbing)."""
        nv = self.v_axis.shape[0]
        nx = self.soc_axis.shape[0]
        nt = self.t_axis.shape[0]
        v0 = float(self.v_axis[0])
        dv = (float(self.v_axis[-1]) - v0) / (nv - 1)
        x0 = float(self.soc_axis[0])
        dx = (float(self.soc_axis[-1]) - x0) / (nx - 1)
        t0 = float(self.t_axis[0])
        dtg = (float(self.t_axis[-1]) - t0) / (nt - 1)
        ivlo, ivhi, wv, okv = K.locate_uniform(v, v0, dv, nv)
        jxlo, jxhi, wx, okx = K.locate_uniform(soc, x0, dx, nx)
        zlo, zhi, wz, okt = K.locate_uniform(t, t0, dtg, nt)
        if not (okv and okx and okt):
            return self.j_inf
        return float(K.interp3_abs(
            self.values, ivlo, ivhi, wv, jxlo, jxhi, wx, zlo, zhi, wz, self.j_inf
        ))


@dataclass
class PolicyTable:
    """Optimal flat action index per state node; -1 where no action is
    feasible."""

    values: np.ndarray          # (n_v, n_soc, n_t) int32
    te_axis: np.ndarray
    tb_axis: np.ndarray

    def action(self, iv: int, jx: int, z: int):
        flat = int(self.values[iv, jx, z])
        if flat < 0:
            return None
        ntb = self.tb_axis.shape[0]
        return float(self.te_axis[flat // ntb]), float(self.tb_axis[flat % ntb])


def interpolate_value(table: CostToGoTable, x: StateVector) -> float:
    """Cost-to-go at an arbitrary state."""
    return table.interpolate(x.v, x.soc, x.t)


def stage_cost(vehicle: Vehicle, x: StateVector, u, dt_step: float,
               gamma: float) -> float:
    """Running cost of a step of duration dt_step: fuel and time blended by
    gamma (fuel taken at the state/action operating point)."""
    pack = vehicle.pack()
    _, w_eng, _ = K.drivetrain_speeds(pack, float(x.v))
    mf = float(K.fuel_rate(pack, w_eng, float(u.t_eng)))
    return float(K.stage_cost_scalar(mf, dt_step, gamma))


# ---------------------------------------------------------------------------
# Solve context: everything one backward recursion needs, precomputed
# ---------------------------------------------------------------------------

@dataclass
class StepPlan:
    """Per-step constants of one spatial transition (node m -> m+1)."""

    node: int
    src_kind: int
    dest_kind: int
    grade: float
    v_src: np.ndarray
    v0_dest: float
    dv_dest: float
    arr_green: np.ndarray       # (n_t,) u8: moving arrival at the DEST node is
                                # admissible when its floor time sample is green
    dep_ok: np.ndarray          # (n_t,) u8: standstill departure admissible
    t_dep: np.ndarray           # (n_t,) f8: absolute departure time from standstill
    wait: np.ndarray            # (n_t,) f8: waiting time charged before departure


@dataclass
class SolveContext:
    """Assembled inputs of one horizon solve starting at node s, time t_s."""

    vehicle: Vehicle
    route: Route
    s: int
    horizon: int
    t_start: float
    gamma: float
    teleport: bool
    grids: GridSpec
    penalty: PenaltyConfig
    soc_axis: np.ndarray
    t_axis: np.ndarray
    te_axis: np.ndarray
    tb_axis: np.ndarray
    v_axes: list                 # horizon+1 speed axes, nodes s .. s+H
    steps: list                  # horizon StepPlan entries
    terminal: np.ndarray         # (n_v, n_soc, n_t) seeded terminal cost

    @property
    def pack(self):
        return self.vehicle.pack()


def _node_time_arrays(route: Route, spat: SpatSchedule, node: int,
                      t_axis: np.ndarray, teleport: bool):
    """green / dep_ok / t_dep / wait arrays for one node on the ladder.

    ``green`` marks the ladder samples at which the node's signal shows
    green (all ones for plain and stop-sign nodes).  It gates *arrivals*:
    a transition that reaches the node still moving is admissible only if
    the floor sample of its arrival time is green-marked.  The node's own
    moving states carry ordinary pass-through values — whether the vehicle
    was allowed to get there was settled by the step that brought it.
    """
    nt = t_axis.shape[0]
    kind = route.node_kinds()[node]
    green = np.ones(nt, dtype=np.uint8)
    dep_ok = np.ones(nt, dtype=np.uint8)
    t_dep = t_axis.copy()
    wait = np.zeros(nt)
    if kind == NODE_SIGNAL:
        signal_id = route.traffic_lights[node]
        timing = spat.timing(signal_id)
        for z in range(nt):
            tz = float(t_axis[z])
            if not timing.is_green(tz):
                green[z] = 0
                if teleport:
                    ng = timing.next_green_from(tz)
                    t_dep[z] = ng
                    wait[z] = ng - tz
                else:
                    dep_ok[z] = 0
    elif kind == NODE_STOP:
        dwell = route.stop_dwell
        for z in range(nt):
            t_dep[z] = float(t_axis[z]) + dwell
            wait[z] = dwell
    return green, dep_ok, t_dep, wait


def build_context(
    vehicle: Vehicle,
    route: Route,
    spat: SpatSchedule,
    s: int,
    t_start: float,
    *,
    grids: GridSpec,
    penalty: PenaltyConfig,
    gamma: float,
    horizon: Optional[int] = None,
    teleport: bool = True,
    terminal_field: Optional[np.ndarray] = None,
) -> SolveContext:
    """Precompute all per-step constants of one horizon solve.

    ``terminal_field`` is an optional (n_v, n_soc) cost surface for the
    horizon-end node; the quadratic SoC deviation penalty and the node's
    own admissibility masks are layered on top of it here.
    """
    n_nodes = route.node_count
    if not 0 <= s < n_nodes - 1:
        raise ValueError(f"start node {s} out of range for route of {n_nodes} nodes")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    horizon_max = n_nodes - 1 - s
    horizon = horizon_max if horizon is None else min(horizon, horizon_max)
    if horizon < 1:
        raise ValueError("horizon must cover at least one spatial step")

    kinds = route.node_kinds()
    soc_axis = grids.soc_axis(vehicle)
    t_axis = grids.t_axis(t_start)
    te_axis = grids.te_axis()
    tb_axis = grids.tb_axis()
    v_axes = [grids.v_axis(route, s + k) for k in range(horizon + 1)]

    # Per-node ladder arrays for nodes s .. s+H; each step k couples the
    # source node's departure arrays with the destination node's green mask.
    node_arrays = [
        _node_time_arrays(route, spat, s + k, t_axis, teleport)
        for k in range(horizon + 1)
    ]
    steps = []
    for k in range(horizon):
        m = s + k
        v_dest = v_axes[k + 1]
        _, dep_ok, t_dep, wait = node_arrays[k]
        arr_green = node_arrays[k + 1][0]
        steps.append(StepPlan(
            node=m,
            src_kind=int(kinds[m]),
            dest_kind=int(kinds[m + 1]),
            grade=float(route.grade[m]),
            v_src=v_axes[k],
            v0_dest=float(v_dest[0]),
            dv_dest=(float(v_dest[-1]) - float(v_dest[0])) / (grids.n_v - 1),
            arr_green=arr_green,
            dep_ok=dep_ok,
            t_dep=t_dep,
            wait=wait,
        ))

    # Terminal cost: optional route-to-go field plus the quadratic SoC
    # deviation penalty.  Admissibility at the end node needs no extra
    # masking: transitions already force stop-sign arrivals to standstill
    # and gate moving signal arrivals on a green time sample.
    j_inf = penalty.j_inf
    quad = penalty.soc_weight * (soc_axis - penalty.soc_target) ** 2
    if terminal_field is None:
        base = np.zeros((grids.n_v, grids.n_soc))
    else:
        base = np.asarray(terminal_field, dtype=np.float64)
        if base.shape != (grids.n_v, grids.n_soc):
            raise ValueError("terminal_field shape does not match the state grid")
    seed2d = np.where(base >= j_inf, j_inf,
                      np.minimum(base + quad[None, :], j_inf))
    terminal = np.ascontiguousarray(
        np.repeat(seed2d[:, :, None], grids.n_t, axis=2)
    )

    return SolveContext(
        vehicle=vehicle, route=route, s=s, horizon=horizon, t_start=t_start,
        gamma=gamma, teleport=teleport, grids=grids, penalty=penalty,
        soc_axis=soc_axis, t_axis=t_axis, te_axis=te_axis, tb_axis=tb_axis,
        v_axes=v_axes, steps=steps, terminal=terminal,
    )


# ---------------------------------------------------------------------------
# Backward recursion
# ---------------------------------------------------------------------------

_S1_DUMMY = None


def _stage1_dummy():
    """Zero-size placeholder tables for the serial kernel's table arguments."""
    global _S1_DUMMY
    if _S1_DUMMY is None:
        shp = (0, 0, 0)
        _S1_DUMMY = (
            np.zeros(shp, dtype=np.uint8),
            np.zeros(shp), np.zeros(shp), np.zeros(shp), np.zeros(shp),
            np.zeros(shp, dtype=np.int32), np.zeros(shp, dtype=np.int32),
            np.zeros(shp), np.zeros(shp, dtype=np.int32), np.zeros(shp),
        )
    return _S1_DUMMY


def backward_step(
    ctx: SolveContext,
    k: int,
    J_next: np.ndarray,
    *,
    backend: str = "serial",
    workers: int = 8,
    perturb_ties: bool = False,
):
    """One Bellman update from node s+k+1 back to node s+k.

    Returns (J, P): the cost-to-go and flat-action policy arrays on the
    source node's grid.
    """
    from .parallel import parallel_step

    plan: StepPlan = ctx.steps[k]
    g = ctx.grids
    J_out = np.full((g.n_v, g.n_soc, g.n_t), ctx.penalty.j_inf)
    P_out = np.full((g.n_v, g.n_soc, g.n_t), -1, dtype=np.int32)

    if backend == "serial":
        dummies = _stage1_dummy()
        K.dp_sweep_serial(
            ctx.pack, 0, *dummies,
            plan.v_src, ctx.te_axis, ctx.tb_axis,
            ctx.route.delta_d, plan.grade,
            ctx.route.accel_min, ctx.route.accel_max,
            plan.src_kind, plan.dest_kind, plan.v0_dest, plan.dv_dest,
            ctx.soc_axis, ctx.t_axis, float(ctx.t_axis[0]), g.dt,
            plan.arr_green, plan.dep_ok, plan.t_dep, plan.wait,
            ctx.gamma, ctx.penalty.j_inf,
            J_next, J_out, P_out,
        )
    elif backend == "parallel":
        parallel_step(ctx, plan, J_next, J_out, P_out,
                      workers=workers, perturb_ties=perturb_ties)
    else:
        raise ValueError(f"unknown backend: {backend!r}")
    return J_out, P_out


@dataclass
class SolveResult:
    """Tables and diagnostics of one horizon solve."""

    s: int
    horizon: int
    t_start: float
    backend: str
    cost_at_start: float
    tables: list                 # horizon+1 CostToGoTable (index 0 = start node)
    policies: list               # horizon PolicyTable
    wall_time_s: float

    @property
    def start_table(self) -> CostToGoTable:
        return self.tables[0]


def solve_horizon(
    ctx: SolveContext,
    x_start: Optional[StateVector] = None,
    *,
    backend: str = "serial",
    workers: int = 8,
    perturb_ties: bool = False,
) -> SolveResult:
    """Backward recursion over the whole horizon.

    When ``x_start`` is given, the interpolated cost at it is checked and a
    StartStateInfeasibleError raised if the start state has no feasible
    continuation on the grid.
    """
    g = ctx.grids
    j_inf = ctx.penalty.j_inf
    t_solve0 = time.perf_counter()

    J = ctx.terminal
    J_stack = [J]
    P_stack = []
    for k in range(ctx.horizon - 1, -1, -1):
        J, P = backward_step(ctx, k, J_stack[0], backend=backend,
                             workers=workers, perturb_ties=perturb_ties)
        J_stack.insert(0, J)
        P_stack.insert(0, P)
    wall = time.perf_counter() - t_solve0

    tables = [
        CostToGoTable(values=J_stack[k], v_axis=ctx.v_axes[k],
                      soc_axis=ctx.soc_axis, t_axis=ctx.t_axis, j_inf=j_inf)
        for k in range(ctx.horizon + 1)
    ]
    policies = [
        PolicyTable(values=P_stack[k], te_axis=ctx.te_axis, tb_axis=ctx.tb_axis)
        for k in range(ctx.horizon)
    ]

    cost0 = math.nan
    if x_start is not None:
        cost0 = tables[0].interpolate(x_start.v, x_start.soc, x_start.t)
        if cost0 >= j_inf:
            raise StartStateInfeasibleError(
                f"no feasible continuation from node {ctx.s} at "
                f"v={x_start.v:.2f} m/s, soc={x_start.soc:.3f}, t={x_start.t:.1f} s"
            )
    return SolveResult(
        s=ctx.s, horizon=ctx.horizon, t_start=ctx.t_start, backend=backend,
        cost_at_start=cost0, tables=tables, policies=policies,
        wall_time_s=wall,
    )


# ---------------------------------------------------------------------------
# Hand-built toy instances (exact-arithmetic transition tables)
# ---------------------------------------------------------------------------

@dataclass
class ToyInstance:
    """A small DP instance whose transitions are given as explicit tables.

    Used to cross-check both sweep backends against brute-force enumeration:
    transition quantities are chosen so that all arithmetic is exact in
    binary floating point.  The same tables drive the serial kernel (in
    table mode) and stage 2 of the parallel backend.
    """

    v_axis: np.ndarray
    soc_axis: np.ndarray
    t_axis: np.ndarray
    n_actions_eng: int
    n_actions_bsg: int
    horizon: int
    pack: object                 # battery parameters for SoC propagation
    src_kinds: Sequence[int]
    # per step: dict of arrays keyed ok/v2/dt/pbat/c1 with shape (nv, nte, ntb)
    stage1: list = dc_field(default_factory=list)
    arr_green: list = dc_field(default_factory=list)
    dep_ok: list = dc_field(default_factory=list)
    t_dep: list = dc_field(default_factory=list)
    wait: list = dc_field(default_factory=list)
    terminal: Optional[np.ndarray] = None
    gamma: float = 0.5
    j_inf: float = DEFAULT_J_INF

    def finalize_step(self, step_idx: int) -> dict:
        """Derive the grid-cell fields (destination speed cell, time shift)
        of a step's raw transition tables; returns the completed dict."""
        t = self.stage1[step_idx]
        nv = self.v_axis.shape[0]
        v0 = float(self.v_axis[0])
        dv = (float(self.v_axis[-1]) - v0) / (nv - 1)
        dtg = (float(self.t_axis[-1]) - float(self.t_axis[0])) / (self.t_axis.shape[0] - 1)
        shape = t["ok"].shape
        ivlo = np.zeros(shape, dtype=np.int32)
        ivhi = np.zeros(shape, dtype=np.int32)
        wv = np.zeros(shape)
        zoff = np.zeros(shape, dtype=np.int32)
        wz = np.zeros(shape)
        for idx in np.ndindex(shape):
            if not t["ok"][idx]:
                continue
            lo, hi, w, okv = K.locate_uniform(float(t["v2"][idx]), v0, dv, nv)
            if not okv:
                t["ok"][idx] = 0
                continue
            ivlo[idx], ivhi[idx], wv[idx] = lo, hi, w
            zo, wzz = K.tcell_shift(float(t["dt"][idx]), dtg)
            zoff[idx], wz[idx] = zo, wzz
        t.update(ivlo=ivlo, ivhi=ivhi, wv=wv, zoff=zoff, wz=wz)
        return t


def make_toy_pack(r0: float = 0.25, c_nom: float = 64.0, voc: float = 2.0):
    """Battery-only plant pack for toy instances (everything else inert)."""
    one = np.array([0.0, 1.0])
    flat = np.array([voc, voc])
    return K.PlantPack(
        mass=1.0, c0=0.0, c1=0.0, c2=0.0, wheel_radius=1.0, final_drive=1.0,
        gear_ratios=np.array([1.0]), gear_eff=np.array([1.0]),
        shift_v=np.array([1.0e30]), idle_speed=1.0, belt_ratio=1.0,
        eng_w=one, eng_tmin=np.array([-1.0e30, -1.0e30]),
        eng_tmax=np.array([1.0e30, 1.0e30]),
        fuel_w=one, fuel_t=one, fuel_vals=np.zeros((2, 2)),
        bsg_w=one, bsg_tmin=np.array([-1.0e30, -1.0e30]),
        bsg_tmax=np.array([1.0e30, 1.0e30]),
        bsgeff_w=one, bsgeff_t=one, bsgeff_vals=np.ones((2, 2)),
        r0=r0, c_nom=c_nom, voc_soc=one, voc_v=flat,
        soc_min=0.0, soc_max=1.0, p_bat_max=voc * voc / (4.0 * r0),
    )


def solve_toy(
    toy: ToyInstance,
    *,
    backend: str = "serial",
    workers: int = 4,
    perturb_ties: bool = False,
):
    """Backward recursion over a toy instance; returns (J stack, P stack)."""
    from .parallel import build_partition

    nv = toy.v_axis.shape[0]
    nx = toy.soc_axis.shape[0]
    nt = toy.t_axis.shape[0]
    t0 = float(toy.t_axis[0])
    dtg = (float(toy.t_axis[-1]) - t0) / (nt - 1)
    J = toy.terminal.copy()
    J_stack = [J]
    P_stack = []
    for k in range(toy.horizon - 1, -1, -1):
        t = toy.finalize_step(k)
        J_out = np.full((nv, nx, nt), toy.j_inf)
        P_out = np.full((nv, nx, nt), -1, dtype=np.int32)
        args_tables = (
            t["ok"].astype(np.uint8), t["v2"], t["dt"], t["pbat"], t["c1"],
            t["ivlo"], t["ivhi"], t["wv"], t["zoff"], t["wz"],
        )
        if backend == "serial":
            K.dp_sweep_serial(
                toy.pack, 1, *args_tables,
                toy.v_axis, np.zeros(toy.n_actions_eng), np.zeros(toy.n_actions_bsg),
                1.0, 0.0, -1.0e30, 1.0e30,
                int(toy.src_kinds[k]), 0, float(toy.v_axis[0]),
                (float(toy.v_axis[-1]) - float(toy.v_axis[0])) / (nv - 1),
                toy.soc_axis, toy.t_axis, t0, dtg,
                toy.arr_green[k], toy.dep_ok[k], toy.t_dep[k], toy.wait[k],
                toy.gamma, toy.j_inf,
                J_stack[0], J_out, P_out,
            )
        elif backend == "parallel":
            bounds = build_partition(nv, nx, nt, workers)
            K.dp_stage2_sweep(
                toy.pack, *args_tables,
                toy.v_axis, np.zeros(toy.n_actions_bsg),
                toy.soc_axis, toy.t_axis, t0, dtg,
                int(toy.src_kinds[k]),
                toy.arr_green[k], toy.dep_ok[k], toy.t_dep[k], toy.wait[k],
                toy.gamma, toy.j_inf, bounds, perturb_ties, 1,
                J_stack[0], J_out, P_out,
            )
        else:
            raise ValueError(f"unknown backend: {backend!r}")
        J_stack.insert(0, J_out)
        P_stack.insert(0, P_out)
    return J_stack, P_stack

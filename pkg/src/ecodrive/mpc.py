"""Receding-horizon eco-driving controller and closed-loop simulator.

An offline, signal-free sweep over the whole route produces a terminal cost
surface per node on the (speed, SoC) grid.  Online, each position solves a
short-horizon DP over (speed, SoC, time) seeded with that surface, picks the
action by direct argmin at the exact continuous state, and advances the
plant by one node.  Both solver backends yield identical tables, so the
applied action never depends on the backend.

The closed loop records one row per spatial step: states, torques, waiting
and moving time, fuel, and solver wall time.  Wall times are kept apart from
the physical columns so repeated runs produce byte-identical trajectories.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import _kernels as K
from .dp import (
    CostToGoTable,
    GridSpec,
    PenaltyConfig,
    SolveContext,
    build_context,
    solve_horizon,
)
from .errors import InfeasiblePowerError, StartStateInfeasibleError, ZeroMeanVelocityError
from .plant import (
    ActionVector,
    StateVector,
    Vehicle,
    propagate_state_full,
)
from .route import NODE_PLAIN, NODE_SIGNAL, NODE_STOP, Route, SpatSchedule


# ---------------------------------------------------------------------------
# Offline terminal cost field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TerminalCostField:
    """Cost-to-destination surface per route node on the (v, soc) grid.

    Built by a backward sweep that ignores signal timing (always green) but
    keeps stop-sign semantics; the destination node carries the quadratic
    SoC-deviation cost.  Values are finite or exactly ``j_inf``.
    """

    values: np.ndarray           # (node_count, n_v, n_soc)
    route_name: str
    gamma: float
    grids: GridSpec
    penalty: PenaltyConfig

    def node_slice(self, s: int) -> np.ndarray:
        return self.values[s]

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("terminal field values must be (nodes, n_v, n_soc)")
        if self.values.shape[1:] != (self.grids.n_v, self.grids.n_soc):
            raise ValueError("terminal field shape does not match the grid spec")
        if np.isnan(self.values).any():
            raise ValueError("terminal field contains NaN")


def field_value(field: TerminalCostField, vehicle: Vehicle, route: Route,
                s: int, v: float, soc: float) -> float:
    """Bilinear field value at node ``s``; absorbing ``j_inf`` corners."""
    g = field.grids
    v_axis = g.v_axis(route, s)
    x_axis = g.soc_axis(vehicle)
    nv, nx = g.n_v, g.n_soc
    v0 = float(v_axis[0])
    dv = (float(v_axis[-1]) - v0) / (nv - 1)
    x0 = float(x_axis[0])
    dx = (float(x_axis[-1]) - x0) / (nx - 1)
    ivlo, ivhi, wv, okv = K.locate_uniform(v, v0, dv, nv)
    jxlo, jxhi, wx, okx = K.locate_uniform(soc, x0, dx, nx)
    if not (okv and okx):
        return field.penalty.j_inf
    G = field.values[s]
    return float(K.bilin2_abs(
        G[ivlo, jxlo], G[ivlo, jxhi], G[ivhi, jxlo], G[ivhi, jxhi],
        wv, wx, field.penalty.j_inf,
    ))


def build_terminal_cost(
    route: Route,
    vehicle: Vehicle,
    *,
    gamma: float,
    grids: GridSpec,
    penalty: PenaltyConfig,
) -> TerminalCostField:
    """Backward (v, soc) sweep over all route nodes with signals held green.

    The sweep shares the transition primitives with the online solver, has
    no time state (waiting at lights never happens when they are green), and
    charges stop-sign dwell at the time price.  Traffic-light nodes behave
    like plain nodes as launch points but still admit stopping into them, so
    a later online solve that ends its horizon at a light keeps finite
    values for stopped states.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    pack = vehicle.pack()
    n = route.node_count
    nv, nx = grids.n_v, grids.n_soc
    soc_axis = grids.soc_axis(vehicle)
    te_axis = grids.te_axis()
    tb_axis = grids.tb_axis()
    kinds = route.node_kinds()
    j_inf = penalty.j_inf

    values = np.empty((n, nv, nx), dtype=np.float64)
    quad = np.minimum(
        penalty.soc_weight * (soc_axis - penalty.soc_target) ** 2, j_inf
    )
    values[n - 1] = np.broadcast_to(quad[None, :], (nv, nx))
    if kinds[n - 1] == NODE_STOP:
        v_end = grids.v_axis(route, n - 1)
        values[n - 1] = values[n - 1].copy()
        values[n - 1][v_end > 0.0, :] = j_inf

    for s in range(n - 2, -1, -1):
        v_src = grids.v_axis(route, s)
        v_dst = grids.v_axis(route, s + 1)
        src_kind = int(kinds[s])
        dest_kind = int(kinds[s + 1])
        # Always-green: a light is an ordinary launch point, but stopping
        # into one stays admissible (kind 2 would demand a stop instead).
        if src_kind == NODE_SIGNAL:
            src_kind = NODE_PLAIN
        G_out = np.full((nv, nx), j_inf)
        K.field_sweep(
            pack, v_src, te_axis, tb_axis,
            route.delta_d, float(route.grade[s]),
            route.accel_min, route.accel_max,
            src_kind, dest_kind,
            float(v_dst[0]), (float(v_dst[-1]) - float(v_dst[0])) / (nv - 1),
            soc_axis, route.stop_dwell, gamma, j_inf,
            values[s + 1], G_out,
        )
        values[s] = G_out

    return TerminalCostField(
        values=values, route_name=route.name, gamma=gamma,
        grids=grids, penalty=penalty,
    )


# ---------------------------------------------------------------------------
# One receding-horizon step
# ---------------------------------------------------------------------------

@dataclass
class ControlDecision:
    """Outcome of one controller query at (x, s)."""

    action: ActionVector
    brake_force: float = 0.0
    predicted_next: Optional[StateVector] = None
    cost_to_go: float = math.nan
    solver_wall_s: float = 0.0
    fallback: bool = False
    note: str = ""


@dataclass
class MpcStepInfo:
    """Diagnostics of one mpc_step call."""

    predicted_next: StateVector
    cost_to_go: float
    wait: float
    solve_wall_s: float
    horizon: int


def _argmin_at_state(
    ctx: SolveContext,
    J1: CostToGoTable,
    x: StateVector,
    spat: SpatSchedule,
):
    """Best gridded action from the exact continuous state.

    Mirrors the solver's transition semantics: torque box with the serial
    sweep's scan order and tie rule, hard acceleration box, stop/launch
    handling at the source node, green-gated moving arrivals at a signal
    destination, battery feasibility, and absorbing interpolation of the
    next-step table.  Returns None when no action is admissible.
    """
    route, plan = ctx.route, ctx.steps[0]
    pack = ctx.pack
    v, soc, t = float(x.v), float(x.soc), float(x.t)
    gamma = ctx.gamma
    j_inf = ctx.penalty.j_inf
    t0 = float(ctx.t_axis[0])
    nt = ctx.t_axis.shape[0]
    dtg = ctx.grids.dt

    wait = 0.0
    t_base = t
    if plan.src_kind == NODE_STOP:
        if v > 0.0:
            return None
        wait = route.stop_dwell
        t_base = t + wait
    elif plan.src_kind == NODE_SIGNAL and v == 0.0:
        timing = spat.timing(route.traffic_lights[plan.node])
        if not timing.is_green(t):
            if not ctx.teleport:
                return None          # standstill red departure disabled
            t_base = timing.next_green_from(t)
            wait = t_base - t

    te_lo, te_hi, tb_lo, tb_hi = K.torque_limits(pack, v)
    best = None
    for te in ctx.te_axis:
        te = float(te)
        if te > te_hi:
            break
        if te < te_lo:
            continue
        for tb in ctx.tb_axis:
            tb = float(tb)
            if tb > tb_hi:
                break
            if tb < tb_lo:
                continue
            feas, v2, clamped, _, dt_move, _, mf, p_bat = K.step_eval(
                pack, v, te, tb, route.delta_d, plan.grade,
                route.accel_min, route.accel_max, 0.0,
            )
            if feas != K.FEAS_OK:
                continue
            if clamped and plan.dest_kind == NODE_PLAIN:
                continue
            if plan.dest_kind == NODE_STOP and v2 > 0.0:
                continue
            cur, okb = K.battery_current(pack, p_bat, soc)
            if not okb:
                continue
            soc2 = soc - dt_move * cur / pack.c_nom
            t2 = t_base + dt_move
            if v2 > 0.0:
                # Moving arrival: the floor time sample at the destination
                # must be green-marked (always true off signal nodes).
                zlo, _, _, okt = K.locate_uniform(t2, t0, dtg, nt)
                if okt and plan.arr_green[zlo] == 0:
                    continue
            jn = J1.interpolate(v2, soc2, t2)
            if jn >= j_inf:
                continue
            f_val = (
                float(K.stage_cost_scalar(mf, dt_move, gamma))
                + (1.0 - gamma) * wait + jn
            )
            if best is None or f_val < best[0]:
                best = (f_val, te, tb, v2, soc2, t2, dt_move)
    if best is None:
        return None
    f_val, te, tb, v2, soc2, t2, dt_move = best
    return (
        ActionVector(t_eng=te, t_bsg=tb),
        StateVector(v=v2, soc=soc2, t=t2),
        f_val, wait, dt_move,
    )


def mpc_step(
    vehicle: Vehicle,
    route: Route,
    spat: SpatSchedule,
    x: StateVector,
    s: int,
    *,
    gamma: float,
    grids: GridSpec,
    penalty: PenaltyConfig,
    horizon: int,
    terminal: Optional[TerminalCostField] = None,
    backend: str = "serial",
    workers: int = 8,
    teleport: bool = True,
    perturb_ties: bool = False,
) -> tuple[ActionVector, MpcStepInfo]:
    """Solve the truncated horizon at node ``s`` and return the first action.

    The horizon shrinks near the destination.  The action is the argmin of
    stage cost plus interpolated next-step cost-to-go evaluated at the exact
    (off-grid) state, so it equals the solved policy's action at ``x`` and
    is identical for both backends.

    Raises
    ------
    StartStateInfeasibleError
        When no action at ``x`` has a feasible continuation; the caller is
        expected to fall back to maximum braking and retry next node.
    """
    n = route.node_count
    if not 0 <= s < n - 1:
        raise ValueError(f"start node {s} out of range for {n} route nodes")
    h = min(horizon, n - 1 - s)
    field_slice = None
    if terminal is not None:
        field_slice = terminal.node_slice(s + h)
    t0 = time.perf_counter()
    ctx = build_context(
        vehicle, route, spat, s, x.t,
        grids=grids, penalty=penalty, gamma=gamma, horizon=h,
        teleport=teleport, terminal_field=field_slice,
    )
    res = solve_horizon(ctx, None, backend=backend, workers=workers,
                        perturb_ties=perturb_ties)
    picked = _argmin_at_state(ctx, res.tables[1], x, spat)
    wall = time.perf_counter() - t0
    if picked is None:
        raise StartStateInfeasibleError(
            f"no admissible action from node {s} at v={x.v:.2f} m/s, "
            f"soc={x.soc:.3f}, t={x.t:.1f} s (teleport={'on' if teleport else 'off'})"
        )
    action, predicted, cost, wait, _ = picked
    return action, MpcStepInfo(
        predicted_next=predicted, cost_to_go=cost, wait=wait,
        solve_wall_s=wall, horizon=h,
    )


# ---------------------------------------------------------------------------
# Controller front-ends
# ---------------------------------------------------------------------------

class EcoDrivingMPC:
    """Receding-horizon controller with scikit-learn-style fit/control.

    Parameters are plain constructor arguments; :meth:`fit` binds a route
    and signal schedule and builds the offline terminal field.  After
    fitting, :meth:`control` maps (state, node) to a torque decision.
    """

    name = "mpc"

    def __init__(
        self,
        vehicle: Vehicle,
        *,
        gamma: float = 0.5,
        grids: Optional[GridSpec] = None,
        penalty: Optional[PenaltyConfig] = None,
        horizon: int = 20,
        backend: str = "serial",
        workers: int = 8,
        teleport: bool = True,
        use_terminal_field: bool = True,
        perturb_ties: bool = False,
    ):
        self.vehicle = vehicle
        self.gamma = gamma
        self.grids = grids if grids is not None else GridSpec()
        self.penalty = penalty if penalty is not None else PenaltyConfig()
        self.horizon = horizon
        self.backend = backend
        self.workers = workers
        self.teleport = teleport
        self.use_terminal_field = use_terminal_field
        self.perturb_ties = perturb_ties

    def fit(self, route: Route, spat: SpatSchedule) -> "EcoDrivingMPC":
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.route_ = route
        self.spat_ = spat
        self.terminal_field_ = (
            build_terminal_cost(
                route, self.vehicle, gamma=self.gamma,
                grids=self.grids, penalty=self.penalty,
            )
            if self.use_terminal_field else None
        )
        return self

    def control(self, x: StateVector, s: int) -> ControlDecision:
        self._check_fitted()
        action, info = mpc_step(
            self.vehicle, self.route_, self.spat_, x, s,
            gamma=self.gamma, grids=self.grids, penalty=self.penalty,
            horizon=self.horizon, terminal=self.terminal_field_,
            backend=self.backend, workers=self.workers,
            teleport=self.teleport, perturb_ties=self.perturb_ties,
        )
        return ControlDecision(
            action=action,
            predicted_next=info.predicted_next,
            cost_to_go=info.cost_to_go,
            solver_wall_s=info.solve_wall_s,
        )

    def _check_fitted(self):
        if not hasattr(self, "route_"):
            raise RuntimeError("controller is not fitted: call fit(route, spat) first")


# ---------------------------------------------------------------------------
# Closed loop
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryStep:
    """One spatial step of a closed-loop run (state taken at the source node)."""

    s: int
    v: float
    soc: float
    t: float
    t_eng: float
    t_bsg: float
    brake_force: float
    gear: int
    wait_s: float
    dt_move_s: float
    fuel_inc_g: float
    accel: float
    cost_to_go: float
    fallback: bool


@dataclass
class ClosedLoopTrajectory:
    """Step log plus final state and totals of one simulated run."""

    route_name: str
    controller: str
    backend: str
    delta_d: float
    x_start: StateVector
    steps: list = dc_field(default_factory=list)
    solver_wall_s: list = dc_field(default_factory=list)
    final_state: Optional[StateVector] = None
    status: str = "ok"

    @property
    def completed(self) -> bool:
        return self.status == "ok"

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def fuel_g(self) -> float:
        return float(sum(st.fuel_inc_g for st in self.steps))

    @property
    def travel_time_s(self) -> float:
        if self.final_state is None:
            return 0.0
        return float(self.final_state.t - self.x_start.t)

    @property
    def soc_end(self) -> float:
        if self.final_state is None:
            return float(self.x_start.soc)
        return float(self.final_state.soc)

    def distance_m(self, step_index: int) -> float:
        return self.steps[step_index].s * self.delta_d

    def timing_stats_ms(self) -> dict:
        if not self.solver_wall_s:
            return {"mean_ms": 0.0, "variance_ms2": 0.0, "max_ms": 0.0}
        arr = 1.0e3 * np.asarray(self.solver_wall_s)
        return {
            "mean_ms": float(arr.mean()),
            "variance_ms2": float(arr.var()),
            "max_ms": float(arr.max()),
        }


def _max_braking_decision(vehicle: Vehicle, route: Route, x: StateVector,
                          s: int, note: str) -> Optional[ControlDecision]:
    """Friction-only emergency stop: both shaft torques zero, so the
    tractive force vanishes exactly and the brake alone sets the
    deceleration.  From standstill there is no legal move, so None is
    returned and the caller terminates."""
    v = float(x.v)
    if v <= 0.0:
        return None
    dest_kind = route.node_kind(s + 1)
    if dest_kind == NODE_PLAIN:
        # A mid-step standstill is not representable at a plain node; aim
        # just short of a full stop at the next node instead.
        a_stop = -(v * v) / (2.0 * route.delta_d) * (1.0 - 1.0e-2)
        a_target = max(route.accel_min, a_stop)
    else:
        a_target = route.accel_min
    f_road = float(K.road_load(vehicle.pack(), v, float(route.grade[s])))
    brake = max(0.0, -(vehicle.params.mass * a_target + f_road))
    return ControlDecision(action=ActionVector(t_eng=0.0, t_bsg=0.0),
                           brake_force=brake, fallback=True, note=note)


def simulate_closed_loop(
    route: Route,
    spat: SpatSchedule,
    controller,
    x_start: Optional[StateVector] = None,
    *,
    backend_tag: Optional[str] = None,
) -> ClosedLoopTrajectory:
    """Drive the route node by node under a fitted controller.

    The plant transition is the same compiled arithmetic the solver uses,
    so a controller that reports a predicted next state must match the
    realized state exactly; a mismatch raises immediately.

    Infeasible controller states trigger one maximum-braking fallback step;
    if even that cannot move the vehicle legally, the run terminates with
    ``status = "infeasible: ..."`` and the trajectory prefix is kept.
    """
    vehicle: Vehicle = controller.vehicle
    teleport = getattr(controller, "teleport", True)
    if x_start is None:
        x_start = StateVector(v=0.0, soc=0.5, t=0.0)
    tag = backend_tag if backend_tag is not None else getattr(controller, "backend", "-")
    traj = ClosedLoopTrajectory(
        route_name=route.name,
        controller=getattr(controller, "name", type(controller).__name__),
        backend=tag,
        delta_d=route.delta_d,
        x_start=x_start,
    )
    if route.node_count == 1:
        traj.final_state = x_start
        return traj

    kinds = route.node_kinds()
    x = x_start
    for s in range(route.node_count - 1):
        try:
            dec: ControlDecision = controller.control(x, s)
        except StartStateInfeasibleError as exc:
            dec = _max_braking_decision(vehicle, route, x, s, str(exc))
            if dec is None:
                traj.status = f"infeasible: {exc}"
                break
        src_kind = int(kinds[s])
        signal = None
        if src_kind == NODE_SIGNAL:
            signal = spat.timing(route.traffic_lights[s])
        try:
            x_next, info = propagate_state_full(
                vehicle, x, dec.action, route.delta_d,
                grade=float(route.grade[s]),
                source_kind=src_kind,
                dest_kind=int(kinds[s + 1]),
                signal=signal,
                stop_dwell=route.stop_dwell,
                teleport=teleport,
                brake_force=dec.brake_force,
            )
        except (ZeroMeanVelocityError, InfeasiblePowerError, ValueError) as exc:
            traj.status = f"infeasible: {exc}"
            break
        if dec.predicted_next is not None:
            p = dec.predicted_next
            if not (p.v == x_next.v and p.soc == x_next.soc and p.t == x_next.t):
                raise RuntimeError(
                    "solver/plant transition mismatch at node "
                    f"{s}: predicted ({p.v!r}, {p.soc!r}, {p.t!r}) vs "
                    f"realized ({x_next.v!r}, {x_next.soc!r}, {x_next.t!r})"
                )
        traj.steps.append(TrajectoryStep(
            s=s, v=x.v, soc=x.soc, t=x.t,
            t_eng=dec.action.t_eng, t_bsg=dec.action.t_bsg,
            brake_force=dec.brake_force,
            gear=info.gear,
            wait_s=info.wait, dt_move_s=info.dt_move,
            fuel_inc_g=info.fuel_g, accel=info.accel,
            cost_to_go=dec.cost_to_go,
            fallback=dec.fallback,
        ))
        traj.solver_wall_s.append(dec.solver_wall_s)
        x = x_next
    traj.final_state = x
    return traj

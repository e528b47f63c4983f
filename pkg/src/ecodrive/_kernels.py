"""Compiled numeric core: scalar plant primitives and DP sweep kernels.

Everything here is numba-jitted without fastmath, so expression trees (and
therefore float results) are identical wherever a primitive is reused — the
Python-facing plant ops, the serial reference solver and the two-stage
data-parallel solver all call the same compiled functions.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit, prange

# Feasibility codes returned by the (v, u) step evaluation.
FEAS_OK = 0
FEAS_TORQUE = 1        # torque outside the speed-dependent bounds
FEAS_ACCEL = 2         # acceleration outside the comfort box
FEAS_NO_MOTION = 3     # zero mean velocity: the step cannot be crossed
FEAS_CLAMP_PLAIN = 4   # stop inside a step whose destination admits no stop
FEAS_MOVING_STOP = 5   # arriving with v > 0 at a stop-sign node
FEAS_BATTERY = 6       # power beyond the pack's deliverable maximum
FEAS_VHULL = 7         # next speed outside the destination speed bounds

GRAVITY = 9.81

# Packed, numba-friendly vehicle description (plain namedtuple of scalars and
# contiguous float64 arrays).
PlantPack = namedtuple(
    "PlantPack",
    [
        "mass",            # kg
        "c0", "c1", "c2",  # road-load coefficients (N, N/(m/s), N/(m/s)^2)
        "wheel_radius",    # m
        "final_drive",
        "gear_ratios",     # (G,)
        "gear_eff",        # (G,)
        "shift_v",         # (G-1,) upshift speeds (m/s)
        "idle_speed",      # rad/s
        "belt_ratio",      # BSG pulley ratio (omega_bsg / omega_eng)
        "eng_w", "eng_tmin", "eng_tmax",            # engine torque bounds vs speed
        "fuel_w", "fuel_t", "fuel_vals",            # fuel map (g/s), row-major (w, t)
        "bsg_w", "bsg_tmin", "bsg_tmax",            # BSG torque bounds vs shaft speed
        "bsgeff_w", "bsgeff_t", "bsgeff_vals",      # BSG efficiency map over (w, |T|)
        "r0",              # battery internal resistance (ohm)
        "c_nom",           # battery charge capacity (A*s)
        "voc_soc", "voc_v",                         # open-circuit voltage vs SoC
        "soc_min", "soc_max",
        "p_bat_max",       # max deliverable discharge power over the SoC range (W)
    ],
)


# ---------------------------------------------------------------------------
# Interpolation primitives
# ---------------------------------------------------------------------------

@njit(cache=True)
def interp1_clamped(x_axis, y, x):
    """Piecewise-linear interpolation with end clamping."""
    n = x_axis.shape[0]
    if x <= x_axis[0]:
        return y[0]
    if x >= x_axis[n - 1]:
        return y[n - 1]
    i = np.searchsorted(x_axis, x) - 1
    w = (x - x_axis[i]) / (x_axis[i + 1] - x_axis[i])
    return y[i] + w * (y[i + 1] - y[i])


@njit(cache=True)
def interp2_clamped(x_axis, y_axis, vals, x, y):
    """Bilinear interpolation over a row-major (x, y) grid, edge-clamped."""
    nx = x_axis.shape[0]
    ny = y_axis.shape[0]
    if x <= x_axis[0]:
        ix = 0
        wx = 0.0
    elif x >= x_axis[nx - 1]:
        ix = nx - 2
        wx = 1.0
    else:
        ix = np.searchsorted(x_axis, x) - 1
        wx = (x - x_axis[ix]) / (x_axis[ix + 1] - x_axis[ix])
    if y <= y_axis[0]:
        iy = 0
        wy = 0.0
    elif y >= y_axis[ny - 1]:
        iy = ny - 2
        wy = 1.0
    else:
        iy = np.searchsorted(y_axis, y) - 1
        wy = (y - y_axis[iy]) / (y_axis[iy + 1] - y_axis[iy])
    v00 = vals[ix, iy]
    v01 = vals[ix, iy + 1]
    v10 = vals[ix + 1, iy]
    v11 = vals[ix + 1, iy + 1]
    lo = v00 + wy * (v01 - v00)
    hi = v10 + wy * (v11 - v10)
    return lo + wx * (hi - lo)


# ---------------------------------------------------------------------------
# Plant primitives
# ---------------------------------------------------------------------------

@njit(cache=True)
def gear_index(shift_v, v):
    """Quasi-static gear selection: number of upshift thresholds below v."""
    g = 0
    for i in range(shift_v.shape[0]):
        if v > shift_v[i]:
            g = i + 1
    return g


@njit(cache=True)
def drivetrain_speeds(pack, v):
    """Return (gear, omega_eng, omega_bsg) for vehicle speed v.

    Engine speed is clamped at or above idle while the engine spins
    (launch-device slip is abstracted away).
    """
    g = gear_index(pack.shift_v, v)
    w_eng = v / pack.wheel_radius * pack.final_drive * pack.gear_ratios[g]
    if w_eng < pack.idle_speed:
        w_eng = pack.idle_speed
    w_bsg = w_eng * pack.belt_ratio
    return g, w_eng, w_bsg


@njit(cache=True)
def road_load(pack, v, grade):
    """Road-load force: rolling + speed terms + grade (N)."""
    return (
        pack.c0 * math.cos(grade)
        + pack.c1 * v
        + pack.c2 * v * v
        + pack.mass * GRAVITY * math.sin(grade)
    )


@njit(cache=True)
def tractive_force(pack, gear, t_eng, t_bsg):
    """Wheel force from crank torques through the selected gear (N).

    Driveline efficiency multiplies positive axle torque and divides
    negative (regeneration) torque.
    """
    crank = t_eng + t_bsg * pack.belt_ratio
    ratio = pack.gear_ratios[gear] * pack.final_drive
    eff = pack.gear_eff[gear]
    axle = crank * ratio
    if axle >= 0.0:
        return axle * eff / pack.wheel_radius
    return axle / eff / pack.wheel_radius


@njit(cache=True)
def fuel_rate(pack, w_eng, t_eng):
    """Fuel mass flow (g/s); exactly 0 with the engine off (T_eng <= 0)."""
    if t_eng <= 0.0:
        return 0.0
    return interp2_clamped(pack.fuel_w, pack.fuel_t, pack.fuel_vals, w_eng, t_eng)


@njit(cache=True)
def bsg_electrical_power(pack, w_bsg, t_bsg):
    """Battery-side electrical power of the BSG (W, discharge positive)."""
    if t_bsg == 0.0:
        return 0.0
    mech = t_bsg * w_bsg
    eff = interp2_clamped(
        pack.bsgeff_w, pack.bsgeff_t, pack.bsgeff_vals, w_bsg, abs(t_bsg)
    )
    if t_bsg > 0.0:
        return mech / eff
    return mech * eff


@njit(cache=True)
def battery_current(pack, p_bat, soc):
    """Terminal current from the zero-th order equivalent circuit.

    Returns (current, ok).  Discharge positive; ok is False when the demand
    exceeds the deliverable power V_oc^2 / (4 R0) at this SoC.
    """
    if p_bat == 0.0:
        return 0.0, True
    v_oc = interp1_clamped(pack.voc_soc, pack.voc_v, soc)
    disc = v_oc * v_oc - 4.0 * pack.r0 * p_bat
    if disc < 0.0:
        return 0.0, False
    return (v_oc - math.sqrt(disc)) / (2.0 * pack.r0), True


@njit(cache=True)
def torque_limits(pack, v):
    """Speed-dependent action box: (te_lo, te_hi, tb_lo, tb_hi)."""
    g, w_eng, w_bsg = drivetrain_speeds(pack, v)
    te_lo = interp1_clamped(pack.eng_w, pack.eng_tmin, w_eng)
    te_hi = interp1_clamped(pack.eng_w, pack.eng_tmax, w_eng)
    tb_lo = interp1_clamped(pack.bsg_w, pack.bsg_tmin, w_bsg)
    tb_hi = interp1_clamped(pack.bsg_w, pack.bsg_tmax, w_bsg)
    return te_lo, te_hi, tb_lo, tb_hi


@njit(cache=True)
def step_pre(pack, v, grade):
    """Speed-only part of a step evaluation, hoistable out of action loops.

    Returns (gear, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road).
    """
    g, w_eng, w_bsg = drivetrain_speeds(pack, v)
    te_lo = interp1_clamped(pack.eng_w, pack.eng_tmin, w_eng)
    te_hi = interp1_clamped(pack.eng_w, pack.eng_tmax, w_eng)
    tb_lo = interp1_clamped(pack.bsg_w, pack.bsg_tmin, w_bsg)
    tb_hi = interp1_clamped(pack.bsg_w, pack.bsg_tmax, w_bsg)
    f_road = road_load(pack, v, grade)
    return g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road


@njit(cache=True)
def step_eval_pre(
    pack, v, t_eng, t_bsg, delta_d, a_min, a_max, brake_force,
    g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road,
):
    """Action-dependent remainder of a step evaluation (see step_eval)."""
    if t_eng < te_lo or t_eng > te_hi:
        return FEAS_TORQUE, 0.0, False, 0.0, 0.0, 0.0, 0.0, 0.0
    if t_bsg < tb_lo or t_bsg > tb_hi:
        return FEAS_TORQUE, 0.0, False, 0.0, 0.0, 0.0, 0.0, 0.0

    f_tr = tractive_force(pack, g, t_eng, t_bsg)
    radicand = v * v + 2.0 * delta_d * (f_tr - f_road - brake_force) / pack.mass
    clamped = radicand < 0.0
    v_next = 0.0 if clamped else math.sqrt(radicand)
    v_bar = 0.5 * (v + v_next)
    if v_bar <= 0.0:
        return FEAS_NO_MOTION, v_next, clamped, 0.0, 0.0, 0.0, 0.0, 0.0
    accel = (v_next * v_next - v * v) / (2.0 * delta_d)
    if accel < a_min or accel > a_max:
        return FEAS_ACCEL, v_next, clamped, v_bar, 0.0, accel, 0.0, 0.0
    dt_move = delta_d / v_bar
    mf = fuel_rate(pack, w_eng, t_eng)
    p_bat = bsg_electrical_power(pack, w_bsg, t_bsg)
    if p_bat > pack.p_bat_max:
        return FEAS_BATTERY, v_next, clamped, v_bar, dt_move, accel, mf, p_bat
    return FEAS_OK, v_next, clamped, v_bar, dt_move, accel, mf, p_bat


@njit(cache=True)
def step_eval(pack, v, t_eng, t_bsg, delta_d, grade, a_min, a_max, brake_force):
    """Evaluate one spatial step from speed v under (t_eng, t_bsg).

    Pure (v, u) part of the transition: no SoC, no clock, no node kinds.

    Returns
    -------
    (feas, v_next, clamped, v_bar, dt_move, accel, mf, p_bat)
        feas is FEAS_OK, FEAS_TORQUE, FEAS_ACCEL or FEAS_NO_MOTION; the
        remaining fields are only meaningful when feasible.  clamped marks a
        stop inside the step (negative squared-speed radicand).
    """
    g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road = step_pre(pack, v, grade)
    return step_eval_pre(
        pack, v, t_eng, t_bsg, delta_d, a_min, a_max, brake_force,
        g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road,
    )


# ---------------------------------------------------------------------------
# Grid location and value interpolation
# ---------------------------------------------------------------------------

# Fractional weights closer than this to a node are snapped onto it, so that
# round-trip float error (a few ulp) cannot absorb a neighboring infeasible
# corner into an exactly-on-node query.
WEIGHT_SNAP = 1e-12


@njit(cache=True)
def locate_uniform(x, x0, dx, n):
    """Cell lookup on a uniform axis.

    Returns (lo, hi, w, ok): indices of the enclosing nodes (equal when the
    query sits on a node) and the fractional weight of ``hi``.  ok is False
    outside the axis hull.
    """
    f = (x - x0) / dx
    i = int(math.floor(f))
    w = f - i
    if w < WEIGHT_SNAP:
        w = 0.0
    elif w > 1.0 - WEIGHT_SNAP:
        i += 1
        w = 0.0
    if i < 0 or i > n - 1:
        return 0, 0, 0.0, False
    if w == 0.0:
        return i, i, 0.0, True
    if i == n - 1:
        return 0, 0, 0.0, False
    return i, i + 1, w, True


@njit(cache=True)
def tcell_shift(dt_move, dtg):
    """Constant time-cell shift of a move of duration dt_move on a ladder of
    spacing dtg: (zoff, wz) such that departing node z lands in cell
    (z + zoff, z + zoff + 1) with weight wz."""
    delta = dt_move / dtg
    zoff = int(math.floor(delta))
    wz = delta - zoff
    if wz < WEIGHT_SNAP:
        wz = 0.0
    elif wz > 1.0 - WEIGHT_SNAP:
        zoff += 1
        wz = 0.0
    return zoff, wz


@njit(cache=True)
def bilin2_abs(c00, c01, c10, c11, wv, wx, j_inf):
    """Bilinear blend with absorbing infeasibility.

    Corner layout: c[v][xi].  Any corner at or above j_inf makes the result
    j_inf (infeasibility is absorbing, never averaged).  Nesting order is
    pinned (v-blend innermost) so factored evaluations match bitwise.
    """
    if c00 >= j_inf or c01 >= j_inf or c10 >= j_inf or c11 >= j_inf:
        return j_inf
    lo = c00 + wv * (c10 - c00)
    hi = c01 + wv * (c11 - c01)
    return lo + wx * (hi - lo)


@njit(cache=True)
def interp3_abs(J, ivlo, ivhi, wv, jxlo, jxhi, wx, zlo, zhi, wz, j_inf):
    """Trilinear value lookup with absorbing infeasibility.

    Canonical nesting: bilinear over (v, xi) at both enclosing time nodes,
    then the time blend.  Degenerate (on-node) dimensions pass lo == hi.
    """
    b0 = bilin2_abs(
        J[ivlo, jxlo, zlo], J[ivlo, jxhi, zlo],
        J[ivhi, jxlo, zlo], J[ivhi, jxhi, zlo], wv, wx, j_inf,
    )
    if b0 >= j_inf:
        return j_inf
    if zhi == zlo:
        return b0
    b1 = bilin2_abs(
        J[ivlo, jxlo, zhi], J[ivlo, jxhi, zhi],
        J[ivhi, jxlo, zhi], J[ivhi, jxhi, zhi], wv, wx, j_inf,
    )
    if b1 >= j_inf:
        return j_inf
    return b0 + wz * (b1 - b0)


@njit(cache=True)
def stage_cost_scalar(mf, dt_step, gamma):
    """Running cost of one step: (gamma*mdot_f + (1-gamma)) * dt."""
    return (gamma * mf + (1.0 - gamma)) * dt_step


# ---------------------------------------------------------------------------
# Shared one-step transition evaluation over (v, u)
# ---------------------------------------------------------------------------

@njit(cache=True)
def transition_tail(
    feas, v2, clamped, dt_move, mf, p_bat,
    dest_kind, v0d, dvd, nv, gamma, dtg,
):
    """Destination admissibility, speed cell, cost and time shift of a step
    whose (v, u) physics were already evaluated."""
    if feas != FEAS_OK:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0, 0.0
    if clamped and dest_kind == 0:            # NODE_PLAIN
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0, 0.0
    if dest_kind == 2 and v2 > 0.0:           # NODE_STOP needs standstill
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0, 0.0
    ivlo, ivhi, wv, okv = locate_uniform(v2, v0d, dvd, nv)
    if not okv:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0, 0.0
    c1 = stage_cost_scalar(mf, dt_move, gamma)
    zoff, wz = tcell_shift(dt_move, dtg)
    return True, v2, dt_move, p_bat, c1, mf, ivlo, ivhi, wv, zoff, wz


@njit(cache=True)
def transition_eval(
    pack, v, t_eng, t_bsg, delta_d, grade, a_min, a_max,
    dest_kind, v0d, dvd, nv, gamma, dtg,
):
    """Full (v, u) part of a spatial-step transition at one route step.

    Combines the plant step with destination-node admissibility (stop-only
    arrivals at stop signs, mid-step stops only into stopping nodes), the
    destination speed-hull cell and the constant time-cell shift.

    Returns (ok, v2, dt_move, p_bat, c1, mf, ivlo, ivhi, wv, zoff, wz).
    """
    feas, v2, clamped, v_bar, dt_move, accel, mf, p_bat = step_eval(
        pack, v, t_eng, t_bsg, delta_d, grade, a_min, a_max, 0.0
    )
    return transition_tail(
        feas, v2, clamped, dt_move, mf, p_bat,
        dest_kind, v0d, dvd, nv, gamma, dtg,
    )


# ---------------------------------------------------------------------------
# Serial reference sweep: 5 nested loops, models hoisted per loop level
# ---------------------------------------------------------------------------

@njit(cache=True)
def dp_sweep_serial(
    pack, use_tables,
    s1ok, s1v2, s1dt, s1pb, s1c1, s1ivlo, s1ivhi, s1wv, s1zoff, s1wz,
    v_src, te_axis, tb_axis, delta_d, grade, a_min, a_max,
    src_kind, dest_kind, v0d, dvd,
    xi_axis, t_axis, t0, dtg,
    arr_green, dep_ok, t_dep, wait_arr,
    gamma, j_inf,
    J_next, J_out, P_out,
):
    """One backward recursion step, single-threaded reference architecture.

    Loop nesting follows the reference design: speed, engine torque, BSG
    torque (powertrain evaluated here), SoC (battery evaluated here), time
    (teleport, feasibility and value update innermost).  Infeasible branches
    break or skip early, so wall time depends on the driving scenario.

    ``arr_green`` is the destination node's green mask on the time ladder
    (all ones when the destination is not a signal).  A transition that
    arrives still moving is admissible only if the floor sample of its
    arrival time is green-marked; arrivals braked to a standstill may land
    at any phase — stopping at the bar is how red waits begin.

    With ``use_tables`` the (v, u) transition quantities are read from the
    provided arrays instead of the plant — used by hand-built toy instances.
    """
    nv = v_src.shape[0]
    nte = te_axis.shape[0]
    ntb = tb_axis.shape[0]
    nx = xi_axis.shape[0]
    nt = t_axis.shape[0]
    x0 = xi_axis[0]
    dx = (xi_axis[nx - 1] - xi_axis[0]) / (nx - 1)

    for iv in range(nv):
        v = v_src[iv]
        if src_kind == 2 and v > 0.0:
            continue                      # moving states at a stop sign are inadmissible
        if use_tables == 0:
            te_lo, te_hi, tb_lo, tb_hi = torque_limits(pack, v)
        else:
            te_lo, te_hi, tb_lo, tb_hi = -1e30, 1e30, -1e30, 1e30
        for ite in range(nte):
            te = te_axis[ite]
            if te > te_hi:
                break                     # torque axis ascends: nothing further fits
            if te < te_lo:
                continue
            for itb in range(ntb):
                tb = tb_axis[itb]
                if tb > tb_hi:
                    break
                if tb < tb_lo:
                    continue
                if use_tables == 0:
                    ok, v2, dt_move, p_bat, c1, mf, ivlo, ivhi, wv, zoff, wz = (
                        transition_eval(
                            pack, v, te, tb, delta_d, grade, a_min, a_max,
                            dest_kind, v0d, dvd, nv, gamma, dtg,
                        )
                    )
                else:
                    ok = s1ok[iv, ite, itb] != 0
                    v2 = s1v2[iv, ite, itb]
                    dt_move = s1dt[iv, ite, itb]
                    p_bat = s1pb[iv, ite, itb]
                    c1 = s1c1[iv, ite, itb]
                    ivlo = s1ivlo[iv, ite, itb]
                    ivhi = s1ivhi[iv, ite, itb]
                    wv = s1wv[iv, ite, itb]
                    zoff = s1zoff[iv, ite, itb]
                    wz = s1wz[iv, ite, itb]
                if not ok:
                    continue
                gated = v2 > 0.0
                flat_u = ite * ntb + itb
                for jx in range(nx):
                    xi = xi_axis[jx]
                    cur, okb = battery_current(pack, p_bat, xi)
                    if not okb:
                        continue
                    xi2 = xi - dt_move * cur / pack.c_nom
                    jxlo, jxhi, wx, okx = locate_uniform(xi2, x0, dx, nx)
                    if not okx:
                        continue
                    for z in range(nt):
                        if v > 0.0:
                            # Moving sources never wait; their landing cell
                            # is the constant ladder shift.
                            w_hold = 0.0
                            zlo = z + zoff
                            zhi = zlo + (1 if wz > 0.0 else 0)
                            if zhi > nt - 1:
                                continue
                            if gated and arr_green[zlo] == 0:
                                continue
                            wzz = wz
                        else:
                            if dep_ok[z] == 0:
                                continue
                            w_hold = wait_arr[z]
                            if w_hold > 0.0:
                                t2 = t_dep[z] + dt_move
                                zlo, zhi, wzz, okt = locate_uniform(t2, t0, dtg, nt)
                                if not okt:
                                    continue
                            else:
                                zlo = z + zoff
                                zhi = zlo + (1 if wz > 0.0 else 0)
                                if zhi > nt - 1:
                                    continue
                                wzz = wz
                            if gated and arr_green[zlo] == 0:
                                continue
                        jn = interp3_abs(
                            J_next, ivlo, ivhi, wv, jxlo, jxhi, wx,
                            zlo, zhi, wzz, j_inf,
                        )
                        if jn >= j_inf:
                            continue
                        f_val = c1 + (1.0 - gamma) * w_hold + jn
                        if f_val < J_out[iv, jx, z]:
                            J_out[iv, jx, z] = f_val
                            P_out[iv, jx, z] = flat_u
    return 0


# ---------------------------------------------------------------------------
# Two-stage data-parallel sweep
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def dp_stage1_fill(
    pack, v_src, te_axis, tb_axis, delta_d, grade, a_min, a_max,
    dest_kind, v0d, dvd, gamma, dtg,
    s1ok, s1v2, s1dt, s1pb, s1c1, s1mf, s1ivlo, s1ivhi, s1wv, s1zoff, s1wz,
):
    """Stage 1: evaluate all (v, u) transition quantities in parallel.

    Work splits over source speeds; the speed-only plant quantities (shaft
    speeds, torque box, road load) are evaluated once per speed and shared
    by that speed's action block.  Outputs are pure per-cell writes, so the
    tables are independent of worker count and scheduling.
    """
    nv = v_src.shape[0]
    nte = te_axis.shape[0]
    ntb = tb_axis.shape[0]
    for iv in prange(nv):
        v = v_src[iv]
        g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road = step_pre(
            pack, v, grade
        )
        for ite in range(nte):
            te = te_axis[ite]
            for itb in range(ntb):
                feas, v2r, clamped, v_bar, dtr, accel, mfr, pbr = step_eval_pre(
                    pack, v, te, tb_axis[itb], delta_d, a_min, a_max, 0.0,
                    g, w_eng, w_bsg, te_lo, te_hi, tb_lo, tb_hi, f_road,
                )
                ok, v2, dt_move, p_bat, c1, mf, ivlo, ivhi, wv, zoff, wz = (
                    transition_tail(
                        feas, v2r, clamped, dtr, mfr, pbr,
                        dest_kind, v0d, dvd, nv, gamma, dtg,
                    )
                )
                s1ok[iv, ite, itb] = 1 if ok else 0
                s1v2[iv, ite, itb] = v2
                s1dt[iv, ite, itb] = dt_move
                s1pb[iv, ite, itb] = p_bat
                s1c1[iv, ite, itb] = c1
                s1mf[iv, ite, itb] = mf
                s1ivlo[iv, ite, itb] = ivlo
                s1ivhi[iv, ite, itb] = ivhi
                s1wv[iv, ite, itb] = wv
                s1zoff[iv, ite, itb] = zoff
                s1wz[iv, ite, itb] = wz
    return 0


@njit(cache=True, parallel=True)
def dp_stage2_sweep(
    pack,
    s1ok, s1v2, s1dt, s1pb, s1c1, s1ivlo, s1ivhi, s1wv, s1zoff, s1wz,
    v_src, tb_axis, xi_axis, t_axis, t0, dtg,
    src_kind, arr_green, dep_ok, t_dep, wait_arr,
    gamma, j_inf, bounds, reverse_ties, toy_mode,
    J_next, J_out, P_out,
):
    """Stage 2: per-state-node argmin over the memoized action set.

    Destination admissibility follows the serial sweep exactly: moving
    arrivals require a green-marked floor time sample at the destination
    (``arr_green``), arrivals braked to standstill are exempt.

    Workers own contiguous speed-slab ranges of the flattened (v, xi, t)
    grid (bounds are multiples of n_xi * n_t); every output cell is written
    by exactly one worker, so tables are bitwise independent of worker count.

    The action loop runs BSG-torque-major so the battery current (a function
    of speed, BSG torque and SoC only) is evaluated once per torque instead
    of once per action.  Cost ties between actions are broken explicitly by
    the lowest flat action index, which makes the policy independent of the
    visit order — and equal to the serial sweep's first-win rule.

    Value lookups into the next step reuse a speed-blended plane per action
    and a SoC-blended time column per (action, SoC node); both factorings
    evaluate exactly the canonical interpolation nesting.

    ``reverse_ties`` flips the tie rule to the highest flat index (debug
    aid: policies then differ from the serial sweep exactly at ties, which
    backend-diff harnesses must detect).
    """
    nv = v_src.shape[0]
    nte = s1ok.shape[1]
    ntb = s1ok.shape[2]
    nx = xi_axis.shape[0]
    nt = t_axis.shape[0]
    x0 = xi_axis[0]
    dx = (xi_axis[nx - 1] - xi_axis[0]) / (nx - 1)
    n_workers = bounds.shape[0] - 1
    plane = nx * nt

    for w in prange(n_workers):
        jv = np.empty((nx, nt), dtype=np.float64)
        jcol = np.empty(nt, dtype=np.float64)
        cur_buf = np.empty(nx, dtype=np.float64)
        cur_ok = np.empty(nx, dtype=np.uint8)
        iv_start = bounds[w] // plane
        iv_end = bounds[w + 1] // plane
        for iv in range(iv_start, iv_end):
            v = v_src[iv]
            if src_kind == 2 and v > 0.0:
                continue
            standstill = v == 0.0
            gear_, w_eng, w_bsg = drivetrain_speeds(pack, v)
            for itb in range(ntb):
                any_ok = False
                for ite in range(nte):
                    if s1ok[iv, ite, itb] != 0:
                        any_ok = True
                        break
                if not any_ok:
                    continue
                if toy_mode == 0:
                    # Battery current per SoC node, shared by this torque
                    # column (it does not depend on the engine torque).
                    p_bat = bsg_electrical_power(pack, w_bsg, tb_axis[itb])
                    for jx in range(nx):
                        cur, okb = battery_current(pack, p_bat, xi_axis[jx])
                        cur_buf[jx] = cur
                        cur_ok[jx] = 1 if okb else 0
                for ite in range(nte):
                    if s1ok[iv, ite, itb] == 0:
                        continue
                    if toy_mode != 0:
                        # Table-driven instances prescribe battery power per
                        # action; no torque-column sharing is assumed.
                        p_bat = s1pb[iv, ite, itb]
                        for jx in range(nx):
                            cur, okb = battery_current(pack, p_bat, xi_axis[jx])
                            cur_buf[jx] = cur
                            cur_ok[jx] = 1 if okb else 0
                    flat_u = ite * ntb + itb
                    dt_move = s1dt[iv, ite, itb]
                    c1 = s1c1[iv, ite, itb]
                    gated = s1v2[iv, ite, itb] > 0.0
                    ivlo = s1ivlo[iv, ite, itb]
                    ivhi = s1ivhi[iv, ite, itb]
                    wv = s1wv[iv, ite, itb]
                    zoff = s1zoff[iv, ite, itb]
                    wz = s1wz[iv, ite, itb]
                    dzh = 1 if wz > 0.0 else 0
                    z_lim = nt - zoff - dzh
                    if z_lim <= 0 and not standstill:
                        continue
                    # Speed-blended plane of the next-step table.
                    for jxp in range(nx):
                        for zp in range(nt):
                            a = J_next[ivlo, jxp, zp]
                            b = J_next[ivhi, jxp, zp]
                            if a >= j_inf or b >= j_inf:
                                jv[jxp, zp] = j_inf
                            else:
                                jv[jxp, zp] = a + wv * (b - a)
                    for jx in range(nx):
                        if cur_ok[jx] == 0:
                            continue
                        xi2 = xi_axis[jx] - dt_move * cur_buf[jx] / pack.c_nom
                        jxlo, jxhi, wx, okx = locate_uniform(xi2, x0, dx, nx)
                        if not okx:
                            continue
                        # SoC-blended time column for this (action, SoC node).
                        for zp in range(nt):
                            a = jv[jxlo, zp]
                            b = jv[jxhi, zp]
                            if a >= j_inf or b >= j_inf:
                                jcol[zp] = j_inf
                            else:
                                jcol[zp] = a + wx * (b - a)
                        j_row = J_out[iv, jx]
                        p_row = P_out[iv, jx]
                        if not standstill:
                            # Moving source states never wait; their landing
                            # cell is the constant ladder shift.
                            if dzh == 0:
                                for z in range(z_lim):
                                    if gated and arr_green[z + zoff] == 0:
                                        continue
                                    jn = jcol[z + zoff]
                                    if jn >= j_inf:
                                        continue
                                    f_val = c1 + jn
                                    j_cur = j_row[z]
                                    if f_val < j_cur:
                                        j_row[z] = f_val
                                        p_row[z] = flat_u
                                    elif f_val == j_cur:
                                        if (flat_u > p_row[z]) if reverse_ties else (flat_u < p_row[z]):
                                            p_row[z] = flat_u
                            else:
                                for z in range(z_lim):
                                    if gated and arr_green[z + zoff] == 0:
                                        continue
                                    b0 = jcol[z + zoff]
                                    if b0 >= j_inf:
                                        continue
                                    b1 = jcol[z + zoff + 1]
                                    if b1 >= j_inf:
                                        continue
                                    f_val = c1 + (b0 + wz * (b1 - b0))
                                    j_cur = j_row[z]
                                    if f_val < j_cur:
                                        j_row[z] = f_val
                                        p_row[z] = flat_u
                                    elif f_val == j_cur:
                                        if (flat_u > p_row[z]) if reverse_ties else (flat_u < p_row[z]):
                                            p_row[z] = flat_u
                        else:
                            for z in range(nt):
                                if dep_ok[z] == 0:
                                    continue
                                if wait_arr[z] > 0.0:
                                    t2 = t_dep[z] + dt_move
                                    zlo, zhi, wzz, okt = locate_uniform(t2, t0, dtg, nt)
                                    if not okt:
                                        continue
                                else:
                                    zlo = z + zoff
                                    zhi = zlo + dzh
                                    if zhi > nt - 1:
                                        continue
                                    wzz = wz
                                if gated and arr_green[zlo] == 0:
                                    continue
                                b0 = jcol[zlo]
                                if b0 >= j_inf:
                                    continue
                                if zhi == zlo:
                                    jn = b0
                                else:
                                    b1 = jcol[zhi]
                                    if b1 >= j_inf:
                                        continue
                                    jn = b0 + wzz * (b1 - b0)
                                f_val = c1 + (1.0 - gamma) * wait_arr[z] + jn
                                j_cur = j_row[z]
                                if f_val < j_cur:
                                    j_row[z] = f_val
                                    p_row[z] = flat_u
                                elif f_val == j_cur:
                                    if (flat_u > p_row[z]) if reverse_ties else (flat_u < p_row[z]):
                                        p_row[z] = flat_u
    return 0


# ---------------------------------------------------------------------------
# Offline 2-state (v, xi) full-route sweep for the terminal-cost field
# ---------------------------------------------------------------------------

@njit(cache=True)
def field_sweep(
    pack, v_src, te_axis, tb_axis, delta_d, grade, a_min, a_max,
    src_kind, dest_kind, v0d, dvd,
    xi_axis, dwell, gamma, j_inf,
    G_next, G_out,
):
    """One backward step of the signal-free (v, xi) route DP.

    Signals are treated as always green (their node kind is passed as plain,
    with stopping still admissible into them); stop signs keep their full
    stop-and-dwell semantics, with the dwell charged at the time price.
    """
    nv = v_src.shape[0]
    nte = te_axis.shape[0]
    ntb = tb_axis.shape[0]
    nx = xi_axis.shape[0]
    x0 = xi_axis[0]
    dx = (xi_axis[nx - 1] - xi_axis[0]) / (nx - 1)

    for iv in range(nv):
        v = v_src[iv]
        if src_kind == 2 and v > 0.0:
            continue
        wait_cost = (1.0 - gamma) * dwell if (src_kind == 2 and v == 0.0) else 0.0
        te_lo, te_hi, tb_lo, tb_hi = torque_limits(pack, v)
        for ite in range(nte):
            te = te_axis[ite]
            if te > te_hi:
                break
            if te < te_lo:
                continue
            for itb in range(ntb):
                tb = tb_axis[itb]
                if tb > tb_hi:
                    break
                if tb < tb_lo:
                    continue
                ok, v2, dt_move, p_bat, c1, mf, ivlo, ivhi, wv, zoff, wz = (
                    transition_eval(
                        pack, v, te, tb, delta_d, grade, a_min, a_max,
                        dest_kind, v0d, dvd, nv, gamma, 1.0,
                    )
                )
                if not ok:
                    continue
                for jx in range(nx):
                    xi = xi_axis[jx]
                    cur, okb = battery_current(pack, p_bat, xi)
                    if not okb:
                        continue
                    xi2 = xi - dt_move * cur / pack.c_nom
                    jxlo, jxhi, wx, okx = locate_uniform(xi2, x0, dx, nx)
                    if not okx:
                        continue
                    gn = bilin2_abs(
                        G_next[ivlo, jxlo], G_next[ivlo, jxhi],
                        G_next[ivhi, jxlo], G_next[ivhi, jxhi], wv, wx, j_inf,
                    )
                    if gn >= j_inf:
                        continue
                    f_val = c1 + wait_cost + gn
                    if f_val < G_out[iv, jx]:
                        G_out[iv, jx] = f_val
    return 0

"""Brute-force enumeration oracle and generator for toy DP instances.

The oracle is an independent reimplementation of the toy-instance
transition semantics in plain Python: it enumerates every action sequence
from every start state by depth-first search and takes the minimum total
cost.  No solver code is called.  Toy instances are constructed so that
every admissible transition lands exactly on grid nodes in all three state
dimensions and every cost term is an exact binary float, so the oracle's
backward-accumulated sums reproduce the solver's arithmetic bit for bit
and the comparison tolerance can be zero.
"""

from __future__ import annotations

import math

import numpy as np

from ecodrive.dp import DEFAULT_J_INF, ToyInstance, make_toy_pack

# Toy pack constants (see make_toy_pack call in random_toy): chosen so the
# usable battery powers map to currents {-4, 0, +4} A and SoC moves in
# exact quarter-cell-free multiples of the 0.25 axis spacing.
_R0 = 0.25
_VOC = 2.0
_CNOM = 32.0
_PBAT_CHOICES = (-12.0, 0.0, 4.0)
_DTG = 2.0


def _current(p):
    """Quadratic battery inversion, mirrored from the model definition."""
    if p == 0.0:
        return 0.0, True
    disc = _VOC * _VOC - 4.0 * _R0 * p
    if disc < 0.0:
        return 0.0, False
    return (_VOC - math.sqrt(disc)) / (2.0 * _R0), True


def _node_index(x, x0, dx, n):
    """Exact node lookup; None when off the axis.  Raises if the query is
    not on a node — toys are built node-exact, anything else is a bug."""
    f = (x - x0) / dx
    i = math.floor(f)
    w = f - i
    if w > 1.0 - 1e-12:
        i += 1
        w = 0.0
    if not (w < 1e-12):
        raise AssertionError(f"toy transition off-node: {x!r} on ({x0}, {dx})")
    i = int(i)
    if i < 0 or i > n - 1:
        return None
    return i


def enumerate_costs(toy: ToyInstance) -> np.ndarray:
    """Minimum total cost over all action sequences, per start state.

    Returns an array shaped like the solver's start-node table with
    ``toy.j_inf`` where no sequence reaches a feasible terminal state.
    """
    nv = toy.v_axis.shape[0]
    nx = toy.soc_axis.shape[0]
    nt = toy.t_axis.shape[0]
    nte = toy.n_actions_eng
    ntb = toy.n_actions_bsg
    v0 = float(toy.v_axis[0])
    dv = (float(toy.v_axis[-1]) - v0) / (nv - 1)
    x0 = float(toy.soc_axis[0])
    dx = (float(toy.soc_axis[-1]) - x0) / (nx - 1)
    t0 = float(toy.t_axis[0])

    def tails(k, iv, jx, z):
        """All achievable sequence totals from state (iv, jx, z) at step k."""
        if k == toy.horizon:
            val = float(toy.terminal[iv, jx, z])
            return [] if val >= toy.j_inf else [val]
        v = float(toy.v_axis[iv])
        if int(toy.src_kinds[k]) == 2 and v > 0.0:
            return []                      # rolling through a stop sign
        t = toy.stage1[k]
        out = []
        for a1 in range(nte):
            for a2 in range(ntb):
                if not t["ok"][iv, a1, a2]:
                    continue
                v2 = float(t["v2"][iv, a1, a2])
                dt = float(t["dt"][iv, a1, a2])
                p = float(t["pbat"][iv, a1, a2])
                c1 = float(t["c1"][iv, a1, a2])
                cur, okb = _current(p)
                if not okb:
                    continue
                xi2 = float(toy.soc_axis[jx]) - dt * cur / _CNOM
                jx2 = _node_index(xi2, x0, dx, nx)
                if jx2 is None:
                    continue
                iv2 = _node_index(v2, v0, dv, nv)
                if iv2 is None:
                    continue
                if v > 0.0:
                    w_hold = 0.0
                    z2 = z + round(dt / _DTG)
                    if z2 > nt - 1:
                        continue
                else:
                    if not toy.dep_ok[k][z]:
                        continue
                    w_hold = float(toy.wait[k][z])
                    if w_hold > 0.0:
                        z2 = _node_index(float(toy.t_dep[k][z]) + dt, t0, _DTG, nt)
                        if z2 is None:
                            continue
                    else:
                        z2 = z + round(dt / _DTG)
                        if z2 > nt - 1:
                            continue
                if v2 > 0.0 and not toy.arr_green[k][z2]:
                    continue
                inc = c1 + (1.0 - toy.gamma) * w_hold
                for tv in tails(k + 1, iv2, jx2, z2):
                    out.append(inc + tv)
        return out

    J0 = np.full((nv, nx, nt), toy.j_inf)
    for iv in range(nv):
        for jx in range(nx):
            for z in range(nt):
                vals = tails(0, iv, jx, z)
                if vals:
                    J0[iv, jx, z] = min(vals)
    return J0


def random_toy(seed: int, *, horizon: int | None = None) -> ToyInstance:
    """Seeded random toy instance within the enumeration size budget
    (<= 5x4x6 states, <= 3x3 actions, <= 3 steps), exact-arithmetic by
    construction."""
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(2, 6))
    nx = int(rng.integers(2, 5))
    nt = int(rng.integers(3, 7))
    nte = int(rng.integers(1, 4))
    ntb = int(rng.integers(1, 4))
    if horizon is None:
        horizon = int(rng.integers(1, 4))

    v_axis = np.arange(nv, dtype=np.float64)
    soc_axis = 0.25 * np.arange(nx)
    t_axis = _DTG * np.arange(nt)

    src_kinds = []
    stage1 = []
    arr_green = []
    dep_ok = []
    t_dep = []
    wait = []
    for _ in range(horizon):
        kind = int(rng.choice([0, 1, 2], p=[0.55, 0.30, 0.15]))
        shape = (nv, nte, ntb)
        stage1.append({
            "ok": (rng.random(shape) < 0.85).astype(np.uint8),
            "v2": rng.integers(0, nv, size=shape).astype(np.float64),
            "dt": rng.choice([2.0, 4.0], size=shape),
            "pbat": rng.choice(np.asarray(_PBAT_CHOICES), size=shape),
            "c1": rng.integers(0, 16, size=shape) / 8.0,
        })
        arr_green.append((rng.random(nt) < 0.8).astype(np.uint8))
        if kind == 1:
            dep = (rng.random(nt) < 0.7).astype(np.uint8)
            w = np.zeros(nt)
            td = t_axis.copy()
            for z in range(nt):
                if dep[z] and rng.random() < 0.35:
                    jump = float(rng.choice([2.0, 4.0]))
                    w[z] = jump
                    td[z] = t_axis[z] + jump
        elif kind == 2:
            dep = np.ones(nt, dtype=np.uint8)
            w = np.full(nt, 2.0)
            td = t_axis + 2.0
        else:
            dep = np.ones(nt, dtype=np.uint8)
            w = np.zeros(nt)
            td = t_axis.copy()
        src_kinds.append(kind)
        dep_ok.append(dep)
        t_dep.append(td)
        wait.append(w)

    terminal = rng.integers(0, 12, size=(nv, nx, nt)) / 4.0
    blocked = rng.random((nv, nx, nt)) < 0.15
    terminal = np.where(blocked, DEFAULT_J_INF, terminal)

    return ToyInstance(
        v_axis=v_axis, soc_axis=soc_axis, t_axis=t_axis,
        n_actions_eng=nte, n_actions_bsg=ntb, horizon=horizon,
        pack=make_toy_pack(r0=_R0, c_nom=_CNOM, voc=_VOC),
        src_kinds=src_kinds, stage1=stage1,
        arr_green=arr_green, dep_ok=dep_ok, t_dep=t_dep, wait=wait,
        terminal=terminal, gamma=0.5, j_inf=DEFAULT_J_INF,
    )

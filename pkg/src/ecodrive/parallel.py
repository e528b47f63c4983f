"""Data-parallel backend: two-kernel decomposition of the backward step.

Stage 1 evaluates every (speed, action) transition of the current spatial
step as an independent work item and memoizes the results (the plant is
evaluated once per combination instead of once per state node).  Stage 2
performs the per-state-node minimization; state nodes are divided among
workers as contiguous slabs of the flattened (v, soc, t) grid, aligned to
whole speed planes, and each node's action loop runs serially in ascending
flat-action order.  Both facts together make the output tables bitwise
independent of the worker count — and bitwise equal to the serial backend,
because every floating-point expression is shared with it.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

_MAGIC = b"ECODPT01"


@dataclass
class Stage1Table:
    """Memoized per-(speed, action) transition quantities of one step.

    Arrays are indexed (iv, i_eng, i_bsg).  ``ok`` folds every state-free
    feasibility check: torque box, acceleration box, forward motion,
    destination admissibility, destination speed hull, battery power limit.
    """

    ok: np.ndarray               # u8
    v_next: np.ndarray           # f8: destination-node speed
    dt_move: np.ndarray          # f8: traversal time of the moving phase
    p_bat: np.ndarray            # f8: battery terminal power
    cost: np.ndarray             # f8: running cost of the moving phase
    fuel: np.ndarray             # f8: fuel rate (diagnostics)
    iv_lo: np.ndarray            # i4: destination speed cell
    iv_hi: np.ndarray            # i4
    w_v: np.ndarray              # f8
    z_off: np.ndarray            # i4: time-cell shift of dt_move on the ladder
    w_z: np.ndarray              # f8
    v_src: np.ndarray = None     # (n_v,) source speed axis

    @property
    def delta_v(self) -> np.ndarray:
        """Speed change of each feasible transition (0 where infeasible)."""
        dv = self.v_next - self.v_src[:, None, None]
        return np.where(self.ok.astype(bool), dv, 0.0)

    def n_feasible(self) -> int:
        return int(self.ok.sum())


@dataclass(frozen=True)
class WorkPartition:
    """Deterministic split of the flattened (v, soc, t) state grid.

    ``bounds`` has n_workers+1 entries; worker w owns the half-open range
    [bounds[w], bounds[w+1]).  Ranges are contiguous, disjoint, cover the
    grid exactly, are all non-empty, and are aligned to whole speed planes
    (multiples of n_soc * n_t) so no two workers share an output cell.
    """

    n_states: int
    n_workers: int
    bounds: np.ndarray

    def __post_init__(self):
        b = self.bounds
        if b.shape[0] != self.n_workers + 1:
            raise ValueError("partition bounds length mismatch")
        if b[0] != 0 or b[-1] != self.n_states:
            raise ValueError("partition does not cover the state grid")
        if np.any(np.diff(b) <= 0):
            raise ValueError("partition ranges must be non-empty and ordered")

    def ranges(self):
        return [(int(self.bounds[w]), int(self.bounds[w + 1]))
                for w in range(self.n_workers)]


def make_partition(n_v: int, n_soc: int, n_t: int, workers: int) -> WorkPartition:
    """Split speed planes into ``workers`` contiguous runs, near-evenly.

    The worker count is capped at n_v (a worker must own at least one whole
    speed plane to keep output ownership exclusive).
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    plane = n_soc * n_t
    w_eff = min(workers, n_v)
    edges = np.linspace(0, n_v, w_eff + 1)
    iv_edges = np.unique(np.rint(edges).astype(np.int64))
    bounds = iv_edges * plane
    return WorkPartition(n_states=n_v * plane, n_workers=len(bounds) - 1,
                         bounds=bounds)


def build_partition(n_v: int, n_soc: int, n_t: int, workers: int) -> np.ndarray:
    """Bounds array of make_partition (kernel-facing convenience)."""
    return make_partition(n_v, n_soc, n_t, workers).bounds


def stage1_evaluate(ctx, plan) -> Stage1Table:
    """Run the stage-1 kernel for one spatial step of a solve context."""
    g = ctx.grids
    shape = (g.n_v, g.n_t_eng, g.n_t_bsg)
    t = Stage1Table(
        ok=np.zeros(shape, dtype=np.uint8),
        v_next=np.zeros(shape), dt_move=np.zeros(shape), p_bat=np.zeros(shape),
        cost=np.zeros(shape), fuel=np.zeros(shape),
        iv_lo=np.zeros(shape, dtype=np.int32),
        iv_hi=np.zeros(shape, dtype=np.int32),
        w_v=np.zeros(shape),
        z_off=np.zeros(shape, dtype=np.int32), w_z=np.zeros(shape),
        v_src=plan.v_src,
    )
    K.dp_stage1_fill(
        ctx.pack, plan.v_src, ctx.te_axis, ctx.tb_axis,
        ctx.route.delta_d, plan.grade,
        ctx.route.accel_min, ctx.route.accel_max,
        plan.dest_kind, plan.v0_dest, plan.dv_dest,
        ctx.gamma, g.dt,
        t.ok, t.v_next, t.dt_move, t.p_bat, t.cost, t.fuel,
        t.iv_lo, t.iv_hi, t.w_v, t.z_off, t.w_z,
    )
    return t


def stage2_update(ctx, plan, table: Stage1Table, J_next, J_out, P_out,
                  *, workers: int = 8, perturb_ties: bool = False) -> None:
    """Run the stage-2 kernel: per-node argmin over the memoized actions."""
    g = ctx.grids
    bounds = build_partition(g.n_v, g.n_soc, g.n_t, workers)
    K.dp_stage2_sweep(
        ctx.pack,
        table.ok, table.v_next, table.dt_move, table.p_bat, table.cost,
        table.iv_lo, table.iv_hi, table.w_v, table.z_off, table.w_z,
        plan.v_src, ctx.tb_axis, ctx.soc_axis, ctx.t_axis,
        float(ctx.t_axis[0]), g.dt,
        plan.src_kind, plan.arr_green, plan.dep_ok, plan.t_dep, plan.wait,
        ctx.gamma, ctx.penalty.j_inf, bounds, perturb_ties, 0,
        J_next, J_out, P_out,
    )


def parallel_step(ctx, plan, J_next, J_out, P_out, *, workers: int = 8,
                  perturb_ties: bool = False) -> Stage1Table:
    """Full parallel backward step: stage 1 then stage 2."""
    table = stage1_evaluate(ctx, plan)
    stage2_update(ctx, plan, table, J_next, J_out, P_out,
                  workers=workers, perturb_ties=perturb_ties)
    return table


# ---------------------------------------------------------------------------
# Table digests and binary snapshots
# ---------------------------------------------------------------------------

def table_digest(arr: np.ndarray) -> str:
    """Short stable content digest of a table (values and shape)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(arr.dtype).encode())
    h.update(struct.pack("<%dq" % arr.ndim, *arr.shape))
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def solve_digests(result) -> list:
    """Per-step digests of a solve: [(step, J digest, P digest or '-')]."""
    out = []
    for k, tab in enumerate(result.tables):
        pd = table_digest(result.policies[k].values) if k < len(result.policies) else "-"
        out.append((k, table_digest(tab.values), pd))
    return out


def dump_tables(path: str, result) -> None:
    """Binary snapshot of a solve's tables.

    Layout (little-endian): 8-byte magic "ECODPT01"; u32 horizon; u32 grid
    dims n_v, n_soc, n_t; f8 t_start; then horizon+1 cost-to-go arrays (f8,
    C order) followed by horizon policy arrays (i4, C order).
    """
    g0 = result.tables[0].values
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", result.horizon, *g0.shape))
        fh.write(struct.pack("<d", result.t_start))
        for tab in result.tables:
            fh.write(np.ascontiguousarray(tab.values, dtype="<f8").tobytes())
        for pol in result.policies:
            fh.write(np.ascontiguousarray(pol.values, dtype="<i4").tobytes())


def load_tables(path: str):
    """Read back a dump_tables snapshot.

    Returns (horizon, t_start, [J arrays], [P arrays]).
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not a table snapshot: bad magic {magic!r}")
        horizon, n_v, n_soc, n_t = struct.unpack("<IIII", fh.read(16))
        (t_start,) = struct.unpack("<d", fh.read(8))
        count = n_v * n_soc * n_t
        J = []
        for _ in range(horizon + 1):
            buf = fh.read(count * 8)
            J.append(np.frombuffer(buf, dtype="<f8").reshape(n_v, n_soc, n_t).copy())
        P = []
        for _ in range(horizon):
            buf = fh.read(count * 4)
            P.append(np.frombuffer(buf, dtype="<i4").reshape(n_v, n_soc, n_t).copy())
    return horizon, t_start, J, P

"""Route description and signal-phase (SPaT) timing.

The road is discretized into N nodes spaced ``delta_d`` apart.  Per-node
features (speed limits, grade, traffic lights, stop signs) are stationary in
the node index; signal phase is the only time-varying quantity.  Green windows
are "effective green" — any yellow the driver may legally use is folded in.

Phase convention: local cycle time is ``(t - offset) mod cycle`` and the phase
is green iff that value falls in any half-open window ``[start, end)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import RouteFormatError, UnknownSignalError
from .validation import check_array_1d, check_key, check_scalar

GREEN = "green"
RED = "red"

# Node kind codes used by the solver kernels.
NODE_PLAIN = 0
NODE_SIGNAL = 1
NODE_STOP = 2


@dataclass(frozen=True)
class SignalTiming:
    """Fixed-time signal program for one intersection.

    Parameters
    ----------
    cycle : float
        Cycle length (s), > 0.
    offset : float
        Time at which cycle position zero occurs (s).
    green_windows : tuple of (float, float)
        Half-open green intervals ``[start, end)`` in cycle-local time,
        sorted, non-overlapping, inside ``[0, cycle]``.
    """

    cycle: float
    offset: float
    green_windows: tuple[tuple[float, float], ...]

    def __post_init__(self):
        check_scalar(self.cycle, "cycle", gt=0.0, err=RouteFormatError)
        check_scalar(self.offset, "offset", err=RouteFormatError)
        prev_end = 0.0
        for i, (a, b) in enumerate(self.green_windows):
            if not (0.0 <= a < b <= self.cycle):
                raise RouteFormatError(
                    f"green_windows[{i}]",
                    f"window [{a}, {b}) must satisfy 0 <= start < end <= cycle={self.cycle}",
                )
            if a < prev_end:
                raise RouteFormatError(
                    f"green_windows[{i}]", "windows must be sorted and non-overlapping"
                )
            prev_end = b

    def local_time(self, t: float) -> float:
        return float((t - self.offset) % self.cycle)

    def is_green(self, t: float) -> bool:
        tau = self.local_time(t)
        for a, b in self.green_windows:
            if a <= tau < b:
                return True
        return False

    def next_green_from(self, t: float) -> float:
        """Earliest time strictly after a red instant ``t`` at which green
        begins; raises if called while green."""
        if self.is_green(t):
            raise ValueError(f"next_green_from called during green at t={t}")
        tau = self.local_time(t)
        delta = min((a - tau) % self.cycle for a, _ in self.green_windows)
        return t + delta


@dataclass(frozen=True)
class SpatSchedule:
    """Signal-id → :class:`SignalTiming` map for a route."""

    signals: Mapping[str, SignalTiming]

    def timing(self, signal_id: str) -> SignalTiming:
        try:
            return self.signals[signal_id]
        except KeyError:
            raise UnknownSignalError(signal_id) from None


@dataclass(frozen=True)
class Route:
    """Spatially discretized route with stationary per-node features.

    Nodes are indexed ``0 .. node_count-1``; node ``s`` sits at distance
    ``s * delta_d`` from the origin, so the route spans ``(node_count-1) *
    delta_d`` metres over ``node_count - 1`` spatial steps.
    """

    delta_d: float                      # Node spacing (m)
    v_min: np.ndarray                   # Per-node lower speed bound (m/s)
    v_max: np.ndarray                   # Per-node upper speed bound / limit (m/s)
    grade: np.ndarray                   # Per-node road grade (rad)
    traffic_lights: Mapping[int, str]   # node index -> signal id
    stop_signs: tuple[int, ...]         # node indices with a mandatory stop
    accel_min: float                    # Comfort deceleration bound (m/s^2), < 0
    accel_max: float                    # Comfort acceleration bound (m/s^2), > 0
    stop_dwell: float = 2.0             # Standstill dwell at a stop sign (s)
    name: str = "route"

    def __post_init__(self):
        check_scalar(self.delta_d, "delta_d", gt=0.0, err=RouteFormatError)
        n = self.v_min.shape[0]
        if n < 1:
            raise RouteFormatError("node_count", f"route needs >= 1 node, got {n}")
        for attr in ("v_max", "grade"):
            if getattr(self, attr).shape[0] != n:
                raise RouteFormatError(attr, f"length must equal node_count={n}")
        if np.any(self.v_min < 0.0):
            bad = int(np.flatnonzero(self.v_min < 0.0)[0])
            raise RouteFormatError(f"v_min[{bad}]", "speed bounds must be >= 0")
        if np.any(self.v_min >= self.v_max):
            bad = int(np.flatnonzero(self.v_min >= self.v_max)[0])
            raise RouteFormatError(
                f"v_min[{bad}]",
                f"must be < v_max[{bad}] ({self.v_min[bad]} >= {self.v_max[bad]})",
            )
        check_scalar(self.accel_min, "accel_min", lt=0.0, err=RouteFormatError)
        check_scalar(self.accel_max, "accel_max", gt=0.0, err=RouteFormatError)
        check_scalar(self.stop_dwell, "stop_dwell", ge=0.0, err=RouteFormatError)
        for node in self.traffic_lights:
            if not 0 <= node < n:
                raise RouteFormatError(
                    "traffic_lights", f"node {node} outside [0, {n})"
                )
        for node in self.stop_signs:
            if not 0 <= node < n:
                raise RouteFormatError("stop_signs", f"node {node} outside [0, {n})")
            if node in self.traffic_lights:
                raise RouteFormatError(
                    "stop_signs", f"node {node} is also a traffic-light node"
                )
        # Stopping must be representable where the model may command a stop.
        for node in list(self.traffic_lights) + list(self.stop_signs):
            if self.v_min[node] != 0.0:
                raise RouteFormatError(
                    f"v_min[{node}]", "must be 0 at traffic-light and stop-sign nodes"
                )

    @property
    def node_count(self) -> int:
        return int(self.v_min.shape[0])

    @property
    def length(self) -> float:
        """Route length in metres (node_count - 1 spatial steps)."""
        return (self.node_count - 1) * self.delta_d

    def node_kind(self, s: int) -> int:
        if s in self.traffic_lights:
            return NODE_SIGNAL
        if s in self.stop_signs:
            return NODE_STOP
        return NODE_PLAIN

    def node_kinds(self) -> np.ndarray:
        """Per-node kind codes (0 plain, 1 signal, 2 stop sign)."""
        kinds = np.zeros(self.node_count, dtype=np.int8)
        for s in self.traffic_lights:
            kinds[s] = NODE_SIGNAL
        for s in self.stop_signs:
            kinds[s] = NODE_STOP
        return kinds


@dataclass(frozen=True)
class GreenIndicator:
    """Sampled green-phase indicator for one node.

    Element ``z`` (0-based) marks the phase at ``t_base + dt * (z + 1)``,
    i.e. the ladder runs ``z = 1 .. n`` in 1-based counting.  All-ones when
    the node carries no signal.
    """

    values: np.ndarray        # uint8 0/1, length n
    t_base: float             # Ladder anchor t_s (s)
    dt: float                 # Sample spacing (s)

    def __post_init__(self):
        if self.values.ndim != 1:
            raise ValueError("indicator values must be one-dimensional")
        if self.values.size == 0:
            raise ValueError("indicator must have at least one sample")
        if not np.all((self.values == 0) | (self.values == 1)):
            raise ValueError("indicator values must be 0 or 1")
        check_scalar(self.dt, "dt", gt=0.0)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def sample_times(self) -> np.ndarray:
        z = np.arange(1, len(self) + 1, dtype=np.float64)
        return self.t_base + self.dt * z


# ---------------------------------------------------------------------------
# Phase queries
# ---------------------------------------------------------------------------

def phase_at(spat: SpatSchedule, signal_id: str, t: float) -> str:
    """Return ``"green"`` or ``"red"`` for a signal at absolute time ``t``.

    Periodic with the signal's cycle; green windows are half-open, so the
    instant a window ends is already red.
    """
    return GREEN if spat.timing(signal_id).is_green(t) else RED


def next_green_start(spat: SpatSchedule, signal_id: str, t: float) -> float:
    """Earliest absolute time strictly after ``t`` at which green begins.

    Only meaningful while the phase at ``t`` is red; calling this during
    green raises ``ValueError``.
    """
    timing = spat.timing(signal_id)
    if timing.is_green(t):
        raise ValueError(
            f"next_green_start called while signal {signal_id!r} is green at t={t}"
        )
    return timing.next_green_from(t)


# ---------------------------------------------------------------------------
# Sampled feasibility ladder
# ---------------------------------------------------------------------------

def indicator_vector(
    route: Route,
    spat: SpatSchedule,
    k: int,
    t_s: float,
    dt: float,
    t_f: float,
) -> GreenIndicator:
    """Green indicator for node ``k`` sampled at ``t_s + dt*z``, z = 1..t_f/dt.

    Parameters
    ----------
    k : int
        Node index on the route.
    t_s : float
        Horizon entry time anchoring the ladder (s).
    dt, t_f : float
        Sample spacing and horizon span (s); ``t_f/dt`` must be integral.

    Returns
    -------
    GreenIndicator
        All-ones when node ``k`` carries no traffic light.
    """
    n = _ladder_size(dt, t_f)
    if not 0 <= k < route.node_count:
        raise RouteFormatError("k", f"node {k} outside [0, {route.node_count})")
    values = np.ones(n, dtype=np.uint8)
    signal_id = route.traffic_lights.get(k)
    if signal_id is not None:
        timing = spat.timing(signal_id)
        for j in range(n):
            values[j] = 1 if timing.is_green(t_s + dt * (j + 1)) else 0
    return GreenIndicator(values=values, t_base=t_s, dt=dt)


def feasible_time_set(indicator: GreenIndicator) -> np.ndarray:
    """Admissible crossing times: ladder samples whose indicator is 1.

    Empty when every sample is red; callers treat that as "no admissible
    crossing time within the horizon".
    """
    times = indicator.sample_times()
    return times[indicator.values == 1]


def _ladder_size(dt: float, t_f: float) -> int:
    check_scalar(dt, "dt", gt=0.0)
    check_scalar(t_f, "t_f", gt=0.0)
    n = t_f / dt
    n_int = int(round(n))
    if n_int < 1 or abs(n - n_int) > 1e-9:
        raise ValueError(f"t_f/dt must be a positive integer, got {t_f}/{dt}")
    return n_int


def export_indicator_csv(
    route: Route,
    spat: SpatSchedule,
    path: str | Path,
    t_s: float,
    dt: float,
    t_f: float,
    nodes: Sequence[int] | None = None,
) -> None:
    """Write sampled indicators for the given nodes (default: all signal
    nodes) to a CSV for debugging."""
    if nodes is None:
        nodes = sorted(route.traffic_lights)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "signal", "z", "time_s", "green"])
        for k in nodes:
            ind = indicator_vector(route, spat, k, t_s, dt, t_f)
            sid = route.traffic_lights.get(k, "")
            for j, t in enumerate(ind.sample_times()):
                writer.writerow([k, sid, j + 1, f"{t:.6f}", int(ind.values[j])])


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_route(source: str | Path | dict) -> tuple[Route, SpatSchedule]:
    """Load a route + SPaT document (one JSON object).

    Parameters
    ----------
    source : path or dict
        File path to a JSON document, or the parsed document itself.

    Returns
    -------
    (Route, SpatSchedule)

    Raises
    ------
    RouteFormatError
        On any schema or consistency violation, naming the offending field.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise RouteFormatError("<document>", f"invalid JSON: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise RouteFormatError("<document>", "top level must be a JSON object")

    n = int(check_key(doc, "node_count", "", RouteFormatError))  # type: ignore[arg-type]
    if n < 1:
        raise RouteFormatError("node_count", f"must be >= 1, got {n}")
    delta_d = float(check_key(doc, "delta_d_m", "", RouteFormatError))  # type: ignore[arg-type]

    v_min = _per_node(doc, "v_min_mps", n)
    v_max = _per_node(doc, "v_max_mps", n)
    grade = _per_node(doc, "grade_rad", n) if "grade_rad" in doc else np.zeros(n)

    lights: dict[int, str] = {}
    for i, entry in enumerate(doc.get("traffic_lights", [])):
        fieldname = f"traffic_lights[{i}]"
        if not isinstance(entry, dict) or "node" not in entry or "signal" not in entry:
            raise RouteFormatError(fieldname, "must be an object with node and signal")
        node = int(entry["node"])
        if node in lights:
            raise RouteFormatError(fieldname, f"duplicate traffic light at node {node}")
        lights[node] = str(entry["signal"])

    stop_signs = tuple(int(s) for s in doc.get("stop_signs", []))
    if len(set(stop_signs)) != len(stop_signs):
        raise RouteFormatError("stop_signs", "duplicate stop-sign node")

    signals: dict[str, SignalTiming] = {}
    for sid, sdoc in dict(doc.get("signals", {})).items():
        parent = f"signals[{sid}]."
        cycle = float(check_key(sdoc, "cycle_s", parent, RouteFormatError))  # type: ignore[arg-type]
        offset = float(sdoc.get("offset_s", 0.0))
        windows_raw = check_key(sdoc, "green_windows_s", parent, RouteFormatError)
        try:
            windows = tuple((float(a), float(b)) for a, b in windows_raw)  # type: ignore[union-attr]
        except (TypeError, ValueError):
            raise RouteFormatError(
                parent + "green_windows_s", "must be a list of [start, end] pairs"
            ) from None
        try:
            signals[sid] = SignalTiming(cycle=cycle, offset=offset, green_windows=windows)
        except RouteFormatError as exc:
            raise RouteFormatError(parent + exc.field, str(exc).split(": ", 1)[1]) from None

    for node, sid in lights.items():
        if sid not in signals:
            raise RouteFormatError(
                f"traffic_lights[node={node}].signal",
                f"unknown signal id {sid!r}",
            )

    route = Route(
        delta_d=delta_d,
        v_min=v_min,
        v_max=v_max,
        grade=grade,
        traffic_lights=lights,
        stop_signs=stop_signs,
        accel_min=float(check_key(doc, "accel_min_mps2", "", RouteFormatError)),  # type: ignore[arg-type]
        accel_max=float(check_key(doc, "accel_max_mps2", "", RouteFormatError)),  # type: ignore[arg-type]
        stop_dwell=float(doc.get("stop_dwell_s", 2.0)),
        name=str(doc.get("name", "route")),
    )
    return route, SpatSchedule(signals=signals)


def _per_node(doc: dict, key: str, n: int) -> np.ndarray:
    raw = doc[key] if key in doc else None
    if raw is None:
        raise RouteFormatError(key, "required field is missing")
    if isinstance(raw, (int, float)):
        return np.full(n, float(raw))
    return check_array_1d(raw, key, n=n, err=RouteFormatError)

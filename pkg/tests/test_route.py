"""Signal timing, green-indicator ladders, and route-document loading."""

import json

import numpy as np
import pytest

from ecodrive.errors import RouteFormatError, UnknownSignalError
from ecodrive.route import (
    GreenIndicator,
    Route,
    SignalTiming,
    SpatSchedule,
    export_indicator_csv,
    feasible_time_set,
    indicator_vector,
    load_route,
    next_green_start,
    phase_at,
)


def _timing(cycle=60.0, offset=0.0, windows=((0.0, 30.0),)) -> SignalTiming:
    return SignalTiming(cycle=cycle, offset=offset, green_windows=tuple(windows))


def _route(n=5, lights=None, stops=(), v_min=0.0, v_max=16.0) -> Route:
    return Route(
        delta_d=10.0,
        v_min=np.full(n, v_min),
        v_max=np.full(n, v_max),
        grade=np.zeros(n),
        traffic_lights=dict(lights or {}),
        stop_signs=tuple(stops),
        accel_min=-2.5,
        accel_max=2.5,
    )


# ---------------------------------------------------------------------------
# SignalTiming
# ---------------------------------------------------------------------------

def test_green_window_is_half_open():
    t = _timing()
    assert t.is_green(0.0)
    assert t.is_green(29.999)
    assert not t.is_green(30.0)   # window end is already red
    assert not t.is_green(59.9)
    assert t.is_green(60.0)       # wraps to cycle position 0


def test_offset_shifts_the_cycle():
    t = _timing(offset=10.0)
    assert not t.is_green(9.9)
    assert t.is_green(10.0)
    assert t.is_green(39.9)
    assert not t.is_green(40.0)
    # Negative absolute times are fine; phase is periodic either way.
    assert t.is_green(-50.0)      # local (−50 − 10) mod 60 = 0
    assert not t.is_green(-15.0)  # local 35


def test_multiple_windows():
    t = _timing(windows=((5.0, 15.0), (35.0, 50.0)))
    for tau, want in [(4.9, False), (5.0, True), (14.9, True), (15.0, False),
                      (34.9, False), (35.0, True), (49.9, True), (50.0, False)]:
        assert t.is_green(tau) is want, tau


def test_phase_is_cycle_periodic():
    t = _timing(cycle=70.0, offset=12.0, windows=((8.0, 30.0), (44.0, 62.0)))
    for tau in np.linspace(0.0, 140.0, 57):
        assert t.is_green(tau) == t.is_green(tau + 7 * 70.0)


def test_next_green_from_hits_window_start_exactly():
    t = _timing()               # green [0, 30) of 60
    assert t.next_green_from(40.0) == 60.0
    assert t.next_green_from(30.0) == 60.0   # red begins right at the window end
    t2 = _timing(windows=((20.0, 40.0),))
    assert t2.next_green_from(5.0) == 20.0


def test_next_green_from_lands_on_a_green_edge():
    t = _timing(cycle=80.0, offset=7.0, windows=((10.0, 26.0), (48.0, 66.0)))
    for tau in (0.0, 36.0, 75.0, 120.0):
        if t.is_green(tau):
            continue
        edge = t.next_green_from(tau)
        assert edge > tau
        assert t.is_green(edge)
        assert not t.is_green(edge - 1e-9)


def test_next_green_from_rejects_green_instants():
    t = _timing()
    with pytest.raises(ValueError):
        t.next_green_from(15.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(cycle=0.0),
        dict(cycle=-60.0),
        dict(windows=((30.0, 20.0),)),          # start >= end
        dict(windows=((-5.0, 10.0),)),          # negative start
        dict(windows=((0.0, 70.0),)),           # beyond cycle
        dict(windows=((0.0, 30.0), (20.0, 50.0))),  # overlapping
        dict(windows=((30.0, 40.0), (0.0, 10.0))),  # unsorted
    ],
)
def test_timing_validation_rejects_bad_programs(kwargs):
    with pytest.raises(RouteFormatError):
        _timing(**kwargs)


def test_schedule_lookup_and_unknown_id():
    spat = SpatSchedule(signals={"sig_a": _timing()})
    assert spat.timing("sig_a").cycle == 60.0
    with pytest.raises(UnknownSignalError):
        spat.timing("nope")


def test_phase_at_and_next_green_start_wrappers():
    spat = SpatSchedule(signals={"sig_a": _timing()})
    assert phase_at(spat, "sig_a", 10.0) == "green"
    assert phase_at(spat, "sig_a", 45.0) == "red"
    assert next_green_start(spat, "sig_a", 45.0) == 60.0
    with pytest.raises(ValueError):
        next_green_start(spat, "sig_a", 10.0)


# ---------------------------------------------------------------------------
# Route container
# ---------------------------------------------------------------------------

def test_node_kind_codes():
    r = _route(n=6, lights={2: "sig_a"}, stops=(4,))
    assert [r.node_kind(s) for s in range(6)] == [0, 0, 1, 0, 2, 0]
    assert np.array_equal(r.node_kinds(), np.array([0, 0, 1, 0, 2, 0], dtype=np.int8))
    assert r.node_count == 6
    assert r.length == 50.0


@pytest.mark.parametrize(
    "mutate",
    [
        dict(v_min=-1.0),                       # negative lower bound
        dict(v_min=16.0, v_max=16.0),           # v_min >= v_max
        dict(lights={9: "sig_a"}),              # light outside route
        dict(stops=(9,)),                       # stop outside route
        dict(lights={2: "sig_a"}, stops=(2,)),  # stop on a light node
    ],
)
def test_route_validation_rejects_bad_layouts(mutate):
    with pytest.raises(RouteFormatError):
        _route(n=5, **mutate)


def test_route_requires_stoppable_light_nodes():
    # v_min > 0 at a light node would make a commanded stop unrepresentable.
    with pytest.raises(RouteFormatError):
        Route(
            delta_d=10.0,
            v_min=np.array([0.0, 2.0, 0.0]),
            v_max=np.full(3, 16.0),
            grade=np.zeros(3),
            traffic_lights={1: "sig_a"},
            stop_signs=(),
            accel_min=-2.5,
            accel_max=2.5,
        )


def test_route_accel_bounds_signs():
    with pytest.raises(RouteFormatError):
        Route(
            delta_d=10.0,
            v_min=np.zeros(3),
            v_max=np.full(3, 16.0),
            grade=np.zeros(3),
            traffic_lights={},
            stop_signs=(),
            accel_min=1.0,   # must be < 0
            accel_max=2.5,
        )
    with pytest.raises(RouteFormatError):
        Route(
            delta_d=10.0,
            v_min=np.zeros(3),
            v_max=np.full(3, 16.0),
            grade=np.zeros(3),
            traffic_lights={},
            stop_signs=(),
            accel_min=-2.5,
            accel_max=0.0,   # must be > 0
        )


# ---------------------------------------------------------------------------
# Green-indicator ladder
# ---------------------------------------------------------------------------

def test_indicator_plain_node_is_all_ones():
    r = _route(n=5)
    spat = SpatSchedule(signals={})
    ind = indicator_vector(r, spat, 3, t_s=0.0, dt=2.0, t_f=80.0)
    assert len(ind) == 40
    assert np.all(ind.values == 1)


def test_indicator_ladder_starts_one_step_after_anchor():
    # Sample z (0-based) is the phase at t_s + dt*(z+1): the anchor instant
    # itself is not part of the ladder.
    r = _route(n=5, lights={2: "sig_a"})
    spat = SpatSchedule(signals={"sig_a": _timing()})
    ind = indicator_vector(r, spat, 2, t_s=28.0, dt=2.0, t_f=8.0)
    times = ind.sample_times()
    assert np.array_equal(times, np.array([30.0, 32.0, 34.0, 36.0]))
    assert np.array_equal(ind.values, np.array([0, 0, 0, 0], dtype=np.uint8))


def test_indicator_matches_phase_queries():
    r = _route(n=5, lights={2: "sig_a"})
    timing = _timing(cycle=70.0, offset=13.0, windows=((4.0, 30.0), (40.0, 58.0)))
    spat = SpatSchedule(signals={"sig_a": timing})
    ind = indicator_vector(r, spat, 2, t_s=11.0, dt=2.0, t_f=200.0)
    for z, t in enumerate(ind.sample_times()):
        assert bool(ind.values[z]) == timing.is_green(t)


def test_feasible_time_set_filters_red_samples():
    r = _route(n=5, lights={2: "sig_a"})
    spat = SpatSchedule(signals={"sig_a": _timing()})
    ind = indicator_vector(r, spat, 2, t_s=24.0, dt=2.0, t_f=12.0)
    # ladder 26,28,30,32,34,36 -> green only below 30
    assert np.array_equal(feasible_time_set(ind), np.array([26.0, 28.0]))


def test_feasible_time_set_can_be_empty():
    r = _route(n=5, lights={2: "sig_a"})
    spat = SpatSchedule(signals={"sig_a": _timing()})
    ind = indicator_vector(r, spat, 2, t_s=30.0, dt=2.0, t_f=20.0)
    assert feasible_time_set(ind).size == 0


def test_indicator_rejects_bad_ladder_parameters():
    r = _route(n=5)
    spat = SpatSchedule(signals={})
    with pytest.raises(ValueError):
        indicator_vector(r, spat, 0, t_s=0.0, dt=2.0, t_f=81.0)  # non-integral count
    with pytest.raises(ValueError):
        indicator_vector(r, spat, 0, t_s=0.0, dt=0.0, t_f=80.0)
    with pytest.raises(RouteFormatError):
        indicator_vector(r, spat, 9, t_s=0.0, dt=2.0, t_f=80.0)  # node off route


def test_indicator_value_validation():
    with pytest.raises(ValueError):
        GreenIndicator(values=np.array([0, 2], dtype=np.uint8), t_base=0.0, dt=2.0)
    with pytest.raises(ValueError):
        GreenIndicator(values=np.zeros((2, 2), dtype=np.uint8), t_base=0.0, dt=2.0)
    with pytest.raises(ValueError):
        GreenIndicator(values=np.zeros(0, dtype=np.uint8), t_base=0.0, dt=2.0)


def test_export_indicator_csv(tmp_path):
    r = _route(n=5, lights={2: "sig_a"})
    spat = SpatSchedule(signals={"sig_a": _timing()})
    path = tmp_path / "indicator.csv"
    export_indicator_csv(r, spat, path, t_s=24.0, dt=2.0, t_f=12.0)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "node,signal,z,time_s,green"
    assert len(lines) == 1 + 6
    assert lines[1] == "2,sig_a,1,26.000000,1"
    assert lines[3] == "2,sig_a,3,30.000000,0"


# ---------------------------------------------------------------------------
# Document loading
# ---------------------------------------------------------------------------

def _doc(**overrides) -> dict:
    doc = {
        "node_count": 6,
        "delta_d_m": 10.0,
        "v_min_mps": 0.0,
        "v_max_mps": 16.0,
        "accel_min_mps2": -2.5,
        "accel_max_mps2": 2.5,
        "traffic_lights": [{"node": 2, "signal": "sig_a"}],
        "stop_signs": [4],
        "signals": {
            "sig_a": {"cycle_s": 60.0, "offset_s": 10.0, "green_windows_s": [[0.0, 30.0]]}
        },
    }
    doc.update(overrides)
    return doc


def test_load_route_from_dict():
    route, spat = load_route(_doc())
    assert route.node_count == 6
    assert route.delta_d == 10.0
    assert np.array_equal(route.v_max, np.full(6, 16.0))   # scalar broadcast
    assert np.array_equal(route.grade, np.zeros(6))        # default grade
    assert route.traffic_lights == {2: "sig_a"}
    assert route.stop_signs == (4,)
    assert route.stop_dwell == 2.0                         # default dwell
    assert route.name == "route"
    timing = spat.timing("sig_a")
    assert timing.cycle == 60.0
    assert timing.offset == 10.0
    assert timing.green_windows == ((0.0, 30.0),)


def test_load_route_per_node_arrays_and_name():
    doc = _doc(
        v_max_mps=[16.0, 16.0, 14.0, 14.0, 16.0, 16.0],
        grade_rad=[0.0, 0.01, 0.02, 0.0, -0.01, 0.0],
        name="hill",
        stop_dwell_s=3.0,
    )
    route, _ = load_route(doc)
    assert route.v_max[2] == 14.0
    assert route.grade[4] == -0.01
    assert route.name == "hill"
    assert route.stop_dwell == 3.0


def test_load_route_from_file(tmp_path):
    path = tmp_path / "route.json"
    path.write_text(json.dumps(_doc()))
    route, spat = load_route(path)
    assert route.node_count == 6
    assert phase_at(spat, "sig_a", 12.0) == "green"


def test_load_route_rejects_invalid_json(tmp_path):
    path = tmp_path / "route.json"
    path.write_text("{not json")
    with pytest.raises(RouteFormatError):
        load_route(path)


@pytest.mark.parametrize(
    "doc",
    [
        [1, 2, 3],                                     # top level not an object
        _doc(node_count=0),
        {k: v for k, v in _doc().items() if k != "node_count"},
        {k: v for k, v in _doc().items() if k != "v_min_mps"},
        {k: v for k, v in _doc().items() if k != "accel_min_mps2"},
        _doc(v_max_mps=[16.0, 16.0]),                  # wrong array length
        _doc(traffic_lights=[{"node": 2}]),            # missing signal id
        _doc(traffic_lights=["sig_a"]),                # entry not an object
        _doc(traffic_lights=[{"node": 2, "signal": "sig_a"},
                             {"node": 2, "signal": "sig_a"}]),  # duplicate node
        _doc(stop_signs=[4, 4]),                       # duplicate stop
        _doc(signals={}),                              # light references unknown id
        _doc(signals={"sig_a": {"cycle_s": 60.0, "green_windows_s": "oops"}}),
        _doc(signals={"sig_a": {"cycle_s": 60.0, "green_windows_s": [[30.0, 10.0]]}}),
    ],
)
def test_load_route_rejects_malformed_documents(doc):
    with pytest.raises(RouteFormatError):
        load_route(doc)


def test_load_route_error_names_nested_signal_field():
    doc = _doc(signals={"sig_a": {"cycle_s": 60.0, "green_windows_s": [[30.0, 10.0]]}})
    with pytest.raises(RouteFormatError) as exc:
        load_route(doc)
    assert exc.value.field.startswith("signals[sig_a].")

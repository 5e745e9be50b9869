import json
import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from bridgesim.paths import (
    GridPath,
    PiecewiseConstantPath,
    WeightedPath,
    fmt,
    grid_path_from_json,
    grid_path_to_json,
    path_to_csv,
    piecewise_path_from_json,
    piecewise_path_to_json,
    weighted_path_envelope,
)


def make_step_path():
    return PiecewiseConstantPath(
        jump_times=np.array([0.25, 0.75]),
        states=np.array([5, 7, 6]),
        horizon=1.0,
    )


def test_piecewise_intervals_cover_horizon():
    p = make_step_path()
    assert list(p.intervals()) == [(0.0, 0.25, 5), (0.25, 0.75, 7), (0.75, 1.0, 6)]
    assert p.n_jumps == 2
    assert p.final_state == 6


def test_state_at_is_cadlag():
    p = make_step_path()
    assert p.state_at(0.0) == 5
    assert p.state_at(0.25) == 7  # right-continuous at the jump itself
    assert p.state_at(0.74) == 7
    assert p.state_at(1.0) == 6
    with pytest.raises(ValueError):
        p.state_at(1.5)


@pytest.mark.parametrize(
    "jumps,states,horizon",
    [
        ([0.5], [1], 1.0),            # one state too few
        ([0.5, 0.4], [1, 2, 3], 1.0),  # not increasing
        ([0.0], [1, 2], 1.0),          # jump at time zero
        ([1.0], [1, 2], 1.0),          # jump at the horizon
        ([0.5], [1, 2], 0.0),          # empty horizon
        ([0.5], [1, 2], math.inf),     # infinite horizon
    ],
)
def test_piecewise_rejects_malformed_input(jumps, states, horizon):
    with pytest.raises(ValueError):
        PiecewiseConstantPath(np.array(jumps), np.array(states), horizon)


def test_grid_path_promotes_flat_values():
    g = GridPath(
        times=np.array([0.0, 0.5, 1.0]),
        values=np.array([1.0, 2.0, 3.0]),
        innovations=np.array([0.1, -0.2]),
    )
    assert g.values.shape == (3, 1)
    assert g.innovations.shape == (2, 1)
    assert g.horizon == 1.0
    np.testing.assert_array_equal(g.final_state, [3.0])


def test_grid_path_rejects_malformed_input():
    t = np.array([0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        GridPath(t, np.zeros((2, 1)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        GridPath(t, np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        GridPath(np.array([0.0, 0.5, 0.5]), np.zeros((3, 1)), np.zeros((2, 1)))


def test_weighted_path_flags_nonfinite_weights():
    p = make_step_path()
    assert not WeightedPath(p, -1.5, 0.0, True).invalid
    assert WeightedPath(p, math.nan, 0.0, True).invalid
    assert WeightedPath(p, math.inf, 0.0, True).invalid
    # an explicit flag survives a finite weight
    assert WeightedPath(p, 0.0, 0.0, True, invalid=True).invalid


@given(st.floats(allow_nan=False, allow_infinity=False))
@example(0.1)
@example(math.pi)
@example(-0.0)
@example(5e-324)
def test_float_format_round_trips(x):
    """17 significant digits reproduce any double exactly."""
    assert float(fmt(x)) == x


def test_piecewise_csv_layout():
    p = PiecewiseConstantPath(np.array([0.5]), np.array([1, 2]), 1.0)
    assert path_to_csv(p) == "time,state\n0,1\n0.5,2\n1,2\n"


def test_grid_csv_layout():
    g = GridPath(
        times=np.array([0.0, 1.0]),
        values=np.array([[1.5, 2.5], [3.0, 4.0]]),
        innovations=np.array([[0.1, 0.2]]),
    )
    assert path_to_csv(g) == "time,x0,x1\n0,1.5,2.5\n1,3,4\n"


def test_piecewise_json_round_trip():
    p = make_step_path()
    q = piecewise_path_from_json(piecewise_path_to_json(p))
    np.testing.assert_array_equal(p.jump_times, q.jump_times)
    np.testing.assert_array_equal(p.states, q.states)
    assert p.horizon == q.horizon


def test_grid_json_round_trip_is_exact():
    g = GridPath(
        times=np.array([0.0, 0.1, 0.7]),
        values=np.array([[0.0], [1 / 3], [math.pi]]),
        innovations=np.array([[0.3], [-1.25]]),
    )
    h = grid_path_from_json(grid_path_to_json(g))
    np.testing.assert_array_equal(g.times, h.times)
    np.testing.assert_array_equal(g.values, h.values)
    np.testing.assert_array_equal(g.innovations, h.innovations)


def test_json_kind_mismatch_raises():
    p = PiecewiseConstantPath(np.array([]), np.array([0]), 1.0)
    with pytest.raises(ValueError):
        grid_path_from_json(piecewise_path_to_json(p))
    g = GridPath(np.array([0.0, 1.0]), np.zeros((2, 1)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        piecewise_path_from_json(grid_path_to_json(g))


def test_envelope_uses_wire_field_names():
    wp = WeightedPath(make_step_path(), -0.5, 2.0, True, seed=9)
    env = weighted_path_envelope(wp)
    assert set(env) == {"log_psi", "sup_V", "endpoint_hit", "seed", "invalid"}
    assert env["log_psi"] == -0.5
    assert env["sup_V"] == 2.0
    assert env["endpoint_hit"] is True
    assert env["seed"] == 9
    assert json.loads(json.dumps(env)) == env

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import los_by_sampling
from pitbot import terrain
from pitbot.terrain import TerrainError, TubeProfile


def make(stations, width=10.0):
    return TubeProfile.from_stations("t", stations, width)


def test_flat_preset_dimensions():
    p = terrain.preset("flat_tube")
    assert p.length == 1000.0
    assert terrain.floor_at(p, 500.0) == 0.0
    assert terrain.ceiling_at(p, 500.0) == 15.0
    assert p.width_m == 10.0


def test_pit_preset_depth_and_ramp():
    p = terrain.preset("mare_ingenii_pit")
    assert min(p.floor_z) == pytest.approx(-70.0)
    assert terrain.max_slope_between(p, 0.0, p.length) > terrain.WHEELED_SLOPE_LIMIT_DEG
    assert terrain.slope_at(p, 40.0) == pytest.approx(math.degrees(math.atan(70 / 40)))


def test_zigzag_has_blocked_pair_50m_apart():
    p = terrain.preset("zigzag_tube")
    found = False
    for s in np.arange(0.0, 900.0, 5.0):
        a = (s, terrain.floor_at(p, s) + 0.3)
        b = (s + 50, terrain.floor_at(p, s + 50) + 0.3)
        if not terrain.line_of_sight(p, a, b):
            assert los_by_sampling(p.stations(), a, b) < 0
            found = True
            break
    assert found


def test_unknown_preset_lists_valid_names():
    with pytest.raises(TerrainError) as err:
        terrain.preset("olympus")
    for name in terrain.PRESET_NAMES:
        assert name in str(err.value)


@pytest.mark.parametrize(
    "stations",
    [
        [[0, 0, 10]],
        [[1, 0, 10], [2, 0, 10]],
        [[0, 0, 10], [0, 0, 10]],
        [[0, 0, 10], [5, 3, 2]],
    ],
)
def test_malformed_profiles_rejected(stations):
    with pytest.raises(TerrainError):
        make(stations)


def test_nonpositive_width_rejected():
    with pytest.raises(TerrainError):
        make([[0, 0, 10], [10, 0, 10]], width=0.0)


def test_queries_outside_range_raise():
    p = make([[0, 0, 10], [10, 0, 10]])
    for s in (-0.1, 10.1, float("nan")):
        with pytest.raises(TerrainError):
            terrain.floor_at(p, s)


def test_interpolation_between_stations():
    p = make([[0, 0, 10], [10, 2, 12]])
    assert terrain.floor_at(p, 2.5) == pytest.approx(0.5)
    assert terrain.ceiling_at(p, 2.5) == pytest.approx(10.5)
    assert terrain.clearance_at(p, 7.0) == pytest.approx(10.0)


def test_los_blocked_by_ridge():
    p = make([[0, 0, 20], [10, 5, 20], [20, 0, 20]])
    assert not terrain.line_of_sight(p, (0, 0.5), (20, 0.5))
    assert terrain.line_of_sight(p, (0, 8.0), (20, 8.0))


def test_los_blocked_by_ceiling_dip():
    p = make([[0, 0, 10], [10, 0, 3], [20, 0, 10]])
    assert not terrain.line_of_sight(p, (0, 5), (20, 5))
    assert terrain.line_of_sight(p, (0, 1), (20, 1))


def test_los_endpoints_on_floor_allowed():
    p = make([[0, 0, 10], [20, 0, 10]])
    assert terrain.line_of_sight(p, (2, 0.0), (8, 3.0))
    # grazing along the floor is not a clear sightline
    assert not terrain.line_of_sight(p, (2, 0.0), (8, 0.0))


def test_los_outside_point_raises():
    p = make([[0, 0, 10], [20, 0, 10]])
    with pytest.raises(TerrainError):
        terrain.line_of_sight(p, (2, -1.0), (8, 3.0))


@st.composite
def profiles(draw):
    n = draw(st.integers(2, 7))
    gaps = draw(st.lists(st.floats(1.0, 20.0), min_size=n - 1, max_size=n - 1))
    s = np.concatenate(([0.0], np.cumsum(gaps)))
    floor = draw(st.lists(st.floats(-5.0, 5.0), min_size=n, max_size=n))
    clear = draw(st.lists(st.floats(1.0, 10.0), min_size=n, max_size=n))
    return [[float(a), float(b), float(b + c)] for a, b, c in zip(s, floor, clear)]


@settings(max_examples=150, deadline=None)
@given(profiles(), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_los_matches_fine_sampling(stations, u1, u2, f1, f2):
    p = make(stations)
    s1, s2 = u1 * p.length, u2 * p.length
    z1 = terrain.floor_at(p, s1) + f1 * terrain.clearance_at(p, s1)
    z2 = terrain.floor_at(p, s2) + f2 * terrain.clearance_at(p, s2)
    gap = los_by_sampling(stations, (s1, z1), (s2, z2))
    assume(abs(gap) > 1e-3)
    assert terrain.line_of_sight(p, (s1, z1), (s2, z2)) == (gap > 0)


@settings(max_examples=100, deadline=None)
@given(profiles(), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_los_symmetric(stations, u1, u2, f1, f2):
    p = make(stations)
    s1, s2 = u1 * p.length, u2 * p.length
    a = (s1, terrain.floor_at(p, s1) + f1 * terrain.clearance_at(p, s1))
    b = (s2, terrain.floor_at(p, s2) + f2 * terrain.clearance_at(p, s2))
    assert terrain.line_of_sight(p, a, b) == terrain.line_of_sight(p, b, a)


@settings(max_examples=100, deadline=None)
@given(profiles(), st.floats(0, 1))
def test_floor_below_ceiling_everywhere(stations, u):
    p = make(stations)
    s = u * p.length
    assert terrain.floor_at(p, s) < terrain.ceiling_at(p, s)
    assert terrain.inside(p, (s, terrain.floor_at(p, s)))

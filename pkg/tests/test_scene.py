import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from istn.scene import (EARTH_RADIUS, Building, BsConfig, ConfigurationError, SatelliteOrbit, TimeGrid, UERoute,
                        city_from_buildings, enu_to_ecef, generate_city, generate_routes, geodetic_to_ecef,
                        orbit_for_pass, place_base_stations, propagate_orbit, sample_route, sat_look_angles)

ORIGIN = (51.5115, -0.1022)


def test_segment_count_from_extent():
    city = generate_city(3, extent=(0.02, 0.05), segment_size=0.005)
    assert (city.n_rows, city.n_cols) == (4, 10)
    assert len(city.segments) == 40
    assert len(place_base_stations(city)) == 40


def test_zero_density_is_empty():
    city = generate_city(1, density=0.0)
    assert city.buildings == ()
    assert all(s.tallest is None for s in city.segments)


def test_city_is_deterministic():
    a = generate_city(7)
    b = generate_city(7)
    assert a.to_dict() == b.to_dict()
    assert generate_city(8).to_dict() != a.to_dict()


def test_buildings_do_not_overlap():
    boxes = generate_city(5, density=1.0).boxes
    x0, y0, x1, y1 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    ox = np.minimum(x1[:, None], x1[None]) - np.maximum(x0[:, None], x0[None])
    oy = np.minimum(y1[:, None], y1[None]) - np.maximum(y0[:, None], y0[None])
    overlap = (ox > 0) & (oy > 0)
    np.fill_diagonal(overlap, False)
    assert not overlap.any()


@pytest.mark.parametrize("kw", [{"extent": (0.0, 0.01)}, {"density": 1.5}, {"height_range": (50.0, 10.0)}])
def test_bad_city_config(kw):
    with pytest.raises(ConfigurationError):
        generate_city(1, **kw)


def test_site_on_roof_with_mast():
    city = city_from_buildings([Building(40.0, 40.0, 20.0, 20.0, 30.0)], ORIGIN, (0.005, 0.005), 0.005)
    (site,) = place_base_stations(city, BsConfig(mast_height=5.0))
    assert site.position == (50.0, 50.0, 35.0)


def test_tallest_tie_breaks_on_footprint_origin():
    blds = [Building(200.0, 10.0, 20.0, 20.0, 40.0), Building(100.0, 300.0, 20.0, 20.0, 40.0),
            Building(100.0, 50.0, 20.0, 20.0, 40.0), Building(10.0, 10.0, 20.0, 20.0, 12.0)]
    city = city_from_buildings(blds, ORIGIN, (0.005, 0.005), 0.005)
    assert city.segments[0].tallest == 2
    (site,) = place_base_stations(city)
    assert site.position[:2] == (110.0, 60.0)


def test_empty_segment_site_at_centre(caplog):
    city = city_from_buildings([], ORIGIN, (0.005, 0.005), 0.005)
    (site,) = place_base_stations(city, BsConfig(default_height=25.0, mast_height=5.0))
    assert site.position[:2] == pytest.approx(city.segments[0].center)
    assert site.position[2] == 30.0
    assert "no building" in caplog.text


def test_sites_inside_segments():
    city = generate_city(11, density=0.4)
    for seg, site in zip(city.segments, place_base_stations(city)):
        x0, y0, x1, y1 = seg.bounds
        assert x0 <= site.position[0] <= x1 and y0 <= site.position[1] <= y1


def test_period_500km():
    # oracle: 2*pi*sqrt(a^3/mu) evaluated by hand
    assert SatelliteOrbit(altitude=500e3).period == pytest.approx(5676.978, abs=1e-3)


def test_orbit_periodic():
    orb = SatelliteOrbit(inclination=53.0, raan=20.0, initial_anomaly=33.0)
    p0, p1 = propagate_orbit(orb, [0.0, orb.period])
    assert np.linalg.norm(p1 - p0) < 1e-6


def test_equatorial_orbit_stays_in_plane():
    z = propagate_orbit(SatelliteOrbit(inclination=0.0), np.linspace(0, 6000, 50))[:, 2]
    assert np.all(z == 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(200e3, 2000e3), st.floats(0, 180), st.floats(0, 360), st.floats(0, 360), st.floats(0, 1e5))
def test_orbit_radius_conserved(alt, inc, raan, nu, t):
    orb = SatelliteOrbit(altitude=alt, inclination=inc, raan=raan, initial_anomaly=nu)
    assert abs(np.linalg.norm(propagate_orbit(orb, t)) - (EARTH_RADIUS + alt)) < 1e-3


def test_pass_hits_requested_subpoint():
    orb = orbit_for_pass(50.0, 3.0, 12.0)
    p = propagate_orbit(orb, 12.0)
    lat = math.degrees(math.asin(p[2] / np.linalg.norm(p)))
    lon = math.degrees(math.atan2(p[1], p[0]))
    assert (lat, lon) == pytest.approx((50.0, 3.0), abs=1e-9)


def test_pass_unreachable_latitude():
    with pytest.raises(ConfigurationError):
        orbit_for_pass(60.0, 0.0, inclination=53.0)


def test_zenith_look_angles():
    sat = geodetic_to_ecef(*ORIGIN, 500e3)
    el, _, rng = sat_look_angles(sat, np.zeros(3), ORIGIN)
    assert el == pytest.approx(90.0, abs=1e-6)
    assert rng == pytest.approx(500e3, abs=1.0)


def test_offset_elevation():
    # sub-satellite point 500 km north along the great circle
    gamma = 500e3 / EARTH_RADIUS
    lat = ORIGIN[0] + math.degrees(gamma)
    sat = geodetic_to_ecef(lat, ORIGIN[1], 500e3)
    el, az, _ = sat_look_angles(sat, np.zeros(3), ORIGIN)
    oracle = math.degrees(math.atan2(math.cos(gamma) - EARTH_RADIUS / (EARTH_RADIUS + 500e3), math.sin(gamma)))
    assert el == pytest.approx(oracle, abs=1e-6)
    assert el == pytest.approx(41.638, abs=1e-3)
    assert az == pytest.approx(0.0, abs=1e-6)


def test_below_horizon_negative():
    sat = enu_to_ecef(np.array([0.0, 0.0, -1000.0]), ORIGIN)
    el, _, _ = sat_look_angles(sat, np.zeros(3), ORIGIN)
    assert el < 0


def test_route_midpoint():
    route = UERoute(np.array([0.0, 10.0]), np.array([[0, 0, 1.5], [10, 0, 1.5]], float))
    pos = sample_route(route, TimeGrid(1, 10.0))
    np.testing.assert_allclose(pos, [[5.0, 0.0, 1.5]])


def test_stationary_route():
    grid = TimeGrid(6)
    pos = sample_route(UERoute.stationary([3.0, 4.0, 1.5], grid), grid)
    assert np.all(pos == pos[0])


def test_collinear_uniform_speed():
    route = UERoute(np.array([0.0, 4.0, 8.0]), np.array([[0, 0, 1.5], [8, 0, 1.5], [16, 0, 1.5]], float))
    pos = sample_route(route, TimeGrid(8))
    np.testing.assert_allclose(pos[:, 0], 1.0 + 2.0 * np.arange(8))


def test_route_out_of_range():
    route = UERoute(np.array([0.0, 5.0]), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        sample_route(route, TimeGrid(10))


def test_route_times_increasing():
    with pytest.raises(ConfigurationError):
        UERoute(np.array([0.0, 0.0]), np.zeros((2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 40))
def test_generated_routes_continuous(seed, n_slots):
    city = generate_city(2)
    grid = TimeGrid(n_slots)
    for route in generate_routes(city, 3, grid, seed):
        pos = sample_route(route, grid)
        step = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        assert np.all(step <= route.max_speed * grid.slot_duration + 1e-9)


def test_scene_reproducible():
    grid = TimeGrid(10)
    a, b = (generate_routes(generate_city(4), 2, grid, 9) for _ in range(2))
    for ra, rb in zip(a, b):
        assert ra.to_json() == rb.to_json()

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from istn.antenna import UePattern
from istn.channel import (LOS, PENETRATION, REFLECTION, AntennaSet, ChannelOptions, Isotropic, NoiseModel, Ray,
                          Transmitter, channel_gain, cinr_from_powers, cinr_points, compute_channel_tensor,
                          equivalent_path_loss, fspl_db, noise_power, path_loss_points, segment_hits, trace_rays,
                          UeAntenna)
from istn.scene import (Building, BsConfig, ConfigurationError, SatelliteOrbit, TimeGrid, UERoute,
                        city_from_buildings, generate_city, place_base_stations)

ORIGIN = (51.5115, -0.1022)
EMPTY = city_from_buildings([], ORIGIN, (0.005, 0.005), 0.005)
ISO = Isotropic()
NO_REFL = ChannelOptions(reflections=False)


def _ray(loss, phase, kind=LOS, length=100.0):
    return Ray(kind, length, loss, phase, (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0))


def test_empty_city_rays():
    tx, rx = np.array([10.0, 10.0, 20.0]), np.array([110.0, 10.0, 1.5])
    rays = trace_rays(EMPTY, tx, rx)
    assert sorted(r.kind for r in rays) == [LOS, PENETRATION]
    d = np.linalg.norm(rx - tx)
    assert all(r.path_length == pytest.approx(d) for r in rays)
    pen = next(r for r in rays if r.kind == PENETRATION)
    assert pen.loss == pytest.approx(fspl_db(d) + 30.0)


def test_box_blocks_line_of_sight():
    city = city_from_buildings([Building(50.0, 0.0, 20.0, 40.0, 30.0)], ORIGIN, (0.005, 0.005), 0.005)
    rays = trace_rays(city, [10.0, 20.0, 5.0], [110.0, 20.0, 5.0], NO_REFL)
    assert [r.kind for r in rays] == [PENETRATION]


def test_single_wall_reflection():
    city = city_from_buildings([Building(100.0, 200.0, 20.0, 20.0, 50.0)], ORIGIN, (0.005, 0.005), 0.005)
    tx, rx = np.array([50.0, 150.0, 10.0]), np.array([50.0, 270.0, 10.0])
    refl = [r for r in trace_rays(city, tx, rx) if r.kind == REFLECTION]
    assert len(refl) == 1
    (r,) = refl
    # image of tx in the plane x = 100 sits at x = 150
    assert r.path_length == pytest.approx(math.hypot(100.0, 120.0))
    dep, arr = np.array(r.departure), np.array(r.arrival)
    assert dep[0] == pytest.approx(arr[0])  # equal angles to the wall normal
    assert dep[1] == pytest.approx(-arr[1])
    assert r.loss == pytest.approx(fspl_db(r.path_length) + 6.0)


def test_fspl_100m():
    assert fspl_db(100.0, 3.4e9) == pytest.approx(83.07736156, abs=1e-6)


def test_single_ray_path_loss():
    tx, rx = np.zeros(3), np.array([100.0, 0.0, 0.0])
    los = [r for r in trace_rays(EMPTY, tx, rx, NO_REFL) if r.kind == LOS]
    assert equivalent_path_loss(los, ISO, ISO) == pytest.approx(83.07736156, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(40, 200), st.floats(-10, 30), st.floats(-10, 30), st.floats(0, 2 * np.pi))
def test_single_ray_identity(loss, g_t, g_r, phase):
    pl = equivalent_path_loss([_ray(loss, phase)], Isotropic(g_t), Isotropic(g_r))
    assert pl == pytest.approx(loss - g_r - g_t, abs=1e-9)


def test_in_phase_pair():
    pl1 = equivalent_path_loss([_ray(90.0, 0.3)], ISO, ISO)
    pl2 = equivalent_path_loss([_ray(90.0, 0.3), _ray(90.0, 0.3, PENETRATION)], ISO, ISO)
    assert pl1 - pl2 == pytest.approx(20 * math.log10(2), abs=1e-9)


def test_anti_phase_pair_capped():
    pl = equivalent_path_loss([_ray(90.0, 0.0), _ray(90.0, math.pi, PENETRATION)], ISO, ISO, cap=250.0)
    assert pl == 250.0


def test_literal_mode_single_ray():
    assert equivalent_path_loss([_ray(90.0, 0.0)], ISO, ISO, mode="literal") == pytest.approx(90.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(60, 160), st.floats(0, 2 * np.pi)), min_size=1, max_size=6))
def test_coherent_sum_bounds(spec):
    rays = [_ray(loss, ph, length=100.0 + i) for i, (loss, ph) in enumerate(spec)]
    pl = equivalent_path_loss(rays, ISO, ISO)
    best = min(loss for loss, _ in spec)
    assert pl >= best - 10 * math.log10(len(rays) ** 2) - 1e-9
    assert pl <= 250.0


def test_channel_gain_values():
    assert channel_gain(0.0) == 1.0
    assert channel_gain(30.0) == pytest.approx(1e-3)
    assert channel_gain(83.08) == pytest.approx(10 ** -8.308, rel=1e-12)


def test_noise_power_defaults():
    # T_sys = 150 + 290 (10^0.12 - 1) = 242.29 K
    sigma2 = noise_power(NoiseModel(20e6, 1.2, 150.0))
    assert 10 * math.log10(sigma2) == pytest.approx(-131.745, abs=0.01)


def test_unity_noise_factor():
    assert noise_power(NoiseModel(20e6, 0.0, 290.0)) == pytest.approx(1.380649e-23 * 290 * 20e6, rel=1e-12)


def test_noise_linear_in_bandwidth():
    assert noise_power(NoiseModel(40e6)) == pytest.approx(2 * noise_power(NoiseModel(20e6)), rel=1e-15)


def test_no_ues_gives_empty_tensor():
    city = generate_city(1, extent=(0.005, 0.005))
    sites = place_base_stations(city)
    ch = compute_channel_tensor(city, sites, [SatelliteOrbit()], [], TimeGrid(3))
    assert ch.h.shape == (1, 0, 3) and ch.g.shape == (1, 0, 3)


def test_static_ue_constant_gain():
    city = generate_city(2, extent=(0.005, 0.005))
    sites = place_base_stations(city, n_slots=5)
    grid = TimeGrid(5)
    route = UERoute.stationary([30.0, 30.0, 1.5], grid)
    ch = compute_channel_tensor(city, sites, [], [route], grid)
    assert np.all(ch.h == ch.h[..., :1])
    assert ch.h.min() > 0


def test_tensor_deterministic():
    city = generate_city(3, extent=(0.005, 0.005))
    sites = place_base_stations(city, n_slots=2)
    grid = TimeGrid(2)
    route = UERoute(np.array([0.0, 2.0]), np.array([[20.0, 20.0, 1.5], [40.0, 20.0, 1.5]]))
    a = compute_channel_tensor(city, sites, [], [route], grid)
    b = compute_channel_tensor(city, sites, [], [route], grid)
    assert a.h.tobytes() == b.h.tobytes()


def test_background_length_mismatch():
    city = generate_city(3, extent=(0.005, 0.005))
    sites = place_base_stations(city, background_load=np.zeros((1, 4), int), n_slots=4)
    with pytest.raises(ConfigurationError):
        compute_channel_tensor(city, sites, [], [], TimeGrid(3))


def test_gain_decreases_with_distance():
    tx = Transmitter("tn", np.array([0.0, 0.0, 30.0]), ISO, 1.0, 0.0)
    pts = np.column_stack([np.linspace(10, 300, 60), np.zeros(60), np.full(60, 1.5)])
    pl = path_loss_points(EMPTY, tx, pts, ISO, NO_REFL)
    assert np.all(np.diff(pl) >= 0)


def test_vectorized_matches_tracer():
    city = generate_city(6, extent=(0.005, 0.005))
    tx = Transmitter("tn", np.array([120.0, 160.0, 45.0]), ISO, 1.0, 2.0)
    ue = UeAntenna(UePattern())
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0, 340, 50), rng.uniform(0, 550, 50), np.full(50, 1.5)])
    fast = path_loss_points(city, tx, pts, ue, NO_REFL)
    slow = [equivalent_path_loss(trace_rays(city, tx.position, p, NO_REFL, 2.0), ISO, ue) for p in pts]
    np.testing.assert_allclose(fast, slow, atol=1e-9)


def test_toy_cinr():
    # 1e-13 / (5e-14 + 6.69e-14) by hand
    out = cinr_from_powers(np.array([[1e-13]]), np.array([[5e-14]]), 6.69e-14, "tn")
    assert out[0] == pytest.approx(-0.6781, abs=1e-4)


def test_cinr_without_satellites_is_snr():
    out = cinr_from_powers(np.array([[2e-13], [1e-13]]), np.zeros((0, 1)), 1e-13, "tn")
    assert out[0] == pytest.approx(10 * math.log10(2.0))


def test_ntn_cinr_rises_as_bs_power_falls():
    sat = np.array([[1e-12]])
    vals = [cinr_from_powers(np.array([[p]]), sat, 1e-13, "ntn")[0] for p in (1e-11, 1e-12, 1e-14, 0.0)]
    assert np.all(np.diff(vals) > 0)


def test_cinr_permutation_invariant():
    city = generate_city(4, extent=(0.01, 0.005), segment_size=0.005)
    sites = place_base_stations(city)
    orbit = SatelliteOrbit(raan=0.0, initial_anomaly=51.0, inclination=90.0)
    pts = np.column_stack([np.linspace(10, 330, 40), np.linspace(10, 1000, 40), np.full(40, 1.5)])
    pats = AntennaSet()
    for side in ("tn", "ntn"):
        a = cinr_points(city, sites, [orbit], pts, 0.0, side, pats, NO_REFL)
        b = cinr_points(city, sites[::-1], [orbit], pts, 0.0, side, pats, NO_REFL)
        np.testing.assert_array_equal(a, b)


boxes_st = st.lists(st.tuples(st.floats(0, 90), st.floats(0, 90), st.floats(1, 10), st.floats(1, 10),
                              st.floats(1, 40)), min_size=1, max_size=6)
point_st = st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0, 50))


@settings(max_examples=100, deadline=None)
@given(boxes_st, point_st, point_st, st.integers(0, 5))
def test_removing_building_keeps_los(spec, p0, p1, drop):
    boxes = np.array([[x, y, x + w, y + d, h] for x, y, w, d, h in spec])
    keep = np.delete(boxes, drop % len(boxes), axis=0)
    if not segment_hits(p0, p1, boxes).any():
        assert not segment_hits(p0, p1, keep).any()

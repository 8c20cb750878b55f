"""Scenario configuration: defaults, JSON-schema validation and scene assembly."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .antenna import BsPattern, SatPattern, UePattern
from .channel import AntennaSet, BasicLoss, ChannelOptions, NoiseModel
from .sca import ScaConfig
from .scene import (BsConfig, CityMap, TimeGrid, UERoute, dbm_to_watts, dbw_to_watts, generate_city,
                    generate_routes, orbit_for_pass, place_base_stations)
from .sysmodel import CapacityProfile, PowerAllocation

DEFAULTS = {
    "seed": 1,
    "scene": {
        "origin": [51.5115, -0.1022],
        "extent": [0.015, 0.015],
        "segment_size": 0.005,
        "density": 0.6,
        "height_range": [10.0, 60.0],
        "lot_size": 50.0,
        "street_width": 12.0,
    },
    "time": {"n_slots": 60, "slot_duration": 1.0, "start_epoch": 0.0},
    "terrestrial": {
        "max_power_dbm": 42.0,
        "capacity": 20,
        "background_load": 2,
        "mast_height": 5.0,
        "default_height": 25.0,
        "sector_azimuth": 0.0,
        "downtilt": 6.0,
        "pattern": {"max_gain": 17.0, "az_3db": 65.0, "el_3db": 10.0, "a_max": 30.0, "sla_v": 30.0,
                    "n_sectors": 3},
    },
    "constellation": {
        "max_power_dbw": 16.0,
        "capacity": 80,
        "background_load": 8,
        "altitude": 500e3,
        "inclination": 53.0,
        # sub-satellite points at mid-window, about 300 km south and 700 km west
        "passes": [
            {"lat": 48.81, "lon": -0.1022, "t_ref": 30.0, "ascending": True},
            {"lat": 51.5115, "lon": -10.2, "t_ref": 30.0, "ascending": False},
        ],
        "pattern": {"max_gain": 30.0, "aperture_radius": 1.0, "floor": -60.0},
    },
    "ue": {
        "count": 4,
        "speed_range": [8.0, 14.0],
        "antenna_height": 1.5,
        "routes": None,
        "pattern": {"rows": 2, "cols": 2, "spacing": 0.5, "element_exponent": 2.0, "max_gain": 12.0,
                    "floor": -30.0},
    },
    "channel": {
        "frequency": 3.4e9,
        "bandwidth": 20e6,
        "noise_figure": 1.2,
        "antenna_temperature": 150.0,
        "l_b_tn": 2.0,
        "l_b_ntn": 3.0,
        "l_wall": 15.0,
        "wall_losses": {},
        "reflections": True,
        "reflection_loss": 6.0,
        "min_elevation": 10.0,
        "pl_mode": "amplitude",
        "pl_cap": 250.0,
    },
    "solver": {"outer_tol": 1e-4, "max_outer": 50, "inner_tol": 1e-7, "barrier_start": 1.0,
               "barrier_decrease": 0.2, "armijo": 1e-4, "shrink": 0.5, "rounding_threshold": 0.5},
    "greedy": {"min_gain": None},
    "experiment": {
        "sweep": {"side": "sat", "values": [14.0, 16.0, 18.0, 20.0]},
        "heatmap": {"slots": [0], "points_per_segment": 100, "height": 1.5, "reflections": False},
        "timeline": {"ue": 0},
    },
}


def schema() -> dict:
    return json.loads(resources.files("istn").joinpath("config_schema.json").read_text())


def reference_sweep_overrides() -> dict:
    """Overrides for the strong-satellite scenario used by the terrestrial power sweep."""
    return json.loads(resources.files("istn").joinpath("reference_sweep.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "wall_losses":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(user: dict | None = None, seed: int | None = None) -> dict:
    """Merge ``user`` over the defaults and validate.

    Raises ``jsonschema.ValidationError`` (the user document is checked before merging
    so unknown keys are caught too).
    """
    user = user or {}
    validator = jsonschema.Draft202012Validator(schema())
    validator.validate(user)
    cfg = _merge(DEFAULTS, user)
    if seed is not None:
        cfg["seed"] = int(seed)
    validator.validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# scenario assembly

@dataclass
class Scenario:
    city: CityMap
    sites: list
    orbits: list
    routes: list
    grid: TimeGrid
    patterns: AntennaSet
    options: ChannelOptions
    noise: NoiseModel
    capacity: CapacityProfile
    power: PowerAllocation
    solver: ScaConfig
    min_gain: float | None


def _load(value, n_nodes, n_slots):
    arr = np.asarray(value, dtype=int)
    if arr.ndim == 0:
        return np.full((n_nodes, n_slots), int(arr))
    if arr.ndim == 1:
        return np.broadcast_to(arr, (n_nodes, n_slots)).copy()
    return arr.reshape(n_nodes, n_slots)


def channel_options(ch: dict, reflections: bool | None = None) -> ChannelOptions:
    return ChannelOptions(
        frequency=ch["frequency"],
        losses=BasicLoss(ch["l_b_tn"], ch["l_b_ntn"], ch["l_wall"]),
        wall_losses=dict(ch["wall_losses"]),
        reflections=ch["reflections"] if reflections is None else reflections,
        reflection_loss=ch["reflection_loss"],
        min_elevation=ch["min_elevation"],
        pl_mode=ch["pl_mode"],
        pl_cap=ch["pl_cap"],
    )


def build_scenario(cfg: dict) -> Scenario:
    sc, tn, ntn, ue, ch = cfg["scene"], cfg["terrestrial"], cfg["constellation"], cfg["ue"], cfg["channel"]
    seed = cfg["seed"]
    grid = TimeGrid(**cfg["time"])
    city = generate_city(seed, tuple(sc["extent"]), sc["segment_size"], sc["density"], tuple(sc["height_range"]),
                         origin=tuple(sc["origin"]), lot_size=sc["lot_size"], street_width=sc["street_width"])
    n_bs = len(city.segments)
    bs_cfg = BsConfig(tn["max_power_dbm"], tn["capacity"], tn["mast_height"], tn["default_height"],
                      tn["sector_azimuth"], tn["downtilt"])
    sites = place_base_stations(city, bs_cfg, _load(tn["background_load"], n_bs, grid.n_slots), grid.n_slots)

    n_sat = len(ntn["passes"])
    sat_bg = _load(ntn["background_load"], n_sat, grid.n_slots)
    orbits = [orbit_for_pass(p["lat"], p["lon"], p.get("t_ref", 0.0), altitude=ntn["altitude"],
                             inclination=ntn["inclination"], ascending=p.get("ascending", True),
                             max_power=dbw_to_watts(ntn["max_power_dbw"]), capacity=ntn["capacity"],
                             background_load=sat_bg[i])
              for i, p in enumerate(ntn["passes"])]

    if ue["routes"] is not None:
        routes = [UERoute(np.asarray(r["times"], float),
                          np.column_stack([np.asarray(r["waypoints"], float)[:, :2],
                                           np.full(len(r["times"]), ue["antenna_height"])]),
                          ue["antenna_height"]) for r in ue["routes"]]
    else:
        routes = generate_routes(city, ue["count"], grid, seed + 1, lot_size=sc["lot_size"],
                                 speed_range=tuple(ue["speed_range"]), antenna_mount_height=ue["antenna_height"])

    wavelength = 299792458.0 / ch["frequency"]
    patterns = AntennaSet(sat=SatPattern(wavelength=wavelength, **ntn["pattern"]),
                          bs=BsPattern(**tn["pattern"]),
                          ue=UePattern(**ue["pattern"]))
    noise = NoiseModel(ch["bandwidth"], ch["noise_figure"], ch["antenna_temperature"])
    capacity = CapacityProfile(np.full(n_bs, tn["capacity"]), np.full(n_sat, ntn["capacity"]),
                               np.array([s.background_load for s in sites]).reshape(n_bs, -1),
                               sat_bg)
    power = PowerAllocation.uniform(np.full(n_bs, dbm_to_watts(tn["max_power_dbm"])), np.full(n_bs, tn["capacity"]),
                                    np.full(n_sat, dbw_to_watts(ntn["max_power_dbw"])), np.full(n_sat, ntn["capacity"]))
    solver = ScaConfig(**cfg["solver"])
    return Scenario(city, sites, orbits, routes, grid, patterns, channel_options(ch), noise, capacity, power,
                    solver, cfg["greedy"]["min_gain"])

"""Simulation world: box-building city, base-station sites, LEO orbits, UE routes.

All ground geometry lives in a local east-north-up (ENU) frame anchored at the
south-west corner of the city.  The Earth is a sphere; the ENU frame is the
tangent plane at the city origin.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

EARTH_RADIUS = 6378137.0  # m
MU_EARTH = 3.986004418e14  # m^3/s^2


class ConfigurationError(ValueError):
    """Raised for scene or scenario parameters that cannot describe a valid world."""


@dataclass(frozen=True)
class TimeGrid:
    n_slots: int = 60
    slot_duration: float = 1.0
    start_epoch: float = 0.0

    def __post_init__(self):
        if int(self.n_slots) < 1:
            raise ConfigurationError("n_slots must be >= 1")
        if not self.slot_duration > 0:
            raise ConfigurationError("slot_duration must be > 0")

    @property
    def midpoints(self) -> np.ndarray:
        return self.start_epoch + (np.arange(self.n_slots) + 0.5) * self.slot_duration

    @property
    def end(self) -> float:
        return self.start_epoch + self.n_slots * self.slot_duration


@dataclass(frozen=True)
class Building:
    x: float
    y: float
    w: float
    d: float
    h: float
    wall_class: str = "default"

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError(f"building height must be positive, got {self.h}")
        if not (self.w > 0 and self.d > 0):
            raise ConfigurationError("building footprint must have positive area")

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x + 0.5 * self.w, self.y + 0.5 * self.d)

    def to_dict(self) -> dict:
        out = {"x": self.x, "y": self.y, "w": self.w, "d": self.d, "h": self.h}
        if self.wall_class != "default":
            out["wall_class"] = self.wall_class
        return out


@dataclass(frozen=True)
class Segment:
    row: int
    col: int
    bounds: tuple[float, float, float, float]  # x0, y0, x1, y1 in metres
    buildings: tuple[int, ...]
    tallest: int | None

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bounds
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))


@dataclass(frozen=True)
class CityMap:
    origin: tuple[float, float]  # lat, lon of the south-west corner
    extent: tuple[float, float]  # dlat, dlon
    segment_size: tuple[float, float]
    buildings: tuple[Building, ...]
    segments: tuple[Segment, ...]
    n_rows: int
    n_cols: int

    @property
    def size_m(self) -> tuple[float, float]:
        """East and north size of the city in metres."""
        return degrees_to_metres(self.extent, self.origin[0])

    @property
    def segment_size_m(self) -> tuple[float, float]:
        return degrees_to_metres(self.segment_size, self.origin[0])

    @cached_property
    def boxes(self) -> np.ndarray:
        """Buildings as a (B, 5) array of xmin, ymin, xmax, ymax, height."""
        if not self.buildings:
            return np.zeros((0, 5))
        return np.array([[b.x, b.y, b.x + b.w, b.y + b.d, b.h] for b in self.buildings])

    @cached_property
    def faces(self) -> np.ndarray:
        """Vertical walls as rows of (axis, plane coord, outward sign, lo, hi, height, building).

        ``axis`` 0 is a wall in a plane x = const, 1 a wall in y = const; lo/hi
        span the other horizontal axis.
        """
        rows = []
        for i, (x0, y0, x1, y1, h) in enumerate(self.boxes):
            rows += [(0, x0, -1, y0, y1, h, i), (0, x1, 1, y0, y1, h, i),
                     (1, y0, -1, x0, x1, h, i), (1, y1, 1, x0, x1, h, i)]
        return np.array(rows, dtype=float).reshape(-1, 7)

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "extent": list(self.extent),
            "segment_size": list(self.segment_size),
            "buildings": [b.to_dict() for b in self.buildings],
        }


def degrees_to_metres(extent_deg, lat0: float) -> tuple[float, float]:
    """(dlat, dlon) in degrees -> (east, north) metres on the tangent plane."""
    dlat, dlon = extent_deg
    k = math.pi / 180.0 * EARTH_RADIUS
    return (dlon * k * math.cos(math.radians(lat0)), dlat * k)


def _grid_count(extent: float, seg: float) -> int:
    n = round(extent / seg)
    if n < 1 or abs(n * seg - extent) > 1e-9 * max(1.0, extent):
        raise ConfigurationError(f"segment size {seg} does not tile extent {extent}")
    return int(n)


def _segments(origin, extent, segment_size, buildings) -> tuple[tuple[Segment, ...], int, int]:
    n_rows = _grid_count(extent[0], segment_size[0])
    n_cols = _grid_count(extent[1], segment_size[1])
    seg_w, seg_d = degrees_to_metres(segment_size, origin[0])
    members: dict[tuple[int, int], list[int]] = {}
    for i, b in enumerate(buildings):
        cx, cy = b.centroid
        r = min(max(int(cy // seg_d), 0), n_rows - 1)
        c = min(max(int(cx // seg_w), 0), n_cols - 1)
        members.setdefault((r, c), []).append(i)
    segs = []
    for r in range(n_rows):
        for c in range(n_cols):
            idx = members.get((r, c), [])
            tallest = None
            if idx:
                # tallest first, then lexicographically smallest footprint origin
                tallest = min(idx, key=lambda i: (-buildings[i].h, buildings[i].x, buildings[i].y))
            bounds = (c * seg_w, r * seg_d, (c + 1) * seg_w, (r + 1) * seg_d)
            segs.append(Segment(r, c, bounds, tuple(idx), tallest))
    return tuple(segs), n_rows, n_cols


def city_from_buildings(buildings: Sequence[Building], origin=(51.5115, -0.1022),
                        extent=(0.015, 0.015), segment_size=(0.005, 0.005)) -> CityMap:
    """Assemble a CityMap around an explicit building list."""
    if np.isscalar(segment_size):
        segment_size = (float(segment_size), float(segment_size))
    if extent[0] <= 0 or extent[1] <= 0:
        raise ConfigurationError("city extent must have positive area")
    buildings = tuple(buildings)
    width, depth = degrees_to_metres(extent, origin[0])
    for b in buildings:
        if b.x < -1e-9 or b.y < -1e-9 or b.x + b.w > width + 1e-9 or b.y + b.d > depth + 1e-9:
            raise ConfigurationError(f"building {b} lies outside the city extent")
    segs, n_rows, n_cols = _segments(origin, extent, segment_size, buildings)
    return CityMap(tuple(origin), tuple(extent), tuple(segment_size), buildings, segs, n_rows, n_cols)


def lot_grid(segment_size_m: tuple[float, float], lot_size: float) -> tuple[int, int, float, float]:
    """Number of lots per segment along east/north and the resulting lot size."""
    nx = max(1, int(segment_size_m[0] // lot_size))
    ny = max(1, int(segment_size_m[1] // lot_size))
    return nx, ny, segment_size_m[0] / nx, segment_size_m[1] / ny


def generate_city(seed: int, extent=(0.015, 0.015), segment_size=0.005, density: float = 0.6,
                  height_range=(10.0, 60.0), *, origin=(51.5115, -0.1022), lot_size: float = 50.0,
                  street_width: float = 12.0) -> CityMap:
    """Synthesize a box city on a jittered lot grid.

    Each segment is cut into square-ish lots separated by streets; every lot holds
    a building with probability ``density``.  Footprints are jittered inside their
    lot so buildings never overlap and never straddle a segment border.
    """
    if not 0.0 <= density <= 1.0:
        raise ConfigurationError("density must lie in [0, 1]")
    if height_range[0] > height_range[1]:
        raise ConfigurationError("height_range min must not exceed max")
    if np.isscalar(segment_size):
        segment_size = (float(segment_size), float(segment_size))
    if extent[0] <= 0 or extent[1] <= 0:
        raise ConfigurationError("city extent must have positive area")
    n_rows = _grid_count(extent[0], segment_size[0])
    n_cols = _grid_count(extent[1], segment_size[1])
    seg_w, seg_d = degrees_to_metres(segment_size, origin[0])
    nx, ny, lot_w, lot_d = lot_grid((seg_w, seg_d), lot_size)
    avail_w, avail_d = lot_w - street_width, lot_d - street_width
    if avail_w <= 0 or avail_d <= 0:
        raise ConfigurationError("street_width leaves no room for buildings")

    rng = np.random.default_rng(seed)
    buildings = []
    for r in range(n_rows):
        for c in range(n_cols):
            for j in range(ny):
                for i in range(nx):
                    # fixed draw count per lot keeps the stream aligned across densities
                    occ, fw, fd, ox, oy, hz = rng.random(6)
                    if occ >= density:
                        continue
                    w = avail_w * (0.6 + 0.4 * fw)
                    d = avail_d * (0.6 + 0.4 * fd)
                    x = c * seg_w + i * lot_w + 0.5 * street_width + ox * (avail_w - w)
                    y = r * seg_d + j * lot_d + 0.5 * street_width + oy * (avail_d - d)
                    h = height_range[0] + hz * (height_range[1] - height_range[0])
                    if h <= 0:
                        continue
                    buildings.append(Building(round(x, 6), round(y, 6), round(w, 6), round(d, 6), round(h, 6)))
    return city_from_buildings(buildings, origin, extent, segment_size)


def buildings_to_json(city: CityMap) -> str:
    return json.dumps([b.to_dict() for b in city.buildings], indent=1)


def buildings_from_json(text: str) -> list[Building]:
    return [Building(float(b["x"]), float(b["y"]), float(b["w"]), float(b["d"]), float(b["h"]),
                     b.get("wall_class", "default")) for b in json.loads(text)]


# ---------------------------------------------------------------------------
# base stations

@dataclass(frozen=True)
class BaseStationSite:
    position: tuple[float, float, float]
    max_power: float  # W
    capacity: int
    background_load: np.ndarray = field(repr=False)
    sector_azimuth: float = 0.0
    downtilt: float = 6.0

    def __post_init__(self):
        bg = np.asarray(self.background_load)
        if np.any(bg < 0) or np.any(bg > self.capacity):
            raise ConfigurationError("background load must lie in [0, capacity]")
        if self.position[2] <= 0:
            raise ConfigurationError("base station height must be positive")


@dataclass(frozen=True)
class BsConfig:
    max_power_dbm: float = 42.0
    capacity: int = 20
    mast_height: float = 5.0
    default_height: float = 25.0
    sector_azimuth: float = 0.0
    downtilt: float = 6.0


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def dbw_to_watts(p_dbw: float) -> float:
    return 10.0 ** (p_dbw / 10.0)


def place_base_stations(city: CityMap, bs_config: BsConfig = BsConfig(),
                        background_load=None, n_slots: int = 1) -> list[BaseStationSite]:
    """One site per segment on the roof centroid of the segment's tallest building.

    ``background_load`` is either None (no background), an (N, T) array, or a scalar
    applied to every site and slot.
    """
    n = len(city.segments)
    if background_load is None:
        bg = np.zeros((n, n_slots), dtype=int)
    else:
        bg = np.asarray(background_load, dtype=int)
        if bg.ndim == 0:
            bg = np.full((n, n_slots), int(bg))
    sites = []
    for s, seg in enumerate(city.segments):
        if seg.tallest is None:
            log.warning("segment (%d, %d) has no building; site placed at segment centre", seg.row, seg.col)
            x, y = seg.center
            z = bs_config.default_height + bs_config.mast_height
        else:
            b = city.buildings[seg.tallest]
            x, y = b.centroid
            z = b.h + bs_config.mast_height
        sites.append(BaseStationSite((x, y, z), dbm_to_watts(bs_config.max_power_dbm), bs_config.capacity,
                                     bg[s].copy(), bs_config.sector_azimuth, bs_config.downtilt))
    return sites


# ---------------------------------------------------------------------------
# orbits and look angles

@dataclass(frozen=True)
class SatelliteOrbit:
    altitude: float = 500e3
    inclination: float = 53.0
    raan: float = 0.0
    initial_anomaly: float = 0.0
    max_power: float = dbw_to_watts(16.0)
    capacity: int = 80
    background_load: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=int), repr=False)

    def __post_init__(self):
        if not self.altitude > 0:
            raise ConfigurationError("altitude must be positive")
        if not 0.0 <= self.inclination <= 180.0:
            raise ConfigurationError("inclination must lie in [0, 180]")
        bg = np.asarray(self.background_load)
        if np.any(bg < 0) or np.any(bg > self.capacity):
            raise ConfigurationError("background load must lie in [0, capacity]")

    @property
    def semi_major_axis(self) -> float:
        return EARTH_RADIUS + self.altitude

    @property
    def period(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis ** 3 / MU_EARTH)


def propagate_orbit(orbit: SatelliteOrbit, t) -> np.ndarray:
    """ECEF position(s) of a circular two-body orbit; Earth rotation is neglected."""
    t = np.asarray(t, dtype=float)
    a = orbit.semi_major_axis
    n = math.sqrt(MU_EARTH / a ** 3)
    # reduce before the trig call so t = T lands on the same angle as t = 0
    u = np.mod(math.radians(orbit.initial_anomaly) + n * t, 2.0 * math.pi)
    inc, raan = math.radians(orbit.inclination), math.radians(orbit.raan)
    cu, su = np.cos(u), np.sin(u)
    x = a * (math.cos(raan) * cu - math.sin(raan) * su * math.cos(inc))
    y = a * (math.sin(raan) * cu + math.cos(raan) * su * math.cos(inc))
    z = a * su * math.sin(inc)
    return np.stack([x, y, z], axis=-1)


def orbit_for_pass(lat: float, lon: float, t_ref: float = 0.0, *, altitude=500e3, inclination=53.0,
                   ascending: bool = True, **kwargs) -> SatelliteOrbit:
    """Orbit whose sub-satellite point is (lat, lon) at time ``t_ref``."""
    inc = math.radians(inclination)
    s = math.sin(math.radians(lat)) / math.sin(inc)
    if abs(s) > 1:
        raise ConfigurationError(f"latitude {lat} unreachable at inclination {inclination}")
    u = math.asin(s) if ascending else math.pi - math.asin(s)
    raan = math.radians(lon) - math.atan2(math.cos(inc) * math.sin(u), math.cos(u))
    a = EARTH_RADIUS + altitude
    u0 = u - math.sqrt(MU_EARTH / a ** 3) * t_ref
    return SatelliteOrbit(altitude=altitude, inclination=inclination,
                          raan=math.degrees(raan) % 360.0, initial_anomaly=math.degrees(u0) % 360.0, **kwargs)


def enu_basis(lat: float, lon: float) -> np.ndarray:
    """3x3 matrix whose columns are the east, north, up unit vectors in ECEF."""
    la, lo = math.radians(lat), math.radians(lon)
    return np.array([
        [-math.sin(lo), -math.sin(la) * math.cos(lo), math.cos(la) * math.cos(lo)],
        [math.cos(lo), -math.sin(la) * math.sin(lo), math.cos(la) * math.sin(lo)],
        [0.0, math.cos(la), math.sin(la)],
    ])


def geodetic_to_ecef(lat: float, lon: float, alt: float = 0.0) -> np.ndarray:
    la, lo = math.radians(lat), math.radians(lon)
    r = EARTH_RADIUS + alt
    return np.array([r * math.cos(la) * math.cos(lo), r * math.cos(la) * math.sin(lo), r * math.sin(la)])


def ecef_to_enu(points, origin) -> np.ndarray:
    """ECEF points -> ENU coordinates relative to the geodetic ``origin`` (lat, lon)."""
    basis = enu_basis(*origin)
    return (np.asarray(points, dtype=float) - geodetic_to_ecef(*origin)) @ basis


def enu_to_ecef(points, origin) -> np.ndarray:
    basis = enu_basis(*origin)
    return geodetic_to_ecef(*origin) + np.asarray(points, dtype=float) @ basis.T


def sat_look_angles(sat_pos, ue_pos, origin):
    """Elevation, azimuth (degrees, clockwise from north) and slant range (m).

    ``ue_pos`` is in the ENU frame of ``origin``; angles are measured in that frame.
    Negative elevation means the satellite is below the horizon.
    """
    rel = ecef_to_enu(sat_pos, origin) - np.asarray(ue_pos, dtype=float)
    rng = np.linalg.norm(rel, axis=-1)
    el = np.degrees(np.arcsin(np.clip(rel[..., 2] / rng, -1.0, 1.0)))
    az = np.mod(np.degrees(np.arctan2(rel[..., 0], rel[..., 1])), 360.0)
    return el, az, rng


# ---------------------------------------------------------------------------
# routes

@dataclass(frozen=True)
class UERoute:
    times: np.ndarray
    positions: np.ndarray  # (W, 3) ENU metres
    antenna_mount_height: float = 1.5

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if t.ndim != 1 or p.shape != (t.size, 3) or t.size == 0:
            raise ConfigurationError("route needs matching times and (W, 3) positions")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ConfigurationError("route waypoint times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    @property
    def max_speed(self) -> float:
        if self.times.size < 2:
            return 0.0
        seg = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        return float(np.max(seg / np.diff(self.times)))

    def to_json(self) -> str:
        return json.dumps([{"t": float(t), "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                           for t, p in zip(self.times, self.positions)], indent=1)

    @classmethod
    def from_json(cls, text: str, antenna_mount_height: float = 1.5) -> "UERoute":
        pts = json.loads(text)
        times = [p["t"] for p in pts]
        pos = [[p["x"], p["y"], p.get("z", antenna_mount_height)] for p in pts]
        return cls(np.array(times, float), np.array(pos, float), antenna_mount_height)

    @classmethod
    def stationary(cls, position, grid: TimeGrid, antenna_mount_height: float = 1.5) -> "UERoute":
        p = np.asarray(position, dtype=float)
        return cls(np.array([grid.start_epoch, grid.end]), np.stack([p, p]), antenna_mount_height)


def sample_route(route: UERoute, grid: TimeGrid) -> np.ndarray:
    """Piecewise-linear position at every slot midpoint, shape (T, 3)."""
    tm = grid.midpoints
    if route.times.size == 1:
        if not np.allclose(tm, route.times[0]):
            raise ValueError("single-waypoint route does not span the time grid")
        return np.repeat(route.positions, tm.size, axis=0)
    if tm[0] < route.times[0] or tm[-1] > route.times[-1]:
        raise ValueError(f"slot midpoints [{tm[0]}, {tm[-1]}] outside route span "
                         f"[{route.times[0]}, {route.times[-1]}]")
    return np.stack([np.interp(tm, route.times, route.positions[:, i]) for i in range(3)], axis=1)


def generate_routes(city: CityMap, n_ues: int, grid: TimeGrid, seed: int, *, lot_size: float = 50.0,
                    speed_range=(8.0, 14.0), antenna_mount_height: float = 1.5) -> list[UERoute]:
    """Random walks along the street grid between lots, one per UE."""
    rng = np.random.default_rng(seed)
    nx, ny, lot_w, lot_d = lot_grid(city.segment_size_m, lot_size)
    cols, rows = city.n_cols * nx, city.n_rows * ny  # street lines are at i*lot_w, j*lot_d
    duration = grid.end - grid.start_epoch
    routes = []
    moves = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    for _ in range(n_ues):
        speed = rng.uniform(*speed_range)
        i, j = int(rng.integers(1, cols)), int(rng.integers(1, rows))
        pts = [(i * lot_w, j * lot_d)]
        length, last = 0.0, None
        while length < speed * duration:
            options = [m for m in moves if (last is None or m != (-last[0], -last[1]))
                       and 0 <= i + m[0] <= cols and 0 <= j + m[1] <= rows]
            di, dj = options[int(rng.integers(len(options)))]
            for _ in range(int(rng.integers(1, 5))):
                if not (0 <= i + di <= cols and 0 <= j + dj <= rows):
                    break
                i, j = i + di, j + dj
                length += abs(di) * lot_w + abs(dj) * lot_d
            if (i * lot_w, j * lot_d) != pts[-1]:
                pts.append((i * lot_w, j * lot_d))
            last = (di, dj)
        xy = np.array(pts, dtype=float)
        seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
        t = grid.start_epoch + np.concatenate([[0.0], np.cumsum(seg)]) / speed
        pos = np.column_stack([xy, np.full(len(xy), antenna_mount_height)])
        routes.append(UERoute(t, pos, antenna_mount_height))
    return routes

"""Ray enumeration in the box city, multi-ray path loss, channel tensors and CINR maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .antenna import SPEED_OF_LIGHT, BsPattern, SatPattern, UePattern, bs_gain, sat_gain, ue_gain
from .scene import (BaseStationSite, CityMap, ConfigurationError, SatelliteOrbit, TimeGrid, UERoute,
                    ecef_to_enu, propagate_orbit, sample_route)

BOLTZMANN = 1.380649e-23

LOS, PENETRATION, REFLECTION = "line_of_sight", "penetration", "reflection"
_KIND_ORDER = {LOS: 0, PENETRATION: 1, REFLECTION: 2}


@dataclass(frozen=True)
class NoiseModel:
    bandwidth: float = 20e6
    noise_figure: float = 1.2
    antenna_temperature: float = 150.0

    def __post_init__(self):
        if not (self.bandwidth > 0 and self.antenna_temperature > 0 and self.noise_figure >= 0):
            raise ValueError("noise model parameters must be positive")


def noise_power(nm: NoiseModel) -> float:
    """Thermal noise power in watts: k_B (T_a + 290 (F - 1)) B."""
    t_sys = nm.antenna_temperature + 290.0 * (10.0 ** (nm.noise_figure / 10.0) - 1.0)
    return BOLTZMANN * t_sys * nm.bandwidth


@dataclass(frozen=True)
class BasicLoss:
    l_b_tn: float = 2.0
    l_b_ntn: float = 3.0
    l_wall: float = 15.0

    def __post_init__(self):
        if min(self.l_b_tn, self.l_b_ntn, self.l_wall) < 0:
            raise ValueError("losses must be non-negative")


@dataclass(frozen=True)
class ChannelOptions:
    frequency: float = 3.4e9
    losses: BasicLoss = BasicLoss()
    wall_losses: dict = field(default_factory=dict)  # wall class -> dB, overrides losses.l_wall
    reflections: bool = True
    reflection_loss: float = 6.0
    min_elevation: float = 10.0
    pl_mode: str = "amplitude"  # or "literal"
    pl_cap: float = 250.0

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    def wall_loss(self, wall_class: str) -> float:
        return float(self.wall_losses.get(wall_class, self.losses.l_wall))


def fspl_db(distance, frequency: float = 3.4e9):
    """Free-space path loss 20 log10(4 pi d f / c) in dB."""
    return 20.0 * np.log10(4.0 * np.pi * np.asarray(distance, dtype=float) * frequency / SPEED_OF_LIGHT)


def channel_gain(pl_db):
    """Linear power gain from a path loss in dB."""
    g = 10.0 ** (-np.asarray(pl_db, dtype=float) / 10.0)
    return float(g) if np.ndim(g) == 0 else g


# ---------------------------------------------------------------------------
# antennas placed in the scene

def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Isotropic:
    gain_dbi: float = 0.0

    def gain(self, directions):
        return np.full(np.shape(directions)[:-1], self.gain_dbi)


@dataclass(frozen=True)
class BsAntenna:
    pattern: BsPattern

    def gain(self, directions):
        d = np.asarray(directions, dtype=float)
        az = np.degrees(np.arctan2(d[..., 0], d[..., 1]))
        depression = -np.degrees(np.arcsin(np.clip(d[..., 2], -1.0, 1.0)))
        return bs_gain(self.pattern, az, depression)


@dataclass(frozen=True)
class SatAntenna:
    pattern: SatPattern
    boresight: tuple  # unit vector, ENU

    def gain(self, directions):
        cosang = np.clip(np.asarray(directions, dtype=float) @ np.asarray(self.boresight), -1.0, 1.0)
        return sat_gain(self.pattern, np.minimum(np.arccos(cosang), 0.5 * np.pi))


@dataclass(frozen=True)
class UeAntenna:
    pattern: UePattern

    def gain(self, directions):
        d = np.asarray(directions, dtype=float)
        theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        phi = np.arctan2(d[..., 1], d[..., 0])
        return ue_gain(self.pattern, theta, phi)


@dataclass(frozen=True)
class AntennaSet:
    sat: SatPattern = SatPattern()
    bs: BsPattern = BsPattern()
    ue: UePattern = UePattern()


# ---------------------------------------------------------------------------
# ray tracing

@dataclass(frozen=True)
class Ray:
    kind: str
    path_length: float
    loss: float  # dB, includes the basic loss
    phase: float
    departure: tuple  # unit vector leaving the transmitter
    arrival: tuple  # unit vector from the receiver toward the incoming wave

    @staticmethod
    def _angles(v):
        return (math.acos(max(-1.0, min(1.0, v[2]))), math.atan2(v[1], v[0]))

    @property
    def departure_angles(self):
        """(zenith, azimuth) in radians."""
        return self._angles(self.departure)

    @property
    def arrival_angles(self):
        return self._angles(self.arrival)


def segment_hits(p0, p1, boxes, eps: float = 1e-9) -> np.ndarray:
    """Slab test of segments p0->p1 against boxes; returns a (P, B) bool matrix.

    Boxes are rows (xmin, ymin, xmax, ymax, height) standing on z = 0.  Grazing
    contact shorter than ``eps`` (in segment parameter) does not count.
    """
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    boxes = np.asarray(boxes, dtype=float)
    d = p1 - p0
    n = max(len(p0), len(p1))
    if len(boxes) == 0:
        return np.zeros((n, 0), dtype=bool)
    lo = np.stack([boxes[:, 0], boxes[:, 1], np.zeros(len(boxes))], axis=1)
    hi = np.stack([boxes[:, 2], boxes[:, 3], boxes[:, 4]], axis=1)
    t0 = np.zeros((n, len(boxes)))
    t1 = np.ones((n, len(boxes)))
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(3):
            da = d[:, a:a + 1]
            pa = p0[:, a:a + 1]
            inv = 1.0 / da
            ta = (lo[None, :, a] - pa) * inv
            tb = (hi[None, :, a] - pa) * inv
            tmin = np.minimum(ta, tb)
            tmax = np.maximum(ta, tb)
            flat = da == 0.0
            inside = (pa >= lo[None, :, a]) & (pa <= hi[None, :, a])
            tmin = np.where(flat, np.where(inside, -np.inf, np.inf), tmin)
            tmax = np.where(flat, np.where(inside, np.inf, -np.inf), tmax)
            t0 = np.maximum(t0, tmin)
            t1 = np.minimum(t1, tmax)
    return t1 - t0 > eps


def blocked_by(city: CityMap, p0, p1, exclude=None) -> np.ndarray:
    """Indices of buildings crossed by the segment p0->p1."""
    boxes = city.boxes
    if len(boxes) == 0:
        return np.zeros(0, dtype=int)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    # cull with the segment bounding box, clipped to the tallest roof
    zmax = boxes[:, 4].max()
    q0, q1 = p0.copy(), p1.copy()
    if p0[2] > zmax or p1[2] > zmax:
        if p0[2] > zmax and p1[2] > zmax:
            return np.zeros(0, dtype=int)
        dz = p1[2] - p0[2]
        s = (zmax - p0[2]) / dz
        cut = p0 + s * (p1 - p0)
        if p0[2] > zmax:
            q0 = cut
        else:
            q1 = cut
    lo, hi = np.minimum(q0, q1), np.maximum(q0, q1)
    cand = np.nonzero((boxes[:, 0] <= hi[0]) & (boxes[:, 2] >= lo[0])
                      & (boxes[:, 1] <= hi[1]) & (boxes[:, 3] >= lo[1]))[0]
    if exclude is not None:
        cand = cand[cand != exclude]
    if cand.size == 0:
        return cand
    hit = segment_hits(p0, p1, boxes[cand])[0]
    return cand[hit]


def _penetration_wall_loss(city: CityMap, blockers, options: ChannelOptions) -> float:
    if len(blockers) == 0:
        return options.wall_loss("default")
    return max(options.wall_loss(city.buildings[i].wall_class) for i in blockers)


def _phase(length: float, wavelength: float) -> float:
    return math.fmod(2.0 * math.pi * length / wavelength, 2.0 * math.pi)


def trace_rays(city: CityMap, tx_pos, rx_pos, options: ChannelOptions = ChannelOptions(),
               basic_loss: float = 0.0) -> list[Ray]:
    """Enumerate LoS, penetration and single-bounce wall reflections between tx and rx."""
    tx = np.asarray(tx_pos, dtype=float)
    rx = np.asarray(rx_pos, dtype=float)
    vec = rx - tx
    dist = float(np.linalg.norm(vec))
    if dist == 0.0:
        raise ValueError("transmitter and receiver coincide")
    lam = options.wavelength
    dep = tuple(vec / dist)
    arr = tuple(-vec / dist)
    fs = float(fspl_db(dist, options.frequency))
    phase = _phase(dist, lam)

    blockers = blocked_by(city, tx, rx)
    rays = []
    if len(blockers) == 0:
        rays.append(Ray(LOS, dist, fs + basic_loss, phase, dep, arr))
    l_wall = _penetration_wall_loss(city, blockers, options)
    rays.append(Ray(PENETRATION, dist, fs + 2.0 * l_wall + basic_loss, phase, dep, arr))

    if options.reflections and len(city.boxes):
        rays.extend(_reflections(city, tx, rx, options, basic_loss))
    return rays


def _reflections(city: CityMap, tx, rx, options: ChannelOptions, basic_loss: float) -> list[Ray]:
    f = city.faces
    axis = f[:, 0].astype(int)
    c, sign, lo, hi, h = f[:, 1], f[:, 2], f[:, 3], f[:, 4], f[:, 5]
    tx_a = np.where(axis == 0, tx[0], tx[1])
    rx_a = np.where(axis == 0, rx[0], rx[1])
    ok = ((tx_a - c) * sign > 1e-9) & ((rx_a - c) * sign > 1e-9)
    if not ok.any():
        return []
    idx = np.nonzero(ok)[0]
    img_a = 2.0 * c[idx] - tx_a[idx]
    s = (c[idx] - rx_a[idx]) / (img_a - rx_a[idx])
    tx_o = np.where(axis[idx] == 0, tx[1], tx[0])
    rx_o = np.where(axis[idx] == 0, rx[1], rx[0])
    p_o = rx_o + s * (tx_o - rx_o)
    p_z = rx[2] + s * (tx[2] - rx[2])
    ok2 = (p_o >= lo[idx]) & (p_o <= hi[idx]) & (p_z >= 0.0) & (p_z <= h[idx])
    rays = []
    lam = options.wavelength
    for j in np.nonzero(ok2)[0]:
        fi = idx[j]
        if axis[fi] == 0:
            pt = np.array([c[fi], p_o[j], p_z[j]])
            image = np.array([img_a[j], tx[1], tx[2]])
        else:
            pt = np.array([p_o[j], c[fi], p_z[j]])
            image = np.array([tx[0], img_a[j], tx[2]])
        bld = int(f[fi, 6])
        if len(blocked_by(city, tx, pt, exclude=bld)) or len(blocked_by(city, pt, rx, exclude=bld)):
            continue
        length = float(np.linalg.norm(image - rx))
        loss = float(fspl_db(length, options.frequency)) + options.reflection_loss + basic_loss
        rays.append(Ray(REFLECTION, length, loss, _phase(length, lam),
                        tuple(_unit(pt - tx)), tuple(_unit(pt - rx))))
    return rays


def _canonical(rays):
    return sorted(rays, key=lambda r: (_KIND_ORDER[r.kind], r.path_length, r.phase, r.departure, r.arrival))


def equivalent_path_loss(rays, tx_antenna, rx_antenna, mode: str = "amplitude", cap: float = 250.0) -> float:
    """Coherent multi-ray path loss in dB.

    ``mode="amplitude"`` sums per-ray complex amplitudes sqrt(G_r G_t / L) e^{-j phase};
    ``mode="literal"`` sums the power ratios themselves under the phasor and takes
    -10 log10 of the magnitude.  Results above ``cap`` (or total cancellation) return
    ``cap``.
    """
    if not rays:
        raise ValueError("no rays")
    total = 0j
    for r in _canonical(rays):
        g_db = float(rx_antenna.gain(np.asarray(r.arrival))) + float(tx_antenna.gain(np.asarray(r.departure)))
        ratio = 10.0 ** ((g_db - r.loss) / 10.0)
        term = math.sqrt(ratio) if mode == "amplitude" else ratio
        total += term * complex(math.cos(r.phase), -math.sin(r.phase))
    mag = abs(total)
    if mag == 0.0:
        return cap
    pl = -20.0 * math.log10(mag) if mode == "amplitude" else -10.0 * math.log10(mag)
    return min(pl, cap)


# ---------------------------------------------------------------------------
# transmitters at a time instant

@dataclass(frozen=True)
class Transmitter:
    side: str  # "tn" or "ntn"
    position: np.ndarray
    antenna: object
    power: float  # W per connection
    basic_loss: float
    visible: object = True  # bool, or a callable rx_points -> bool mask


def sat_positions_enu(orbits, times, origin) -> np.ndarray:
    """(M, T, 3) satellite positions in the city ENU frame."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if not orbits:
        return np.zeros((0, times.size, 3))
    return np.stack([ecef_to_enu(propagate_orbit(o, times), origin) for o in orbits])


def aim_point(city: CityMap) -> np.ndarray:
    w, d = city.size_m
    return np.array([0.5 * w, 0.5 * d, 0.0])


def transmitters_at(city: CityMap, sites, orbits, t: float, patterns: AntennaSet,
                    options: ChannelOptions) -> list[Transmitter]:
    """Base stations then satellites, with per-connection uniform powers."""
    out = [Transmitter("tn", np.asarray(s.position, float), BsAntenna(_site_pattern(patterns.bs, s)),
                       s.max_power / s.capacity, options.losses.l_b_tn) for s in sites]
    if orbits:
        pos = sat_positions_enu(orbits, [t], city.origin)[:, 0]
        target = aim_point(city)
        for o, p in zip(orbits, pos):
            ant = SatAntenna(patterns.sat, tuple(_unit(target - p)))
            out.append(Transmitter("ntn", p, ant, o.max_power / o.capacity, options.losses.l_b_ntn,
                                   _elevation_mask(p, options.min_elevation)))
    return out


def _site_pattern(p: BsPattern, site: BaseStationSite) -> BsPattern:
    if p.sector_azimuth == site.sector_azimuth and p.downtilt == site.downtilt:
        return p
    return BsPattern(p.max_gain, p.az_3db, p.el_3db, p.a_max, p.sla_v, site.sector_azimuth, site.downtilt,
                     p.n_sectors)


def _elevation_mask(sat_pos, min_elevation):
    sat_pos = np.asarray(sat_pos, float)

    def visible(points):
        rel = sat_pos - np.atleast_2d(points)
        el = np.degrees(np.arcsin(rel[:, 2] / np.linalg.norm(rel, axis=1)))
        return el >= min_elevation
    return visible


def _is_visible(tx: Transmitter, points) -> np.ndarray:
    n = len(np.atleast_2d(points))
    if callable(tx.visible):
        return tx.visible(points)
    return np.full(n, bool(tx.visible))


def link_path_loss(city: CityMap, tx: Transmitter, rx_pos, ue_antenna, options: ChannelOptions) -> float:
    rays = trace_rays(city, tx.position, rx_pos, options, tx.basic_loss)
    return equivalent_path_loss(rays, tx.antenna, ue_antenna, options.pl_mode, options.pl_cap)


def path_loss_points(city: CityMap, tx: Transmitter, points, ue_antenna, options: ChannelOptions,
                     chunk: int = 2048) -> np.ndarray:
    """Path loss (dB) from one transmitter to many receivers.

    Without reflections this is a vectorized LoS + penetration evaluation that
    reproduces ``trace_rays`` + ``equivalent_path_loss`` ray for ray; with
    reflections it falls back to the per-link tracer.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if options.reflections:
        return np.array([link_path_loss(city, tx, p, ue_antenna, options) for p in points])
    out = np.empty(len(points))
    boxes = city.boxes
    zmax = boxes[:, 4].max() if len(boxes) else 0.0
    default_wall = _penetration_wall_loss(city, [], options)
    wall = np.array([options.wall_loss(b.wall_class) for b in city.buildings])
    for s in range(0, len(points), chunk):
        rx = points[s:s + chunk]
        vec = rx - tx.position
        dist = np.linalg.norm(vec, axis=1)
        dep = vec / dist[:, None]
        fs = fspl_db(dist, options.frequency)
        phase = np.fmod(2.0 * np.pi * dist / options.wavelength, 2.0 * np.pi)
        if len(boxes):
            # cull buildings against the chunk's segment bounding box below the tallest roof
            lo, hi = _chunk_bbox(tx.position, rx, zmax)
            cand = np.nonzero((boxes[:, 0] <= hi[0]) & (boxes[:, 2] >= lo[0])
                              & (boxes[:, 1] <= hi[1]) & (boxes[:, 3] >= lo[1]))[0]
            hits = segment_hits(np.broadcast_to(tx.position, rx.shape), rx, boxes[cand])
            los = ~hits.any(axis=1)
            lw = np.where(hits, wall[cand][None, :], -np.inf).max(axis=1) if cand.size else np.full(len(rx), -np.inf)
            lw = np.where(los, default_wall, lw)
        else:
            los = np.ones(len(rx), dtype=bool)
            lw = np.full(len(rx), default_wall)
        g = ue_antenna.gain(-dep) + tx.antenna.gain(dep)
        cph = np.cos(phase) - 1j * np.sin(phase)
        r_los = 10.0 ** ((g - (fs + tx.basic_loss)) / 10.0)
        r_pen = 10.0 ** ((g - (fs + 2.0 * lw + tx.basic_loss)) / 10.0)
        if options.pl_mode == "amplitude":
            r_los, r_pen = np.sqrt(r_los), np.sqrt(r_pen)
        # same summation order as equivalent_path_loss: LoS first, then penetration
        total = np.where(los, 0j + r_los * cph, 0j) + r_pen * cph
        mag = np.abs(total)
        with np.errstate(divide="ignore"):
            pl = (-20.0 if options.pl_mode == "amplitude" else -10.0) * np.log10(mag)
        out[s:s + len(rx)] = np.where(mag == 0.0, options.pl_cap, np.minimum(pl, options.pl_cap))
    return out


def _chunk_bbox(tx, rx, zmax):
    pts = [rx]
    tx = np.asarray(tx, float)
    if tx[2] <= zmax:
        pts.append(tx[None, :])
    else:
        # where each segment descends through the tallest roof
        s = np.clip((zmax - rx[:, 2]) / (tx[2] - rx[:, 2]), 0.0, 1.0)
        pts.append(rx + s[:, None] * (tx - rx))
    allp = np.concatenate(pts)
    return allp.min(axis=0), allp.max(axis=0)


# ---------------------------------------------------------------------------
# channel tensor

@dataclass
class ChannelTensor:
    h: np.ndarray  # (N, K, T) BS -> UE linear power gain
    g: np.ndarray  # (M, K, T) satellite -> UE
    noise_power: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        for a in (self.h, self.g):
            if a.ndim != 3 or not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError("channel gains must be finite, non-negative (·, K, T) arrays")
        if self.h.shape[1:] != self.g.shape[1:]:
            raise ValueError("h and g disagree on (K, T)")

    @property
    def shape(self):
        n, k, t = self.h.shape
        return n, self.g.shape[0], k, t


def ue_positions(routes, grid: TimeGrid) -> np.ndarray:
    """(K, T, 3) positions of every UE at every slot midpoint."""
    if not routes:
        return np.zeros((0, grid.n_slots, 3))
    return np.stack([sample_route(r, grid) for r in routes])


def compute_channel_tensor(city: CityMap, sites, orbits, routes, grid: TimeGrid,
                           patterns: AntennaSet = AntennaSet(), options: ChannelOptions = ChannelOptions(),
                           noise: NoiseModel = NoiseModel()) -> ChannelTensor:
    """Trace every (transmitter, UE, slot) link and convert path losses to gains."""
    for s in sites:
        if np.size(s.background_load) not in (1, grid.n_slots):
            raise ConfigurationError("base-station background load does not match the time grid")
    for o in orbits:
        if np.size(o.background_load) not in (1, grid.n_slots):
            raise ConfigurationError("satellite background load does not match the time grid")
    pos = ue_positions(routes, grid)
    n, m, k, t_n = len(sites), len(orbits), len(routes), grid.n_slots
    h = np.zeros((n, k, t_n))
    g = np.zeros((m, k, t_n))
    ue_ant = UeAntenna(patterns.ue)
    for t, tm in enumerate(grid.midpoints):
        txs = transmitters_at(city, sites, orbits, tm, patterns, options)
        for j, tx in enumerate(txs):
            if k == 0:
                continue
            vis = _is_visible(tx, pos[:, t])
            for u in range(k):
                if not vis[u]:
                    continue
                gain = channel_gain(link_path_loss(city, tx, pos[u, t], ue_ant, options))
                if tx.side == "tn":
                    h[j, u, t] = gain
                else:
                    g[j - n, u, t] = gain
    return ChannelTensor(h, g, noise_power(noise))


# ---------------------------------------------------------------------------
# CINR maps

def received_powers(city: CityMap, sites, orbits, points, t: float, patterns: AntennaSet = AntennaSet(),
                    options: ChannelOptions = ChannelOptions()):
    """Per-connection received power P*gain (W) from every transmitter at time ``t``.

    Returns (bs_power (N, P), sat_power (M, P)); invisible satellites contribute 0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ue_ant = UeAntenna(patterns.ue)
    rows_tn, rows_ntn = [], []
    for tx in transmitters_at(city, sites, orbits, t, patterns, options):
        vis = _is_visible(tx, points)
        pw = np.zeros(len(points))
        if vis.any():
            pw[vis] = tx.power * channel_gain(path_loss_points(city, tx, points[vis], ue_ant, options))
        (rows_tn if tx.side == "tn" else rows_ntn).append(pw)
    n_pts = len(points)
    bs = np.array(rows_tn).reshape(-1, n_pts)
    sat = np.array(rows_ntn).reshape(-1, n_pts)
    return bs, sat


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def cinr_from_powers(bs, sat, sigma2: float, side: str) -> np.ndarray:
    """Strongest own-side server over cross-network interference plus noise, in dB."""
    own, other = (bs, sat) if side == "tn" else (sat, bs)
    if side not in ("tn", "ntn"):
        raise ValueError("side must be 'tn' or 'ntn'")
    n_pts = own.shape[1] if own.ndim == 2 else other.shape[1]
    desired = own.max(axis=0) if len(own) else np.zeros(n_pts)
    interference = other.sum(axis=0) if len(other) else np.zeros(n_pts)
    return _db(desired / (interference + sigma2))


@dataclass(frozen=True)
class GridSpec:
    """Receiver grid covering whole segments at ``points_per_segment`` per axis."""
    rows: tuple = (0, None)  # segment row range [start, stop)
    cols: tuple = (0, None)
    points_per_segment: int = 100
    height: float = 1.5

    def mesh(self, city: CityMap):
        r0, r1 = self.rows[0], self.rows[1] if self.rows[1] is not None else city.n_rows
        c0, c1 = self.cols[0], self.cols[1] if self.cols[1] is not None else city.n_cols
        sw, sd = city.segment_size_m
        q = self.points_per_segment
        # receiver at the centre of each grid cell
        xs = (c0 + (np.arange((c1 - c0) * q) + 0.5) / q) * sw
        ys = (r0 + (np.arange((r1 - r0) * q) + 0.5) / q) * sd
        return xs, ys


def cinr_points(city, sites, orbits, points, t, side, patterns=AntennaSet(), options=ChannelOptions(),
                noise: NoiseModel = NoiseModel()) -> np.ndarray:
    bs, sat = received_powers(city, sites, orbits, points, t, patterns, options)
    return cinr_from_powers(bs, sat, noise_power(noise), side)


def cinr_grid(city, sites, orbits, grid_spec: GridSpec, t: float, link_side: str, patterns=AntennaSet(),
              options=ChannelOptions(), noise: NoiseModel = NoiseModel()) -> np.ndarray:
    """CINR (dB) on a receiver grid; rows run south to north, columns west to east."""
    xs, ys = grid_spec.mesh(city)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel(), np.full(xx.size, grid_spec.height)])
    return cinr_points(city, sites, orbits, pts, t, link_side, patterns, options, noise).reshape(xx.shape)

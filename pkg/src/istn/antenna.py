"""Analytic antenna gain patterns (all gains in dBi).

* satellite: circular-aperture Bessel pattern
* base station: sectored macro pattern with horizontal/vertical 3 dB cuts
* UE: rooftop 2x2 patch array, element cos^q pattern times array factor
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0

_SERIES_TERMS = 30
_SERIES_LIMIT = 6.0


def bessel_j1(x):
    """Bessel function of the first kind, order one.

    Power series for |x| <= 6, otherwise the trapezoid rule on the Bessel
    integral (1/2pi) * int_0^{2pi} cos(tau - x sin tau) d tau, which converges
    geometrically for a periodic analytic integrand.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)

    small = ax <= _SERIES_LIMIT
    if np.any(small):
        h = 0.5 * ax[small]
        term = h.copy()
        acc = term.copy()
        h2 = h * h
        for m in range(1, _SERIES_TERMS):
            term = -term * h2 / (m * (m + 1))
            acc += term
        out[small] = acc

    big = ~small
    if np.any(big):
        xb = ax[big]
        n_nodes = 64 + int(np.ceil(xb.max()))
        tau = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        out[big] = np.mean(np.cos(tau[None, :] - xb[:, None] * np.sin(tau)[None, :]), axis=1)
    return np.sign(x) * out if out.ndim else float(np.sign(x) * out)


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


@dataclass(frozen=True)
class SatPattern:
    max_gain: float = 30.0
    aperture_radius: float = 1.0
    wavelength: float = SPEED_OF_LIGHT / 3.4e9
    floor: float = -60.0  # relative to max_gain

    def __post_init__(self):
        if not (self.aperture_radius > 0 and self.wavelength > 0):
            raise ValueError("aperture radius and wavelength must be positive")


def sat_gain(p: SatPattern, theta):
    """Gain at ``theta`` radians off boresight."""
    theta = np.abs(np.asarray(theta, dtype=float))
    u = 2.0 * np.pi * p.aperture_radius / p.wavelength * np.sin(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(u > 1e-12, bessel_j1(u) / np.where(u > 1e-12, u, 1.0), 0.5)
    rel = np.maximum(_db(4.0 * ratio ** 2), p.floor)
    g = p.max_gain + rel
    return float(g) if np.ndim(g) == 0 else g


@dataclass(frozen=True)
class BsPattern:
    max_gain: float = 17.0
    az_3db: float = 65.0
    el_3db: float = 10.0
    a_max: float = 30.0
    sla_v: float = 30.0
    sector_azimuth: float = 0.0
    downtilt: float = 6.0
    n_sectors: int = 3

    def __post_init__(self):
        if not (self.az_3db > 0 and self.el_3db > 0 and self.a_max > 0 and self.sla_v > 0):
            raise ValueError("beamwidths and attenuation limits must be positive")


def bs_gain(p: BsPattern, azimuth, elevation):
    """Gain toward (azimuth, elevation) in degrees.

    ``elevation`` is measured below the horizon (positive downward), the same
    sense as ``downtilt``.  With several sectors the site gain is the best
    sector, sectors spaced evenly from ``sector_azimuth``.
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    a_v = -np.minimum(12.0 * ((el - p.downtilt) / p.el_3db) ** 2, p.sla_v)
    best = None
    for s in range(max(1, p.n_sectors)):
        d_az = np.mod(az - p.sector_azimuth - s * 360.0 / max(1, p.n_sectors) + 180.0, 360.0) - 180.0
        a_h = -np.minimum(12.0 * (d_az / p.az_3db) ** 2, p.a_max)
        g = p.max_gain - np.minimum(-(a_h + a_v), p.a_max)
        best = g if best is None else np.maximum(best, g)
    return float(best) if np.ndim(best) == 0 else best


@dataclass(frozen=True)
class UePattern:
    rows: int = 2
    cols: int = 2
    spacing: float = 0.5  # wavelengths
    element_exponent: float = 2.0
    max_gain: float = 12.0
    floor: float = -30.0  # relative to max_gain

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and column")


def _ue_relative(p: UePattern, theta, phi):
    """Unnormalized element * array-factor power pattern."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c = np.cos(theta)
    elem = np.where(c > 0, np.abs(c) ** p.element_exponent, 0.0)
    st = np.sin(theta)
    ux, uy = st * np.cos(phi), st * np.sin(phi)

    def axis_factor(n, u):
        pos = (np.arange(n) - 0.5 * (n - 1)) * p.spacing
        ph = 2.0 * np.pi * np.multiply.outer(u, pos)
        return np.abs(np.exp(1j * ph).sum(axis=-1)) ** 2 / n ** 2

    return elem * axis_factor(p.rows, ux) * axis_factor(p.cols, uy)


@functools.lru_cache(maxsize=32)
def ue_normalization(p: UePattern) -> float:
    """Offset (dB) mapping the pattern peak found on a dense sweep to max_gain."""
    th = np.linspace(0.0, 0.5 * np.pi, 721)
    ph = np.linspace(0.0, 2.0 * np.pi, 721)
    rel = _ue_relative(p, th[:, None], ph[None, :])
    return p.max_gain - 10.0 * math.log10(float(rel.max()))


def ue_gain(p: UePattern, theta, phi):
    """Gain at zenith angle ``theta`` and azimuth ``phi`` (radians)."""
    rel = _ue_relative(p, theta, phi)
    g = np.maximum(ue_normalization(p) + _db(rel), p.max_gain + p.floor)
    return float(g) if np.ndim(g) == 0 else g


def pattern_cut(kind: str, pattern, n: int = 361) -> np.ndarray:
    """(angle, dBi) samples of one principal cut, for inspection dumps.

    Angles are degrees: off-boresight for the satellite, azimuth for the base
    station (at the downtilt), zenith angle for the UE (phi = 0).
    """
    if kind == "sat":
        ang = np.linspace(0.0, 90.0, n)
        g = sat_gain(pattern, np.radians(ang))
    elif kind == "bs":
        ang = np.linspace(-180.0, 180.0, n)
        g = bs_gain(pattern, ang, np.full(n, pattern.downtilt))
    elif kind == "ue":
        ang = np.linspace(0.0, 180.0, n)
        g = ue_gain(pattern, np.radians(ang), np.zeros(n))
    else:
        raise ValueError(f"unknown pattern kind {kind!r}")
    return np.column_stack([ang, g])

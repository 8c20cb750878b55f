"""Association variables, constraints (C1)-(C5), SINR and sum-rate evaluation.

Reported rates use log base 2 (bit/s/Hz).  Every function accepts relaxed
(continuous) association arrays as well as binary ones.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ChannelTensor


@dataclass
class AssociationVars:
    alpha: np.ndarray  # (N, K, T) BS links
    beta: np.ndarray  # (M, K, T) satellite links

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha)
        self.beta = np.asarray(self.beta)
        if self.alpha.shape[1:] != self.beta.shape[1:]:
            raise ValueError("alpha and beta disagree on (K, T)")

    @classmethod
    def zeros(cls, n, m, k, t) -> "AssociationVars":
        return cls(np.zeros((n, k, t), dtype=int), np.zeros((m, k, t), dtype=int))

    def copy(self) -> "AssociationVars":
        return AssociationVars(self.alpha.copy(), self.beta.copy())


def _per_node(bg, n: int) -> np.ndarray:
    bg = np.asarray(bg, dtype=int)
    if bg.ndim == 2 and bg.shape[0] == n:
        return bg
    # reshape(0, -1) is ambiguous, so empty sides keep a single slot column
    return bg.reshape(n, -1) if n else np.zeros((0, 1), dtype=int)


@dataclass
class CapacityProfile:
    bs_capacity: np.ndarray  # (N,)
    sat_capacity: np.ndarray  # (M,)
    bs_background: np.ndarray  # (N, T)
    sat_background: np.ndarray  # (M, T)

    def __post_init__(self):
        self.bs_capacity = np.asarray(self.bs_capacity, dtype=int).reshape(-1)
        self.sat_capacity = np.asarray(self.sat_capacity, dtype=int).reshape(-1)
        self.bs_background = _per_node(self.bs_background, len(self.bs_capacity))
        self.sat_background = _per_node(self.sat_background, len(self.sat_capacity))
        for cap, bg in ((self.bs_capacity, self.bs_background), (self.sat_capacity, self.sat_background)):
            if np.any(bg < 0) or np.any(bg > cap[:, None]):
                raise ValueError("background load must lie in [0, capacity]")

    def residual(self, n_slots: int):
        """Remaining connections (psi - eta) per node and slot: ((N, T), (M, T))."""
        bs = self.bs_capacity[:, None] - np.broadcast_to(self.bs_background, (len(self.bs_capacity), n_slots))
        sat = self.sat_capacity[:, None] - np.broadcast_to(self.sat_background, (len(self.sat_capacity), n_slots))
        return bs, sat

    def background(self, n_slots: int):
        return (np.broadcast_to(self.bs_background, (len(self.bs_capacity), n_slots)),
                np.broadcast_to(self.sat_background, (len(self.sat_capacity), n_slots)))


@dataclass
class PowerAllocation:
    p_bs: np.ndarray  # W per connection, (N,)
    p_sat: np.ndarray  # (M,)

    @classmethod
    def uniform(cls, bs_max_power, bs_capacity, sat_max_power, sat_capacity) -> "PowerAllocation":
        """Split each node's maximum power evenly over its capacity."""
        return cls(np.asarray(bs_max_power, float) / np.asarray(bs_capacity, float),
                   np.asarray(sat_max_power, float) / np.asarray(sat_capacity, float))


class Violation(NamedTuple):
    constraint: str
    indices: tuple
    slack: float


def check_feasibility(v: AssociationVars, c: CapacityProfile, tol: float = 1e-9) -> list[Violation]:
    """All violated instances of (C1)-(C5); empty when the association is feasible."""
    a, b = np.asarray(v.alpha, float), np.asarray(v.beta, float)
    n_slots = a.shape[2]
    res_bs, res_sat = c.residual(n_slots)
    out = []
    per_ue_bs = a.sum(axis=0)  # (K, T)
    per_ue_sat = b.sum(axis=0)
    for k, t in zip(*np.nonzero(per_ue_bs > 1 + tol)):
        out.append(Violation("C1", (int(k), int(t)), float(1 - per_ue_bs[k, t])))
    load_bs = a.sum(axis=1)  # (N, T)
    for n, t in zip(*np.nonzero(load_bs > res_bs + tol)):
        out.append(Violation("C2", (int(n), int(t)), float(res_bs[n, t] - load_bs[n, t])))
    for k, t in zip(*np.nonzero(per_ue_sat > 1 + tol)):
        out.append(Violation("C3", (int(k), int(t)), float(1 - per_ue_sat[k, t])))
    load_sat = b.sum(axis=1)
    for m, t in zip(*np.nonzero(load_sat > res_sat + tol)):
        out.append(Violation("C4", (int(m), int(t)), float(res_sat[m, t] - load_sat[m, t])))
    conn = per_ue_bs + per_ue_sat
    for k, t in zip(*np.nonzero(conn < 1 - tol)):
        out.append(Violation("C5", (int(k), int(t)), float(conn[k, t] - 1)))
    return out


def cross_interference(v: AssociationVars, ch: ChannelTensor, pw: PowerAllocation, c: CapacityProfile):
    """Interference on BS links from satellites and on satellite links from BSs, each (K, T).

    Each interferer radiates its per-connection power once per connection it
    carries, background load included.
    """
    n_slots = ch.h.shape[2]
    bg_bs, bg_sat = c.background(n_slots)
    load_sat = bg_sat + np.asarray(v.beta, float).sum(axis=1)  # (M, T)
    load_bs = bg_bs + np.asarray(v.alpha, float).sum(axis=1)  # (N, T)
    i_on_bs = np.einsum("mt,m,mkt->kt", load_sat, pw.p_sat, ch.g)
    i_on_sat = np.einsum("nt,n,nkt->kt", load_bs, pw.p_bs, ch.h)
    return i_on_bs, i_on_sat


def sinr_all(v: AssociationVars, ch: ChannelTensor, pw: PowerAllocation, c: CapacityProfile):
    """SINR of every BS link (N, K, T) and satellite link (M, K, T)."""
    i_bs, i_sat = cross_interference(v, ch, pw, c)
    g_bs = np.asarray(v.alpha, float) * pw.p_bs[:, None, None] * ch.h / (i_bs + ch.noise_power)[None]
    g_sat = np.asarray(v.beta, float) * pw.p_sat[:, None, None] * ch.g / (i_sat + ch.noise_power)[None]
    return g_bs, g_sat


def sinr_bs(v, ch, pw, c, n, k, t) -> float:
    g_bs, _ = sinr_all(v, ch, pw, c)
    return float(g_bs[n, k, t])


def sinr_sat(v, ch, pw, c, m, k, t) -> float:
    _, g_sat = sinr_all(v, ch, pw, c)
    return float(g_sat[m, k, t])


def rate_matrix(v, ch, pw, c) -> np.ndarray:
    """Per-UE throughput (K, T) in bit/s/Hz."""
    g_bs, g_sat = sinr_all(v, ch, pw, c)
    return np.log2(1.0 + g_bs).sum(axis=0) + np.log2(1.0 + g_sat).sum(axis=0)


def ue_rate(v, ch, pw, c, k, t) -> float:
    return float(rate_matrix(v, ch, pw, c)[k, t])


def sum_rate(v, ch, pw, c) -> float:
    """Objective of the max-SR problem: total throughput over all UEs and slots."""
    r = rate_matrix(v, ch, pw, c)
    # fixed reduction order: slots, then UEs
    return float(np.sum(np.sum(r, axis=1)))


# ---------------------------------------------------------------------------
# audit CSV: one row per active link

def association_to_csv(v: AssociationVars) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["side", "node", "ue", "slot"])
    for side, arr in (("bs", v.alpha), ("sat", v.beta)):
        for node, ue, slot in zip(*np.nonzero(np.asarray(arr) >= 0.5)):
            w.writerow([side, int(node), int(ue), int(slot)])
    return buf.getvalue()


def association_from_csv(text: str, n: int, m: int, k: int, t: int) -> AssociationVars:
    v = AssociationVars.zeros(n, m, k, t)
    for row in csv.DictReader(io.StringIO(text)):
        arr = v.alpha if row["side"] == "bs" else v.beta
        arr[int(row["node"]), int(row["ue"]), int(row["slot"])] = 1
    return v

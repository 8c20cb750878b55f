"""Greedy max-gain link selection baseline, slot by slot and side by side."""
from __future__ import annotations

import numpy as np

from .channel import ChannelTensor
from .sysmodel import AssociationVars, CapacityProfile


def _greedy_side(gain: np.ndarray, residual: np.ndarray, min_gain: float | None) -> np.ndarray:
    """Assign UEs (columns) to nodes (rows) of one gain matrix by repeated global argmax."""
    n, k = gain.shape
    out = np.zeros((n, k), dtype=int)
    avail = np.ones((n, k), dtype=bool)
    if min_gain is not None:
        avail &= gain >= min_gain
    used = np.zeros(n, dtype=int)
    while avail.any():
        masked = np.where(avail, gain, -np.inf)
        # np.argmax returns the first maximum: smallest (node, ue) in row-major order
        node, ue = np.unravel_index(int(np.argmax(masked)), masked.shape)
        if residual[node] - used[node] > 0:
            out[node, ue] = 1
            used[node] += 1
            avail[:, ue] = False
        else:
            avail[node, :] = False
    return out


def greedy_assign(ch: ChannelTensor, c: CapacityProfile, min_gain: float | None = None) -> AssociationVars:
    """Per slot, BSs first then satellites: take the strongest remaining link if the node has room.

    Zero-gain links stay eligible unless ``min_gain`` masks them.
    """
    n, m, k, t_n = ch.shape
    res_bs, res_sat = c.residual(t_n)
    alpha = np.zeros((n, k, t_n), dtype=int)
    beta = np.zeros((m, k, t_n), dtype=int)
    for t in range(t_n):
        if n and k:
            alpha[:, :, t] = _greedy_side(ch.h[:, :, t], res_bs[:, t], min_gain)
        if m and k:
            beta[:, :, t] = _greedy_side(ch.g[:, :, t], res_sat[:, t], min_gain)
    return AssociationVars(alpha, beta)

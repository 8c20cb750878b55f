"""Successive convex approximation for max sum-rate link selection.

Each outer iteration maximizes a concave minorant of the relaxed sum rate.  The
rate slacks (lambda) and log-interference slacks (mu) of the convexified
constraints are eliminated in closed form: for fixed (alpha, beta) the best mu
sits on the tangent constraint, mu* = mu_i - 1 + (I + sigma^2) exp(-mu_i), and
lambda = ln(signal + I + sigma^2) - mu*.  What remains per slot is

    F(x) = sum_j ln(D_j x + e_j) + w . x + const

over the relaxed association polytope, solved with a batched log-barrier Newton
method (all slots advance together; no constraint couples slots).

Internally powers are expressed in units of the noise power so the numbers
stay O(1); mu values at the API boundary are natural logs of watts.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .channel import ChannelTensor
from .greedy import greedy_assign
from .sysmodel import (AssociationVars, CapacityProfile, PowerAllocation, check_feasibility,
                       cross_interference, rate_matrix)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaConfig:
    outer_tol: float = 1e-4
    max_outer: int = 50
    inner_tol: float = 1e-7
    barrier_start: float = 1.0  # initial barrier weight 1/tau
    barrier_decrease: float = 0.2
    armijo: float = 1e-4
    shrink: float = 0.5
    max_newton: int = 60
    rounding_threshold: float = 0.5

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class RelaxedVars:
    alpha: np.ndarray
    beta: np.ndarray


@dataclass
class SlackVars:
    lambda_b: np.ndarray  # (N, K, T)
    lambda_s: np.ndarray  # (M, K, T)
    mu_b: np.ndarray  # (K, T)
    mu_s: np.ndarray


@dataclass
class LinearizationPoint:
    mu_b: np.ndarray  # (K, T) natural log of watts
    mu_s: np.ndarray


def init_linearization(ch: ChannelTensor, pw: PowerAllocation, c: CapacityProfile,
                       start: AssociationVars | None = None) -> LinearizationPoint:
    """Log cross-interference plus noise seen by each UE at the greedy association."""
    if start is None:
        start = greedy_assign(ch, c)
    i_bs, i_sat = cross_interference(start, ch, pw, c)
    return LinearizationPoint(np.log(i_bs + ch.noise_power), np.log(i_sat + ch.noise_power))


# ---------------------------------------------------------------------------
# subproblem

@dataclass
class Subproblem:
    """Per-slot data of the eliminated subproblem, batched along the first axis (T)."""
    n: int
    m: int
    k: int
    D: np.ndarray  # (T, J, V)
    e: np.ndarray  # (T, J)
    w: np.ndarray  # (T, V)
    const: np.ndarray  # (T,)
    A: np.ndarray  # (R, V)
    b: np.ndarray  # (T, R)
    row_active: np.ndarray  # (T, R)
    free: np.ndarray  # (T, V)
    c5_rows: slice
    mu_b_i: np.ndarray  # normalized linearization points (T, K)
    mu_s_i: np.ndarray
    c_s: np.ndarray  # normalized constant denominators (T, K) of BS links
    c_b: np.ndarray  # ... of satellite links
    p: np.ndarray  # normalized per-connection received powers (T, N, K)
    q: np.ndarray  # (T, M, K)
    log_noise: float
    c5_dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_assoc_vars(self) -> int:
        return (self.n + self.m) * self.k * self.D.shape[0]

    @property
    def n_lambda(self) -> int:
        return self.n_assoc_vars

    @property
    def n_mu(self) -> int:
        return 2 * self.k * self.D.shape[0]

    @property
    def n_nonlinear_constraints(self) -> int:
        return (self.n + self.m + 2) * self.k * self.D.shape[0]

    # -- variable packing -------------------------------------------------
    def pack(self, alpha, beta) -> np.ndarray:
        """(N, K, T), (M, K, T) -> (T, V)."""
        a = np.moveaxis(np.asarray(alpha, float), 2, 0).reshape(alpha.shape[2], -1)
        b = np.moveaxis(np.asarray(beta, float), 2, 0).reshape(beta.shape[2], -1)
        return np.concatenate([a, b], axis=1)

    def unpack(self, x):
        t = x.shape[0]
        nk = self.n * self.k
        alpha = np.moveaxis(x[:, :nk].reshape(t, self.n, self.k), 0, 2)
        beta = np.moveaxis(x[:, nk:].reshape(t, self.m, self.k), 0, 2)
        return alpha, beta

    # -- objective ----------------------------------------------------------
    def slot_objective(self, x) -> np.ndarray:
        """Eliminated objective per slot, i.e. the sum of optimal lambdas."""
        z = np.matmul(self.D, x[:, :, None])[..., 0] + self.e
        return np.log(z).sum(axis=1) + np.einsum("tv,tv->t", self.w, x) + self.const

    def objective(self, alpha, beta) -> float:
        return float(np.sum(self.slot_objective(self.pack(alpha, beta))))

    def optimal_slacks(self, alpha, beta) -> SlackVars:
        """Closed-form lambda and mu (original units) at a given association."""
        a = np.moveaxis(np.asarray(alpha, float), 2, 0)  # (T, N, K)
        b = np.moveaxis(np.asarray(beta, float), 2, 0)
        i_s = np.einsum("tm,tmk->tk", b.sum(axis=2), self.q)  # on BS links
        i_b = np.einsum("tn,tnk->tk", a.sum(axis=2), self.p)
        mu_b = self.mu_b_i - 1.0 + (i_s + self.c_s) * np.exp(-self.mu_b_i)
        mu_s = self.mu_s_i - 1.0 + (i_b + self.c_b) * np.exp(-self.mu_s_i)
        lam_b = np.log(a * self.p + (i_s + self.c_s)[:, None, :]) - mu_b[:, None, :]
        lam_s = np.log(b * self.q + (i_b + self.c_b)[:, None, :]) - mu_s[:, None, :]
        return SlackVars(np.moveaxis(lam_b, 0, 2), np.moveaxis(lam_s, 0, 2),
                         (mu_b + self.log_noise).T, (mu_s + self.log_noise).T)

    def constraint_values(self, alpha, beta, slacks: SlackVars):
        """Margins (>= 0 when satisfied) of the four convexified rate families.

        Returns (log_bs (N,K,T), tangent_bs (K,T), log_sat (M,K,T), tangent_sat (K,T)).
        Tangent margins are relative to the noise power.
        """
        a = np.moveaxis(np.asarray(alpha, float), 2, 0)
        b = np.moveaxis(np.asarray(beta, float), 2, 0)
        i_s = np.einsum("tm,tmk->tk", b.sum(axis=2), self.q)
        i_b = np.einsum("tn,tnk->tk", a.sum(axis=2), self.p)
        mu_b = slacks.mu_b.T - self.log_noise
        mu_s = slacks.mu_s.T - self.log_noise
        lam_b = np.moveaxis(slacks.lambda_b, 2, 0)
        lam_s = np.moveaxis(slacks.lambda_s, 2, 0)
        log_bs = np.log(a * self.p + (i_s + self.c_s)[:, None, :]) - lam_b - mu_b[:, None, :]
        log_sat = np.log(b * self.q + (i_b + self.c_b)[:, None, :]) - lam_s - mu_s[:, None, :]
        tan_bs = np.exp(self.mu_b_i) * (mu_b - self.mu_b_i + 1.0) - (i_s + self.c_s)
        tan_sat = np.exp(self.mu_s_i) * (mu_s - self.mu_s_i + 1.0) - (i_b + self.c_b)
        return (np.moveaxis(log_bs, 0, 2), tan_bs.T, np.moveaxis(log_sat, 0, 2), tan_sat.T)


def build_subproblem(lin: LinearizationPoint, ch: ChannelTensor, pw: PowerAllocation,
                     c: CapacityProfile) -> Subproblem:
    """Assemble the convex surrogate around the linearization point ``lin``."""
    n, m, k, t_n = ch.shape
    sigma2 = ch.noise_power
    p = np.moveaxis(pw.p_bs[:, None, None] * ch.h / sigma2, 2, 0)  # (T, N, K)
    q = np.moveaxis(pw.p_sat[:, None, None] * ch.g / sigma2, 2, 0)  # (T, M, K)
    bg_bs, bg_sat = c.background(t_n)
    c_s = np.einsum("mt,tmk->tk", bg_sat.astype(float), q) + 1.0
    c_b = np.einsum("nt,tnk->tk", bg_bs.astype(float), p) + 1.0
    mu_b = np.asarray(lin.mu_b, float).T - math.log(sigma2)  # (T, K)
    mu_s = np.asarray(lin.mu_s, float).T - math.log(sigma2)
    if not (np.all(np.isfinite(mu_b)) and np.all(np.isfinite(mu_s))):
        raise ValueError("linearization point must be finite")

    nk, mk = n * k, m * k
    v = nk + mk
    D = np.zeros((t_n, v, v))
    ar_n, ar_m = np.arange(nk), np.arange(mk)
    D[:, ar_n, ar_n] = p.reshape(t_n, nk)
    D[:, nk + ar_m, nk + ar_m] = q.reshape(t_n, mk)
    if n and m:
        # BS term (n, k) sees q[m, k] on every beta[m, k']
        D[:, :nk, nk:] = np.broadcast_to(np.swapaxes(q, 1, 2)[:, None, :, :, None],
                                         (t_n, n, k, m, k)).reshape(t_n, nk, mk)
        D[:, nk:, :nk] = np.broadcast_to(np.swapaxes(p, 1, 2)[:, None, :, :, None],
                                         (t_n, m, k, n, k)).reshape(t_n, mk, nk)
    e = np.concatenate([np.repeat(c_s[:, None, :], n, axis=1).reshape(t_n, nk),
                        np.repeat(c_b[:, None, :], m, axis=1).reshape(t_n, mk)], axis=1)
    eb, es = np.exp(-mu_b), np.exp(-mu_s)
    w_alpha = -m * np.einsum("tk,tnk->tn", es, p)  # same for every k'
    w_beta = -n * np.einsum("tk,tmk->tm", eb, q)
    w = np.concatenate([np.repeat(w_alpha[:, :, None], k, axis=2).reshape(t_n, nk),
                        np.repeat(w_beta[:, :, None], k, axis=2).reshape(t_n, mk)], axis=1)
    const = (-n * (mu_b - 1.0 + c_s * eb) - m * (mu_s - 1.0 + c_b * es)).sum(axis=1)

    A, b, row_active, free, c5 = _polytope(ch, c, n, m, k, t_n)
    return Subproblem(n, m, k, D, e, w, const, A, b, row_active, free, c5, mu_b, mu_s, c_s, c_b, p, q,
                      math.log(sigma2))


def _polytope(ch, c, n, m, k, t_n):
    """Rows: x <= 1, -x <= 0, C1, C3, C2, C4, C5 (as -sum <= -1)."""
    nk, mk = n * k, m * k
    v = nk + mk
    blocks = [np.eye(v), -np.eye(v)]
    c1 = np.zeros((k, v))
    c3 = np.zeros((k, v))
    for u in range(k):
        c1[u, np.arange(n) * k + u] = 1.0
        c3[u, nk + np.arange(m) * k + u] = 1.0
    c2 = np.zeros((n, v))
    for i in range(n):
        c2[i, i * k:(i + 1) * k] = 1.0
    c4 = np.zeros((m, v))
    for j in range(m):
        c4[j, nk + j * k:nk + (j + 1) * k] = 1.0
    c5 = -(c1 + c3)
    A = np.concatenate(blocks + [c1, c3, c2, c4, c5])
    res_bs, res_sat = c.residual(t_n)
    b = np.concatenate([np.ones((t_n, v)), np.zeros((t_n, v)), np.ones((t_n, 2 * k)),
                        res_bs.T.astype(float), res_sat.T.astype(float), -np.ones((t_n, k))], axis=1)

    # variables pinned to zero: dead channel or no residual capacity
    gain_ok = np.concatenate([np.moveaxis(ch.h, 2, 0).reshape(t_n, nk) > 0,
                              np.moveaxis(ch.g, 2, 0).reshape(t_n, mk) > 0], axis=1)
    cap_ok = np.concatenate([np.repeat(res_bs.T[:, :, None] > 0, k, axis=2).reshape(t_n, nk),
                             np.repeat(res_sat.T[:, :, None] > 0, k, axis=2).reshape(t_n, mk)], axis=1)
    free = gain_ok & cap_ok
    row_active = (np.abs(A)[None, :, :] * free[:, None, :]).sum(axis=2) > 0
    c5 = slice(A.shape[0] - k, A.shape[0])
    return A, b, row_active, free, c5


# ---------------------------------------------------------------------------
# inner solver

def _interior_point(sp: Subproblem, hint: np.ndarray | None):
    """Strictly feasible start per slot from a max-margin LP, blended with ``hint``.

    Slots whose C5 rows admit no strict interior get those rows switched off.
    """
    t_n, v = sp.free.shape
    x0 = np.zeros((t_n, v))
    dropped = np.zeros(t_n, dtype=bool)
    for t in range(t_n):
        fr = np.nonzero(sp.free[t])[0]
        if fr.size == 0:
            continue
        for attempt in range(2):
            rows = np.nonzero(sp.row_active[t])[0]
            A = sp.A[np.ix_(rows, fr)]
            # maximize margin s: A x + s <= b, s <= 0.5
            res = linprog(np.r_[np.zeros(fr.size), -1.0], A_ub=np.c_[A, np.ones(rows.size)],
                          b_ub=sp.b[t, rows], bounds=[(None, None)] * fr.size + [(None, 0.5)],
                          method="highs")
            if res.status == 0 and -res.fun > 1e-7:
                break
            if attempt == 0:
                sp.row_active[t, sp.c5_rows] = False
                dropped[t] = True
        else:
            raise RuntimeError(f"slot {t}: relaxed polytope has no interior")
        x = np.zeros(v)
        x[fr] = res.x[:-1]
        if hint is not None:
            cand = 0.9 * x + 0.1 * np.where(sp.free[t], hint[t], 0.0)
            if np.all((sp.b[t] - sp.A @ cand)[sp.row_active[t]] > 0):
                x = cand
        x0[t] = x
    sp.c5_dropped = dropped
    return x0


def _barrier_value(sp, x, tau):
    s = sp.b - x @ sp.A.T
    z = np.matmul(sp.D, x[:, :, None])[..., 0] + sp.e
    with np.errstate(invalid="ignore", divide="ignore"):
        bar = np.where(sp.row_active, np.log(np.where(s > 0, s, np.nan)), 0.0).sum(axis=1)
        obj = np.log(np.where(z > 0, z, np.nan)).sum(axis=1) + np.einsum("tv,tv->t", sp.w, x) + sp.const
    val = -tau * obj - bar
    return np.where(np.isfinite(val), val, np.inf)


def solve_subproblem(sp: Subproblem, cfg: ScaConfig = ScaConfig(), x0: np.ndarray | None = None,
                     hint: np.ndarray | None = None):
    """Maximize the eliminated surrogate; returns (RelaxedVars, SlackVars, objective, info)."""
    t_n, v = sp.free.shape
    if x0 is None:
        x0 = _interior_point(sp, hint)
    x = x0.copy()
    fixed = ~sp.free
    n_rows = sp.row_active.sum(axis=1)
    eye = np.eye(v)
    degraded = np.zeros(t_n, dtype=bool)
    newton_steps = 0
    if v == 0 or t_n == 0:
        alpha, beta = sp.unpack(x)
        return RelaxedVars(alpha, beta), sp.optimal_slacks(alpha, beta), 0.0, {"degraded": degraded,
                                                                               "newton_steps": 0}

    tau = 1.0 / cfg.barrier_start
    while True:
        done = np.zeros(t_n, dtype=bool)
        for _ in range(cfg.max_newton):
            s = sp.b - x @ sp.A.T
            z = np.matmul(sp.D, x[:, :, None])[..., 0] + sp.e
            with np.errstate(divide="ignore", invalid="ignore"):
                inv_s = np.where(sp.row_active, 1.0 / s, 0.0)
            grad = -tau * (np.matmul((1.0 / z)[:, None, :], sp.D)[:, 0] + sp.w) + inv_s @ sp.A
            dz = sp.D / z[:, :, None]
            a_s = sp.A[None] * inv_s[:, :, None]
            hess = tau * np.matmul(dz.transpose(0, 2, 1), dz) + np.matmul(a_s.transpose(0, 2, 1), a_s)
            grad[fixed] = 0.0
            hess *= sp.free[:, :, None] & sp.free[:, None, :]
            hess += fixed[:, :, None] * eye[None]
            dx = -np.linalg.solve(hess, grad[..., None])[..., 0]
            dec2 = -np.einsum("tv,tv->t", grad, dx)
            done |= dec2 / 2.0 <= 1e-10
            if done.all():
                break
            # largest step keeping every active row strictly feasible
            adx = dx @ sp.A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where((adx > 0) & sp.row_active, s / adx, np.inf)
            step = np.minimum(1.0, 0.99 * ratio.min(axis=1))
            f0 = _barrier_value(sp, x, tau)
            # slack for roundoff in barrier values that grow with tau
            slack = 1e-13 * np.abs(f0)
            pending = ~done
            for _ in range(60):
                ok = _barrier_value(sp, x + step[:, None] * dx, tau) <= f0 - cfg.armijo * step * dec2 + slack
                pending &= ~ok
                if not pending.any():
                    break
                step = np.where(pending, step * cfg.shrink, step)
            move = ~done & ~pending
            x = np.where(move[:, None], x + step[:, None] * dx, x)
            newton_steps += 1
            stalled = pending | (move & (step * np.abs(dx).max(axis=1) < 1e-14))
            degraded |= stalled & (dec2 / 2.0 > 1e-6)
            done |= stalled
        f = sp.slot_objective(x)
        gap = n_rows / tau
        if np.all(gap <= cfg.inner_tol * np.maximum(1.0, np.abs(f))):
            break
        tau /= cfg.barrier_decrease
    x = np.where(fixed, 0.0, np.clip(x, 0.0, 1.0))
    alpha, beta = sp.unpack(x)
    obj = float(np.sum(sp.slot_objective(x)))
    info = {"degraded": degraded, "newton_steps": newton_steps, "x": x}
    return RelaxedVars(alpha, beta), sp.optimal_slacks(alpha, beta), obj, info


# ---------------------------------------------------------------------------
# rounding and repair

def round_binary(r: RelaxedVars, threshold: float = 0.5) -> AssociationVars:
    return AssociationVars((np.asarray(r.alpha) >= threshold).astype(int),
                           (np.asarray(r.beta) >= threshold).astype(int))


def repair_feasibility(v: AssociationVars, ch: ChannelTensor, pw: PowerAllocation, c: CapacityProfile):
    """Make a rounded association satisfy (C1)-(C5) where capacity allows.

    Returns (association, flagged) with ``flagged`` the (ue, slot) pairs that
    could not be connected for lack of capacity.
    """
    out = v.copy()
    a, b = out.alpha, out.beta
    n, m, k, t_n = ch.shape
    res_bs, res_sat = c.residual(t_n)
    flagged = []
    for t in range(t_n):
        for arr, gain in ((a, ch.h), (b, ch.g)):
            for u in range(k):
                on = np.nonzero(arr[:, u, t])[0]
                if on.size > 1:
                    # keep the strongest link; ties go to the lower index
                    keep = on[np.argmax(gain[on, u, t])]
                    arr[:, u, t] = 0
                    arr[keep, u, t] = 1
        for arr, gain, res in ((a, ch.h, res_bs), (b, ch.g, res_sat)):
            for node in range(arr.shape[0]):
                on = np.nonzero(arr[node, :, t])[0]
                excess = on.size - max(int(res[node, t]), 0)
                if excess > 0:
                    order = on[np.argsort(gain[node, on, t], kind="stable")]
                    arr[node, order[:excess], t] = 0
        for u in range(k):
            if a[:, u, t].sum() + b[:, u, t].sum() >= 1:
                continue
            best, best_val = None, -np.inf
            # compare sides by received power per connection
            for side, arr, gain, res, pwr in (("bs", a, ch.h, res_bs, pw.p_bs), ("sat", b, ch.g, res_sat, pw.p_sat)):
                for node in range(arr.shape[0]):
                    if arr[node, :, t].sum() < res[node, t] and pwr[node] * gain[node, u, t] > best_val:
                        best, best_val = (arr, node), pwr[node] * gain[node, u, t]
            if best is None:
                flagged.append((u, t))
            else:
                best[0][best[1], u, t] = 1
    return out, flagged


# ---------------------------------------------------------------------------
# outer loop

@dataclass
class SolveTrace:
    subproblem_objective: list = field(default_factory=list)  # nats
    relaxed_sum_rate: list = field(default_factory=list)  # bit/s/Hz
    wall_time: list = field(default_factory=list)
    degraded: list = field(default_factory=list)
    converged: bool = False
    flagged: list = field(default_factory=list)
    c5_relaxed_slots: list = field(default_factory=list)
    relaxed: RelaxedVars | None = None

    @property
    def n_iterations(self) -> int:
        return len(self.subproblem_objective)


def relaxed_sum_rate(r: RelaxedVars, ch, pw, c) -> float:
    return float(np.sum(rate_matrix(AssociationVars(r.alpha, r.beta), ch, pw, c)))


def sca_solve(ch: ChannelTensor, pw: PowerAllocation, c: CapacityProfile, cfg: ScaConfig = ScaConfig()):
    """Outer SCA loop, then rounding at 1/2 and feasibility repair.

    Returns (AssociationVars, SolveTrace).
    """
    n, m, k, t_n = ch.shape
    trace = SolveTrace()
    if k == 0 or t_n == 0 or n + m == 0:
        trace.converged = True
        return AssociationVars.zeros(n, m, k, t_n), trace
    start = greedy_assign(ch, c)
    lin = init_linearization(ch, pw, c, start)
    x0 = None
    prev = None
    t_start = time.perf_counter()
    for it in range(cfg.max_outer):
        sp = build_subproblem(lin, ch, pw, c)
        if x0 is None:
            x0 = _interior_point(sp, sp.pack(start.alpha, start.beta))
            dropped = sp.c5_dropped
            trace.c5_relaxed_slots = [int(t) for t in np.nonzero(dropped)[0]]
        else:
            sp.row_active[dropped, sp.c5_rows] = False
        relaxed, slacks, obj, info = solve_subproblem(sp, cfg, x0=x0)
        trace.subproblem_objective.append(obj)
        trace.relaxed_sum_rate.append(relaxed_sum_rate(relaxed, ch, pw, c))
        trace.wall_time.append(time.perf_counter() - t_start)
        trace.degraded.append(bool(info["degraded"].any()))
        trace.relaxed = relaxed
        lin = LinearizationPoint(slacks.mu_b, slacks.mu_s)
        if prev is not None and abs(obj - prev) <= cfg.outer_tol * max(1.0, abs(prev)):
            trace.converged = True
            break
        prev = obj
    binary = round_binary(trace.relaxed, cfg.rounding_threshold)
    repaired, flagged = repair_feasibility(binary, ch, pw, c)
    trace.flagged = flagged
    if flagged:
        log.warning("%d (ue, slot) pairs left unconnected for lack of capacity", len(flagged))
    return repaired, trace

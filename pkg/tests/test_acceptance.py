"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import itertools
import json
import math
import time

import numpy as np
import pytest

from istn import cli
from istn.antenna import SatPattern, UePattern, sat_gain, ue_gain
from istn.channel import ChannelTensor, NoiseModel, blocked_by, fspl_db, noise_power, sat_positions_enu
from istn.config import build_scenario, load_config, reference_sweep_overrides
from istn.experiments import emit_heatmaps, run_scenario, scenario_channel, solve_both, sweep_power
from istn.greedy import greedy_assign
from istn.sca import build_subproblem, init_linearization, sca_solve
from istn.scene import SatelliteOrbit
from istn.sysmodel import AssociationVars, CapacityProfile, PowerAllocation, check_feasibility, sinr_all, sum_rate

SIGMA2 = 6.69e-14


# -- 1 ----------------------------------------------------------------------

def test_bounds_hold(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    z, zi = rng.uniform(-30, 30, (2, 100_000))
    lhs = np.exp(z)
    tangent_bad = int(np.sum(lhs - np.exp(zi) * (z - zi + 1) < -1e-9 * np.maximum(1.0, lhs)))

    lower_bad = 0
    for _ in range(1000):
        n, m, k, t = rng.integers(1, 4), rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 3)
        ch = ChannelTensor(10 ** rng.uniform(-14, -11, (n, k, t)), 10 ** rng.uniform(-14, -12, (m, k, t)), SIGMA2)
        c = CapacityProfile(np.full(n, 3), np.full(m, 3), rng.integers(0, 2, (n, t)), rng.integers(0, 2, (m, t)))
        pw = PowerAllocation(np.full(n, 0.8), np.full(m, 0.5))
        lin = init_linearization(ch, pw, c, AssociationVars(rng.random((n, k, t)), rng.random((m, k, t))))
        sp = build_subproblem(lin, ch, pw, c)
        alpha, beta = rng.random((n, k, t)), rng.random((m, k, t))
        sl = sp.optimal_slacks(alpha, beta)
        # move off the optimum into the interior of the convexified set
        sl.mu_b = sl.mu_b + rng.exponential(0.5, sl.mu_b.shape)
        sl.mu_s = sl.mu_s + rng.exponential(0.5, sl.mu_s.shape)
        ref = sp.optimal_slacks(alpha, beta)
        sl.lambda_b = ref.lambda_b - (sl.mu_b - ref.mu_b)[None] - rng.exponential(0.2, sl.lambda_b.shape)
        sl.lambda_s = ref.lambda_s - (sl.mu_s - ref.mu_s)[None] - rng.exponential(0.2, sl.lambda_s.shape)
        assert all(np.all(mg >= -1e-9) for mg in sp.constraint_values(alpha, beta, sl))
        g_b, g_s = sinr_all(AssociationVars(alpha, beta), ch, pw, c)
        lower_bad += int(np.sum(sl.lambda_b > np.log1p(g_b) + 1e-9) + np.sum(sl.lambda_s > np.log1p(g_s) + 1e-9))
    dt = time.perf_counter() - t0
    ok = tangent_bad == 0 and lower_bad == 0 and dt < 10
    verdict("1 tangent/lower bounds", ok,
            f"tangent violations {tangent_bad}/100000, lambda violations {lower_bad} over 1000 points, {dt:.1f} s")


# -- 2 ----------------------------------------------------------------------

@pytest.mark.slow
def test_sca_monotone_and_converges(verdict):
    t0 = time.perf_counter()
    worst_drop, iters, all_conv = 0.0, [], True
    for p_sat in (14.0, 16.0, 18.0, 20.0):  # 16 dBW is the default scenario
        sc = build_scenario(load_config({"constellation": {"max_power_dbw": p_sat}}))
        _, trace = sca_solve(scenario_channel(sc), sc.power, sc.capacity, sc.solver)
        obj = np.array(trace.subproblem_objective)
        rel = np.diff(obj) / np.maximum(1.0, np.abs(obj[:-1]))
        worst_drop = min(worst_drop, float(rel.min()) if rel.size else 0.0)
        iters.append(trace.n_iterations)
        all_conv &= trace.converged and trace.n_iterations <= 30
    dt = time.perf_counter() - t0
    ok = worst_drop >= -1e-7 and all_conv and dt < 180
    verdict("2 SCA monotone + convergence", ok,
            f"iterations {iters} for P_sat 14/16/18/20 dBW, worst relative drop {worst_drop:.2e}, {dt:.0f} s")


# -- 3 ----------------------------------------------------------------------

def _tiny(rng):
    n, m, k, t = (int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 4)),
                  int(rng.integers(1, 3)))
    ch = ChannelTensor(10 ** rng.uniform(-14, -11, (n, k, t)), 10 ** rng.uniform(-14, -12, (m, k, t)), SIGMA2)
    c = CapacityProfile(rng.integers(1, 3, n), rng.integers(1, 3, m), np.zeros((n, t)), np.zeros((m, t)))
    return ch, PowerAllocation(np.full(n, 0.8), np.full(m, 0.5)), c


def _slot_optimum(ch, pw, c, t):
    """Best feasible binary association of one slot by enumeration (None if none is feasible)."""
    n, m, k, _ = ch.shape
    sub = ChannelTensor(ch.h[:, :, t:t + 1], ch.g[:, :, t:t + 1], ch.noise_power)
    cap = CapacityProfile(c.bs_capacity, c.sat_capacity, c.bs_background[:, t:t + 1], c.sat_background[:, t:t + 1])
    best = None
    for bs in itertools.product(range(-1, n), repeat=k):
        for sat in itertools.product(range(-1, m), repeat=k):
            v = AssociationVars.zeros(n, m, k, 1)
            for u in range(k):
                if bs[u] >= 0:
                    v.alpha[bs[u], u, 0] = 1
                if sat[u] >= 0:
                    v.beta[sat[u], u, 0] = 1
            if check_feasibility(v, cap):
                continue
            sr = sum_rate(v, sub, pw, cap)
            best = sr if best is None or sr > best else best
    return best


def _sufficient(c, k):
    res_b, res_s = c.residual(c.bs_background.shape[1])
    return bool(np.all(res_b.sum(axis=0) >= k) and np.all(res_s.sum(axis=0) >= k))


def test_tiny_instances_against_enumeration(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    hits, scored, greedy_bad, sufficient = 0, 0, 0, 0
    for _ in range(100):
        ch, pw, c = _tiny(rng)
        n, m, k, t_n = ch.shape
        slot_opt = [_slot_optimum(ch, pw, c, t) for t in range(t_n)]
        v, _ = sca_solve(ch, pw, c)
        if all(o is not None for o in slot_opt):
            scored += 1
            hits += sum_rate(v, ch, pw, c) >= 0.9 * sum(slot_opt)
        else:
            # no association meets every constraint: counted as a miss
            scored += 1
        if _sufficient(c, k):
            sufficient += 1
            greedy_bad += bool(check_feasibility(greedy_assign(ch, c), c))
    dt = time.perf_counter() - t0
    ok = hits >= 80 and greedy_bad == 0 and dt < 120
    verdict("3 enumeration oracle", ok,
            f"SCA >= 90% of optimum on {hits}/{scored}, greedy infeasible on {greedy_bad}/{sufficient} "
            f"sufficient-capacity instances, {dt:.0f} s")


# -- 4 ----------------------------------------------------------------------

@pytest.mark.slow
def test_sca_beats_greedy(verdict):
    t0 = time.perf_counter()
    wins, gaps = 0, []
    for seed in range(1, 21):
        sc = build_scenario(load_config(seed=seed))
        ch = scenario_channel(sc)
        assert ch.shape == (9, 2, 4, 60)
        sca, greedy, _ = solve_both(sc, ch)
        s, g = sum_rate(sca, ch, sc.power, sc.capacity), sum_rate(greedy, ch, sc.power, sc.capacity)
        wins += s >= g
        gaps.append(s - g)
    dt = time.perf_counter() - t0
    ok = wins >= 18 and dt < 1200
    verdict("4 SCA >= greedy", ok,
            f"{wins}/20 seeds, median gap {np.median(gaps):.1f} bit/s/Hz, min gap {min(gaps):.1f}, {dt:.0f} s")


# -- 5 ----------------------------------------------------------------------

@pytest.mark.slow
def test_bs_power_sweep_dips(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(reference_sweep_overrides())
    values = [30.0, 33.0, 36.0, 39.0, 42.0, 45.0]
    rows = sweep_power(cfg, "bs", values, tmp_path)
    sr = [r[1] for r in rows]
    dt = time.perf_counter() - t0
    dip = any(sr[i] < sr[0] and sr[-1] > sr[i] for i in range(len(sr)))
    ok = dip and dt < 600
    verdict("5 BS power sweep trend", ok,
            "SCA SR " + ", ".join(f"{s:.1f}" for s in sr) + f" over {values[0]:.0f}-{values[-1]:.0f} dBm, {dt:.0f} s")


# -- 6 ----------------------------------------------------------------------

def test_unit_values(verdict):
    t0 = time.perf_counter()
    sp = SatPattern()
    theta_null = math.asin(3.8317059702075125 * sp.wavelength / (2 * math.pi * sp.aperture_radius))
    checks = {
        "fspl": abs(float(fspl_db(100.0, 3.4e9)) - 83.07736156) <= 1e-6,
        "noise": abs(10 * math.log10(noise_power(NoiseModel(20e6, 1.2, 150.0))) + 131.74) <= 0.01,
        "sat null": sat_gain(sp, theta_null) == pytest.approx(sp.max_gain + sp.floor),
        "ue boresight": abs(ue_gain(UePattern(), 0.0, 0.0) - 12.0) <= 0.05,
        "period": abs(SatelliteOrbit(altitude=500e3).period - 5677.0) <= 1.0,
    }
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 5
    verdict("6 unit checks", ok, ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in checks.items()) + f", {dt:.2f} s")


# -- 7 ----------------------------------------------------------------------

@pytest.mark.slow
def test_heatmap_shadowing(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = load_config()
    grids = emit_heatmaps(cfg, [0], tmp_path)
    sc = build_scenario(cfg)
    ntn = grids[(0, "ntn")]
    per_seg = cfg["experiment"]["heatmap"]["points_per_segment"]
    shape_ok = ntn.shape == (sc.city.n_rows * per_seg, sc.city.n_cols * per_seg)

    t = float(sc.grid.midpoints[0])
    sats = sat_positions_enu(sc.orbits, [t], sc.city.origin)[:, 0]
    sw, sd = sc.city.segment_size_m
    rng = np.random.default_rng(707)
    rows = rng.integers(0, ntn.shape[0], 3000)
    cols = rng.integers(0, ntn.shape[1], 3000)
    shadowed, clear = [], []
    inside = sc.city.boxes
    for r, c in zip(rows, cols):
        p = np.array([(c + 0.5) / per_seg * sw, (r + 0.5) / per_seg * sd, cfg["experiment"]["heatmap"]["height"]])
        if np.any((inside[:, 0] <= p[0]) & (p[0] <= inside[:, 2]) & (inside[:, 1] <= p[1]) & (p[1] <= inside[:, 3])):
            continue  # indoor receivers are neither
        blocked = [len(blocked_by(sc.city, p, s)) > 0 for s in sats]
        if all(blocked):
            shadowed.append(ntn[r, c])
        elif not any(blocked):
            clear.append(ntn[r, c])
    n_pts = len(shadowed) + len(clear)
    sep = float(np.mean(clear) - np.mean(shadowed)) if shadowed and clear else float("nan")
    dt = time.perf_counter() - t0
    ok = shape_ok and n_pts >= 500 and sep >= 3.0 and dt < 300
    verdict("7 heatmap shadowing", ok,
            f"grid {ntn.shape}, {len(shadowed)} shadowed / {len(clear)} LoS points, "
            f"mean NTN CINR gap {sep:.1f} dB, {dt:.0f} s")


# -- 8 ----------------------------------------------------------------------

def _artifacts(path):
    files = {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}
    return files, json.loads((path / "manifest.json").read_text())["files"]


@pytest.mark.slow
def test_reruns_are_byte_identical(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": {"heatmap": {"points_per_segment": 30}}}))
    commands = [["run"], ["sweep", "--side", "sat", "--values", "14", "20"], ["heatmap", "--slots", "0", "59"],
                ["timeline", "--ue", "2"], ["pattern-dump"]]
    same = []
    for cmd in commands:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd[0]}_{rep}"
            assert cli.main(cmd + ["--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
            outs.append(_artifacts(out))
        same.append(outs[0] == outs[1])
    dt = time.perf_counter() - t0
    ok = all(same)
    verdict("8 determinism", ok,
            ", ".join(f"{c[0]} {'identical' if s else 'DIFFERS'}" for c, s in zip(commands, same)) + f", {dt:.0f} s")

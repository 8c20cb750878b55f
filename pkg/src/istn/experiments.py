"""Experiment drivers: full runs, power sweeps, CINR heatmaps and timelines.

Every driver writes plain files (CSV, PGM, JSON) into an output directory and
finishes with ``manifest.json``.  All data files are a pure function of the
configuration; the manifest alone carries timestamps and wall times.
"""
from __future__ import annotations

import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .antenna import pattern_cut
from .channel import (ChannelTensor, GridSpec, cinr_grid, compute_channel_tensor, noise_power, received_powers,
                      ue_positions)
from .config import Scenario, build_scenario, channel_options, config_hash
from .greedy import greedy_assign
from .sca import SolveTrace, sca_solve
from .sysmodel import association_to_csv, rate_matrix, sum_rate

PGM_RANGE_DB = (-20.0, 30.0)


@dataclass
class RunArtifacts:
    out_dir: Path
    files: list = field(default_factory=list)
    sr_sca: float = 0.0
    sr_greedy: float = 0.0
    trace: SolveTrace | None = None
    flagged: list = field(default_factory=list)
    channel: ChannelTensor | None = None
    timings: dict = field(default_factory=dict)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write(out: Path, name: str, text: str, files: list) -> None:
    (out / name).write_text(text)
    files.append(name)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out: Path, cfg: dict, files: list, timings: dict | None = None) -> Path:
    digests = {name: hashlib.sha256((out / name).read_bytes()).hexdigest() for name in sorted(set(files))}
    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "code_version": _code_version(),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "timings_s": timings or {},
        "files": digests,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def scenario_channel(sc: Scenario) -> ChannelTensor:
    return compute_channel_tensor(sc.city, sc.sites, sc.orbits, sc.routes, sc.grid, sc.patterns, sc.options,
                                  sc.noise)


def solve_both(sc: Scenario, ch: ChannelTensor):
    greedy = greedy_assign(ch, sc.capacity, sc.min_gain)
    sca, trace = sca_solve(ch, sc.power, sc.capacity, sc.solver)
    return sca, greedy, trace


# ---------------------------------------------------------------------------
# run

def run_scenario(cfg: dict, out_dir, *, manifest: bool = True) -> RunArtifacts:
    """Scene, channel tensors, both algorithms, tables, association CSVs, trace."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list = []
    t0 = time.perf_counter()
    sc = build_scenario(cfg)
    ch = scenario_channel(sc)
    t1 = time.perf_counter()
    sca, greedy, trace = solve_both(sc, ch)
    t2 = time.perf_counter()
    sr_sca = sum_rate(sca, ch, sc.power, sc.capacity)
    sr_greedy = sum_rate(greedy, ch, sc.power, sc.capacity)

    _write(out, "config.json", json.dumps(cfg, indent=2, sort_keys=True) + "\n", files)
    _write(out, "sum_rate.csv", _csv([["sca", _fmt(sr_sca)], ["greedy", _fmt(sr_greedy)]],
                                     ["algorithm", "sum_rate_bps_hz"]), files)
    rows = []
    for name, v in (("sca", sca), ("greedy", greedy)):
        r = rate_matrix(v, ch, sc.power, sc.capacity)
        rows += [[name, k, t, _fmt(r[k, t])] for k in range(r.shape[0]) for t in range(r.shape[1])]
    _write(out, "ue_rates.csv", _csv(rows, ["algorithm", "ue", "slot", "rate_bps_hz"]), files)
    _write(out, "association_sca.csv", association_to_csv(sca), files)
    _write(out, "association_greedy.csv", association_to_csv(greedy), files)
    _write(out, "trace.csv", trace_csv(trace), files)
    _write(out, "flagged.csv", _csv(trace.flagged, ["ue", "slot"]), files)

    timings = {"channel": t1 - t0, "solve": t2 - t1,
               "sca_iterations": [round(w, 6) for w in trace.wall_time]}
    if manifest:
        write_manifest(out, cfg, files, timings)
    return RunArtifacts(out, files, sr_sca, sr_greedy, trace, list(trace.flagged), ch, timings)


def trace_csv(trace: SolveTrace) -> str:
    rows = [[i + 1, _fmt(o), _fmt(r), int(d)] for i, (o, r, d) in
            enumerate(zip(trace.subproblem_objective, trace.relaxed_sum_rate, trace.degraded))]
    return _csv(rows, ["iteration", "subproblem_objective_nats", "relaxed_sum_rate_bps_hz", "degraded"])


# ---------------------------------------------------------------------------
# sweep

def with_power(cfg: dict, side: str, value: float) -> dict:
    out = copy.deepcopy(cfg)
    if side == "bs":
        out["terrestrial"]["max_power_dbm"] = float(value)
    elif side == "sat":
        out["constellation"]["max_power_dbw"] = float(value)
    else:
        raise ValueError("side must be 'bs' or 'sat'")
    return out


def _sweep_point(args):
    cfg, side, value = args
    sc = build_scenario(with_power(cfg, side, value))
    ch = scenario_channel(sc)
    sca, greedy, trace = solve_both(sc, ch)
    return (sum_rate(sca, ch, sc.power, sc.capacity), sum_rate(greedy, ch, sc.power, sc.capacity),
            association_to_csv(sca), association_to_csv(greedy), trace)


def trend_summary(values, sr) -> dict:
    """Location of the smallest sum rate and whether it is an interior dip."""
    sr = np.asarray(sr, float)
    if sr.size == 0:
        return {"argmin": None, "interior_minimum": False}
    i = int(np.argmin(sr))
    dip = bool(sr[i] < sr[0] and sr[-1] > sr[i])
    return {"argmin": i, "min_power": float(values[i]), "interior_minimum": dip}


def sweep_power(cfg: dict, side: str, values, out_dir, *, workers: int = 1, manifest: bool = True):
    """One full solve per power value; returns the table rows (power, SR_sca, SR_greedy)."""
    values = [float(v) for v in values]
    if values != sorted(values):
        raise ValueError("sweep values must be sorted")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, side, v) for v in values]
    t0 = time.perf_counter()
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    files: list = []
    rows = []
    for i, (v, (s, g, a_sca, a_gr, trace)) in enumerate(zip(values, results)):
        rows.append((v, s, g))
        _write(out, f"association_sca_{i:02d}.csv", a_sca, files)
        _write(out, f"association_greedy_{i:02d}.csv", a_gr, files)
        _write(out, f"trace_{i:02d}.csv", trace_csv(trace), files)
    unit = "dbm" if side == "bs" else "dbw"
    _write(out, "sweep.csv", _csv([[_fmt(v), _fmt(s), _fmt(g)] for v, s, g in rows],
                                  [f"power_{unit}", "sr_sca", "sr_greedy"]), files)
    summary = {"side": side, "values": values, "sca": trend_summary(values, [r[1] for r in rows]),
               "greedy": trend_summary(values, [r[2] for r in rows])}
    _write(out, "sweep_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", files)
    if manifest:
        write_manifest(out, cfg, files, {"sweep": time.perf_counter() - t0})
    return rows


# ---------------------------------------------------------------------------
# heatmaps and timelines

def to_pgm(grid_db: np.ndarray, lo: float = PGM_RANGE_DB[0], hi: float = PGM_RANGE_DB[1]) -> bytes:
    """8-bit binary PGM; north up, so the south-to-north rows are flipped."""
    x = np.nan_to_num(np.asarray(grid_db, float), nan=lo, neginf=lo, posinf=hi)
    pix = np.clip(np.round((x - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)[::-1]
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()


def _matrix_csv(m: np.ndarray) -> str:
    return "\n".join(",".join(f"{v:.6f}" for v in row) for row in m) + "\n"


def map_options(cfg: dict):
    return channel_options(cfg["channel"], reflections=cfg["experiment"]["heatmap"]["reflections"])


def emit_heatmaps(cfg: dict, slots, out_dir, *, manifest: bool = True) -> dict:
    """TN and NTN CINR grids per slot, plus a sidecar CSV of the UE route points."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_scenario(cfg)
    hm = cfg["experiment"]["heatmap"]
    spec = GridSpec(points_per_segment=hm["points_per_segment"], height=hm["height"])
    opts = map_options(cfg)
    files: list = []
    grids = {}
    for slot in slots:
        if not 0 <= slot < sc.grid.n_slots:
            raise ValueError(f"slot {slot} outside the time grid")
        t = float(sc.grid.midpoints[slot])
        for side in ("tn", "ntn"):
            g = cinr_grid(sc.city, sc.sites, sc.orbits, spec, t, side, sc.patterns, opts, sc.noise)
            grids[(slot, side)] = g
            _write(out, f"cinr_{side}_t{slot:03d}.csv", _matrix_csv(g), files)
            (out / f"cinr_{side}_t{slot:03d}.pgm").write_bytes(to_pgm(g))
            files.append(f"cinr_{side}_t{slot:03d}.pgm")
    pos = ue_positions(sc.routes, sc.grid)
    rows = [[k, t, f"{pos[k, t, 0]:.6f}", f"{pos[k, t, 1]:.6f}"] for k in range(pos.shape[0])
            for t in range(pos.shape[1])]
    _write(out, "routes.csv", _csv(rows, ["ue", "slot", "x_m", "y_m"]), files)
    if manifest:
        write_manifest(out, cfg, files)
    return grids


def cinr_timeline(cfg: dict, ue: int):
    """Per-link CINR (dB) of one UE at every slot: ((T, N), (T, M))."""
    sc = build_scenario(cfg)
    if not 0 <= ue < len(sc.routes):
        raise ValueError(f"UE {ue} does not exist")
    opts = map_options(cfg)
    pos = ue_positions(sc.routes[ue:ue + 1], sc.grid)[0]
    sigma2 = noise_power(sc.noise)
    tn, ntn = [], []
    for t, tm in enumerate(sc.grid.midpoints):
        bs, sat = received_powers(sc.city, sc.sites, sc.orbits, pos[t:t + 1], float(tm), sc.patterns, opts)
        bs, sat = bs[:, 0], sat[:, 0]
        with np.errstate(divide="ignore"):
            tn.append(10.0 * np.log10(bs / (sat.sum() + sigma2)))
            ntn.append(10.0 * np.log10(sat / (bs.sum() + sigma2)))
    return np.array(tn).reshape(len(pos), -1), np.array(ntn).reshape(len(pos), -1)


def emit_cinr_timeline(cfg: dict, ue: int, out_dir, *, manifest: bool = True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tn, ntn = cinr_timeline(cfg, ue)
    header = ["slot"] + [f"bs{n}_db" for n in range(tn.shape[1])] + [f"sat{m}_db" for m in range(ntn.shape[1])]
    rows = [[t] + [_fmt(v) for v in tn[t]] + [_fmt(v) for v in ntn[t]] for t in range(tn.shape[0])]
    files: list = []
    _write(out, f"cinr_timeline_ue{ue}.csv", _csv(rows, header), files)
    if manifest:
        write_manifest(out, cfg, files)
    return tn, ntn


def pattern_dump(cfg: dict, out_dir, *, manifest: bool = True) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_scenario(cfg)
    files: list = []
    for kind, pat, label in (("sat", sc.patterns.sat, "off_boresight_deg"), ("bs", sc.patterns.bs, "azimuth_deg"),
                             ("ue", sc.patterns.ue, "zenith_deg")):
        cut = pattern_cut(kind, pat)
        _write(out, f"pattern_{kind}.csv", _csv([[f"{a:.4f}", f"{g:.6f}"] for a, g in cut], [label, "gain_dbi"]),
               files)
    if manifest:
        write_manifest(out, cfg, files)
    return files

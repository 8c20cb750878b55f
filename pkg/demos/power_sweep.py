"""Sweep the BS transmit power and print how the sum rate responds.

Raising BS power helps terrestrial links but also raises interference seen by
satellite users sharing the band, so the curve need not be monotone.

    python demos/power_sweep.py [out_dir]
"""
import sys
from pathlib import Path

from istn.config import load_config, reference_sweep_overrides
from istn.experiments import sweep_power, trend_summary

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/sweep")
cfg = load_config(reference_sweep_overrides())
values = [30.0, 35.0, 40.0, 45.0]
rows = sweep_power(cfg, "bs", values, out)
for p, sca, greedy in rows:
    print(f"{p:5.1f} dBm  SCA {sca:7.1f}  greedy {greedy:7.1f}")
print(trend_summary(values, [r[1] for r in rows]))

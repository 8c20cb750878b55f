"""Draw TN and NTN CINR maps for one slot and report how buildings shade the sky.

    python demos/shadowing_maps.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from istn.config import load_config
from istn.experiments import emit_heatmaps

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/maps")
cfg = load_config({"scene": {"extent": [0.005, 0.01]}, "experiment": {"heatmap": {"points_per_segment": 40}}})
grids = emit_heatmaps(cfg, [0], out)

for side in ("tn", "ntn"):
    g = grids[(0, side)]
    print(f"{side.upper():3s} CINR  median {np.median(g):6.1f} dB  "
          f"p10 {np.percentile(g, 10):6.1f}  p90 {np.percentile(g, 90):6.1f}")
better = np.mean(grids[(0, "ntn")] > grids[(0, "tn")])
print(f"satellite link is the stronger one at {100 * better:.0f}% of the map")
print(f"PGM images in {out} (open with any image viewer)")

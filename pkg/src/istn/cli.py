"""Command-line entry point: ``istn {run,sweep,heatmap,timeline,pattern-dump}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema

from . import experiments
from .config import load_config
from .scene import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario file (merged over the defaults)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="istn", description="Satellite-terrestrial link selection experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="solve one scenario with SCA and greedy")
    sw = sub.add_parser("sweep", parents=[common], help="sum rate versus maximum transmit power")
    sw.add_argument("--side", choices=["bs", "sat"])
    sw.add_argument("--values", type=float, nargs="+", help="dBm for bs, dBW for sat")
    sw.add_argument("--workers", type=int, default=1)
    hm = sub.add_parser("heatmap", parents=[common], help="CINR maps on the receiver grid")
    hm.add_argument("--slots", type=int, nargs="+")
    tl = sub.add_parser("timeline", parents=[common], help="per-link CINR of one UE over the slots")
    tl.add_argument("--ue", type=int)
    sub.add_parser("pattern-dump", parents=[common], help="principal cuts of the antenna patterns")
    return p


def _load(args):
    user = json.loads(args.config.read_text()) if args.config else {}
    return load_config(user, seed=args.seed)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        print(f"config error at {path}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except (json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    exp = cfg["experiment"]
    try:
        if args.command == "run":
            res = experiments.run_scenario(cfg, args.out)
            print(f"sum rate  sca={res.sr_sca:.4f}  greedy={res.sr_greedy:.4f}  "
                  f"iterations={res.trace.n_iterations}")
            if res.flagged:
                slots = sorted({t for _, t in res.flagged})
                print(f"capacity infeasible in slots {slots}", file=sys.stderr)
                return EXIT_CAPACITY
        elif args.command == "sweep":
            side = args.side or exp["sweep"]["side"]
            values = args.values or exp["sweep"]["values"]
            rows = experiments.sweep_power(cfg, side, values, args.out, workers=args.workers)
            for v, s, g in rows:
                print(f"{v:8.2f}  sca={s:.4f}  greedy={g:.4f}")
        elif args.command == "heatmap":
            experiments.emit_heatmaps(cfg, args.slots or exp["heatmap"]["slots"], args.out)
        elif args.command == "timeline":
            ue = exp["timeline"]["ue"] if args.ue is None else args.ue
            experiments.emit_cinr_timeline(cfg, ue, args.out)
        elif args.command == "pattern-dump":
            experiments.pattern_dump(cfg, args.out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

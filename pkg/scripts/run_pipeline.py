"""Full experiment: simulate the rigs, fit the actuator model, train the three
baselines, write the evaluation table and time the 12-joint predictor.

    python scripts/run_pipeline.py --out runs/default --seed 0
    python scripts/run_pipeline.py --config configs/default.json --archs mlp

With all three baselines at 1000 iterations this takes roughly eight minutes
on one core; ``--archs mlp`` finishes in about a minute.
"""

from __future__ import annotations

import argparse
import json
import time

from hydrodyn.config import RunConfig, load_config
from hydrodyn.pipeline import run_pipeline


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--config", help="run configuration JSON (defaults built in)")
    ap.add_argument("--out", default="runs/default")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--archs", nargs="+", help="subset of baselines to train")
    ap.add_argument("--no-bench", action="store_true")
    args = ap.parse_args(argv)

    cfg = load_config(args.config) if args.config else RunConfig()
    t0 = time.perf_counter()
    res = run_pipeline(cfg, args.out, seed=args.seed, run_bench=not args.no_bench,
                       archs=tuple(args.archs) if args.archs else None)
    print((res.files[0].parent / "table3.txt").read_text())
    print(json.dumps(res.summary, indent=2, sort_keys=True))
    print(f"wall time {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()

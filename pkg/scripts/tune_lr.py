"""Select each baseline's learning rate from the 5-point grid.

Each architecture is trained for the full iteration budget at every grid
value on the default training log and scored on the held-out log; the
lowest held-out RMSE wins. The winners are printed as a dict ready to paste
into ``hydrodyn.baselines.DEFAULT_LR``.
"""

from __future__ import annotations

import argparse
import json

import numpy as np

from hydrodyn import baselines, nets
from hydrodyn.config import RunConfig
from hydrodyn.errors import DivergedError
from hydrodyn.metrics import thresholded_metrics
from hydrodyn.pipeline import simulate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--archs", nargs="+", default=list(nets.ARCHS))
    ap.add_argument("--iters", type=int, default=1000)
    args = ap.parse_args(argv)

    cfg = RunConfig()
    train_log = simulate(cfg, cfg.train_scenario)
    hold = simulate(cfg, cfg.holdout_scenario)
    X, T = baselines.dataset_from_log(train_log)
    best = {}
    for arch in args.archs:
        scores = {}
        for lr in baselines.LR_GRID:
            try:
                net = baselines.train(nets.init_net(arch, cfg.baselines.seed), X, T,
                                      iters=args.iters, lr=lr)
                scores[lr] = thresholded_metrics(baselines.predict_next(net, hold),
                                                 hold.tau[1:]).rmse_all
            except DivergedError as e:
                scores[lr] = np.inf
                print(f"{arch} lr={lr}: {e}")
            print(f"{arch} lr={lr}: held-out RMSE {scores[lr]:.3f}", flush=True)
        best[arch] = min(scores, key=scores.get)
    print(json.dumps(best))


if __name__ == "__main__":
    main()

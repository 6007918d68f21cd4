"""Command-line entry point: ``hydrodyn <subcommand> [options]``.

Exit status is 0 on success, 1 for invalid input (bad arguments, config,
file layout) and 2 when a valid run fails (rank-deficient fit, diverged
training). Every subcommand writes only inside its ``--out`` directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import baselines, nets
from .actuator import load_coeffs, save_coeffs
from .bench import bench_latency
from .config import RunConfig, config_from_dict
from .errors import HydrodynError
from .log import parse_trajectory_csv, write_log
from .metrics import quadrant_stats, table3_report
from .pipeline import (analytic_predictor, model_label, net_predictor, rigs_for, run_pipeline,
                       simulate)
from .rewards import RobotState, term_map
from .sysid import fit_log, format_report

log = logging.getLogger("hydrodyn")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route it to our validation code instead
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _load_cfg(args) -> RunConfig:
    base = {} if args.config is None else json.loads(Path(args.config).read_text())
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(base, key, value)
    return config_from_dict(base)


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(path)


# --- subcommands -----------------------------------------------------------------

def cmd_simulate(args) -> None:
    cfg = _load_cfg(args)
    out = _out(args)
    tlog = simulate(cfg, args.scenario, args.seed)
    write_log(tlog, out / f"log_{args.scenario}.csv")
    print(out / f"log_{args.scenario}.csv")


def cmd_fit(args) -> None:
    cfg = _load_cfg(args)
    tlog = parse_trajectory_csv(args.log)
    R = [rp.R for rp in rigs_for(cfg)][:tlog.n_joints]
    coeffs, reports = fit_log(tlog, R, ridge=cfg.fitting.ridge)
    out = _out(args)
    save_coeffs(out / "coeffs.json", coeffs)
    print(out / "coeffs.json")
    _write(out / "fit_report.txt", format_report(reports) + "\n")
    _write(out / "fit_report.json", json.dumps([r.to_dict() for r in reports], indent=2) + "\n")


def cmd_train(args) -> None:
    cfg = _load_cfg(args)
    tlog = parse_trajectory_csv(args.log)
    X, T = baselines.dataset_from_log(tlog)
    iters = args.iters if args.iters is not None else cfg.baselines.iters
    lr = args.lr if args.lr is not None else cfg.baselines.lr.get(args.arch)
    net = baselines.train(nets.init_net(args.arch, args.seed), X, T, iters=iters, lr=lr)
    out = _out(args)
    baselines.save_weights(net, out / f"{args.arch}.weights")
    print(out / f"{args.arch}.weights")


def cmd_eval(args) -> None:
    models = {}
    if args.coeffs:
        models[model_label("analytic")] = analytic_predictor(load_coeffs(args.coeffs))
    for path in args.weights or []:
        net = baselines.load_weights(path)
        models[model_label(net.arch)] = net_predictor(net)
    if not models:
        raise UsageError("eval needs --coeffs and/or --weights")
    logs = {Path(p).stem: parse_trajectory_csv(p) for p in args.log}
    table = table3_report(models, logs, thresh=args.thresh)
    out = _out(args)
    _write(out / "table3.txt", table.to_text())
    _write(out / "table3.csv", table.to_csv())
    print(table.to_text(), end="")


def cmd_dist(args) -> None:
    tlog = parse_trajectory_csv(args.log)
    qs = quadrant_stats(tlog, bins=(args.bins, args.bins))
    out = _out(args)
    stats = {"opposite_fraction": qs.opposite_fraction, "n_total": qs.n_total}
    _write(out / "dist.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    _write(out / "hist.csv", qs.to_csv())


def cmd_bench(args) -> None:
    cfg = _load_cfg(args)
    coeffs = load_coeffs(args.coeffs)
    iters = args.iters if args.iters is not None else cfg.bench.iters
    stats = bench_latency(coeffs, iters, args.seed, cfg.bench.batch)
    out = _out(args)
    _write(out / "bench.json", json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"median {stats.median:.1f} ns, p99 {stats.p99:.1f} ns per 12-joint call")


def cmd_rewards(args) -> None:
    cfg = _load_cfg(args)
    try:
        state = RobotState.from_json(Path(args.state).read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"{args.state}: invalid JSON ({e})") from None
    out = _out(args)
    _write(out / "terms.json", json.dumps(term_map(state, cfg.rewards), indent=2) + "\n")


def cmd_pipeline(args) -> None:
    cfg = _load_cfg(args)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    res = run_pipeline(cfg, _out(args), run_bench=not args.no_bench)
    for p in res.files:
        print(p)


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hydrodyn", description="Hydraulic actuator model toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def add(name, func, help_, config=True, seed=False):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", default="out", help="output directory")
        if config:
            p.add_argument("--config", help="run configuration JSON")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config entry, e.g. baselines.iters=200")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        return p

    p = add("simulate", cmd_simulate, "run the oracle rigs under PID and write a log CSV", seed=True)
    p.add_argument("--scenario", default="train")

    p = add("fit", cmd_fit, "fit per-joint coefficients from a log")
    p.add_argument("--log", required=True)

    p = add("train-baseline", cmd_train, "train an MLP/LSTM/GRU baseline on a log", seed=True)
    p.add_argument("--arch", required=True, choices=nets.ARCHS)
    p.add_argument("--log", required=True)
    p.add_argument("--iters", type=int)
    p.add_argument("--lr", type=float)

    p = add("eval", cmd_eval, "score models on logs and write the report table", config=False)
    p.add_argument("--log", required=True, action="append", help="log CSV (repeatable)")
    p.add_argument("--coeffs", help="coefficient JSON for the analytic model")
    p.add_argument("--weights", action="append", help="baseline weights file (repeatable)")
    p.add_argument("--thresh", type=float, default=50.0)

    p = add("dist", cmd_dist, "torque/displacement quadrant statistics of a log", config=False)
    p.add_argument("--log", required=True)
    p.add_argument("--bins", type=int, default=64)

    p = add("bench", cmd_bench, "latency of the 12-joint predictor", seed=True)
    p.add_argument("--coeffs", required=True)
    p.add_argument("--iters", type=int)

    p = add("rewards-check", cmd_rewards, "evaluate every reward term for a state JSON")
    p.add_argument("--state", required=True)

    p = add("pipeline", cmd_pipeline, "simulate, fit, train, evaluate and benchmark")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-bench", action="store_true")
    return ap


def run_command(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise UsageError(ap.format_usage().rstrip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"hydrodyn: {e}", file=sys.stderr)
        return EXIT_INVALID
    except json.JSONDecodeError as e:
        print(f"hydrodyn: invalid JSON: {e}", file=sys.stderr)
        return EXIT_INVALID
    except HydrodynError as e:
        print(f"hydrodyn: {e}", file=sys.stderr)
        return EXIT_RUNTIME if isinstance(e, RuntimeError) else EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()

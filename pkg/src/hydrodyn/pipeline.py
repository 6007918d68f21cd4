"""simulate -> fit -> train -> eval -> dist -> bench, driven by a RunConfig."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines, nets
from .actuator import ActuatorCoeffs, predict_log, save_coeffs
from .bench import bench_latency
from .config import RunConfig, Scenario, dump_config
from .log import TrajectoryLog, write_log
from .metrics import quadrant_stats, table3_report, thresholded_metrics
from .nets import NetParams
from .scenarios import JOINT_TYPES, N_JOINTS, SynthConfig, synthesize_log
from .sysid import fit_log, format_report

log = logging.getLogger(__name__)


def rigs_for(cfg: RunConfig):
    return [cfg.rigs[JOINT_TYPES[j % 3]] for j in range(N_JOINTS)]


def simulate(cfg: RunConfig, name: str, seed_offset: int | None = None) -> TrajectoryLog:
    """Synthesize the named scenario; ``seed_offset`` defaults to the config seed."""
    sc: Scenario = cfg.scenarios[name]
    synth = SynthConfig(profile=sc.profile, loop=cfg.loop, gains=cfg.position_gains,
                        cylinder=cfg.cylinder, tau_noise=sc.tau_noise, q_noise=sc.q_noise)
    off = cfg.seed if seed_offset is None else seed_offset
    tlog = synthesize_log(synth, sc.duration, seed=sc.seed + 1000 * off, rigs=rigs_for(cfg))
    tlog.meta["scenario"] = name
    return tlog


def analytic_predictor(coeffs: list[ActuatorCoeffs]):
    def predict(tlog: TrajectoryLog) -> np.ndarray:
        cols = [predict_log(coeffs[j], tlog.q[:-1, j], tlog.q_des[:-1, j], tlog.qd[:-1, j],
                            tlog.tau[:-1, j]) for j in range(tlog.n_joints)]
        return np.column_stack(cols)
    return predict


def net_predictor(net: NetParams):
    return lambda tlog: baselines.predict_next(net, tlog)


def model_label(arch: str) -> str:
    return {"analytic": "Actuator model", "mlp": "MLP", "lstm": "LSTM", "gru": "GRU"}[arch]


@dataclass
class PipelineResult:
    coeffs: list[ActuatorCoeffs]
    nets: dict[str, NetParams]
    summary: dict
    files: list[Path] = field(default_factory=list)


def _rmse(pred, actual) -> float:
    return thresholded_metrics(pred, actual).rmse_all


def run_pipeline(cfg: RunConfig, out_dir, seed: int | None = None, run_bench: bool = True,
                 archs: tuple[str, ...] | None = None) -> PipelineResult:
    """Run every stage and write artifacts to ``out_dir``.

    Everything written is a deterministic function of (config, seed) except
    the timing fields of ``bench.json``.
    """
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def emit(name: str, text: str) -> None:
        p = out / name
        p.write_text(text)
        files.append(p)

    emit("config.json", dump_config(cfg))

    names = [cfg.train_scenario, cfg.holdout_scenario, cfg.ood_scenario, *cfg.eval_scenarios]
    logs: dict[str, TrajectoryLog] = {}
    for name in dict.fromkeys(names):
        logs[name] = simulate(cfg, name)
        write_log(logs[name], out / f"log_{name}.csv")
        files.append(out / f"log_{name}.csv")
    train_log = logs[cfg.train_scenario]

    R = [rp.R for rp in rigs_for(cfg)]
    coeffs, reports = fit_log(train_log, R, ridge=cfg.fitting.ridge)
    save_coeffs(out / "coeffs.json", coeffs)
    files.append(out / "coeffs.json")
    emit("fit_report.txt", format_report(reports) + "\n")
    emit("fit_report.json", json.dumps([r.to_dict() for r in reports], indent=2) + "\n")

    archs = cfg.baselines.archs if archs is None else archs
    trained: dict[str, NetParams] = {}
    X, T = baselines.dataset_from_log(train_log)
    for arch in archs:
        net0 = nets.init_net(arch, cfg.baselines.seed + cfg.seed)
        trained[arch] = baselines.train(net0, X, T, iters=cfg.baselines.iters,
                                        lr=cfg.baselines.lr.get(arch))
        baselines.save_weights(trained[arch], out / f"{arch}.weights")
        files.append(out / f"{arch}.weights")

    predictors = {model_label("analytic"): analytic_predictor(coeffs)}
    predictors.update({model_label(a): net_predictor(n) for a, n in trained.items()})
    eval_logs = {n: logs[n] for n in cfg.eval_scenarios}
    table = table3_report(predictors, eval_logs)
    emit("table3.txt", table.to_text())
    emit("table3.csv", table.to_csv())

    # held-out accuracy and the impact-poor -> impact-rich shift
    hold = logs[cfg.holdout_scenario]
    ood = logs[cfg.ood_scenario]
    summary: dict = {"holdout": {}, "ood": {}}
    hold_rms = float(np.sqrt(np.mean(hold.tau[1:] ** 2)))
    summary["holdout"]["torque_rms"] = hold_rms
    for label, predict in predictors.items():
        r_id = _rmse(predict(hold), hold.tau[1:])
        r_ood = _rmse(predict(ood), ood.tau[1:])
        summary["holdout"][label] = r_id
        summary["ood"][label] = {"rmse_id": r_id, "rmse_ood": r_ood, "ratio": r_ood / r_id}

    dist = {}
    for name in (cfg.train_scenario, cfg.ood_scenario):
        qs = quadrant_stats(logs[name])
        emit(f"hist_{name}.csv", qs.to_csv())
        dist[name] = {"opposite_fraction": qs.opposite_fraction, "n_total": qs.n_total}
    summary["dist"] = dist
    emit("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if run_bench:
        stats = bench_latency(coeffs, cfg.bench.iters, cfg.bench.seed, cfg.bench.batch)
        emit("bench.json", json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n")
        summary["bench"] = stats.to_dict()
    return PipelineResult(coeffs, trained, summary, files)

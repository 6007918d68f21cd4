"""Torque-prediction scoring: RMSE, thresholded RMSE/MAPE, distribution stats, report tables."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ContractError
from .log import TrajectoryLog

THRESHOLD = 50.0  # N·m
UNDEFINED = "undefined"


@dataclass
class MetricsReport:
    rmse_all: float
    rmse_thresh: float | str
    mape_thresh: float | str
    n_total: int
    n_thresh: int
    model: str = ""
    dataset: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def thresholded_metrics(pred, actual, thresh: float = THRESHOLD, model: str = "",
                        dataset: str = "") -> MetricsReport:
    """RMSE over all pairs; RMSE and MAPE (%) over pairs with ``|actual| > thresh``."""
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape or pred.size == 0:
        raise ContractError(f"need equal non-empty lengths, got {pred.size} and {actual.size}")
    err = pred - actual
    rmse_all = float(np.sqrt(np.mean(err * err)))
    mask = np.abs(actual) > thresh
    n_thresh = int(mask.sum())
    if n_thresh == 0:
        return MetricsReport(rmse_all, UNDEFINED, UNDEFINED, pred.size, 0, model, dataset)
    e = err[mask]
    rmse_t = float(np.sqrt(np.mean(e * e)))
    mape_t = float(100.0 * np.mean(np.abs(e) / np.abs(actual[mask])))
    return MetricsReport(rmse_all, rmse_t, mape_t, pred.size, n_thresh, model, dataset)


@dataclass
class QuadrantStats:
    opposite_fraction: float
    counts: np.ndarray        # (nx, ny)
    x_edges: np.ndarray       # bins over q_des - q (rad)
    y_edges: np.ndarray       # bins over tau (N·m)
    n_total: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_x", "bin_y", "x_lo", "x_hi", "y_lo", "y_hi", "count"])
        for i in range(self.counts.shape[0]):
            for j in range(self.counts.shape[1]):
                w.writerow([i, j, repr(float(self.x_edges[i])), repr(float(self.x_edges[i + 1])),
                            repr(float(self.y_edges[j])), repr(float(self.y_edges[j + 1])),
                            int(self.counts[i, j])])
        return buf.getvalue()


def _sym_edges(v: np.ndarray, bins: int, pad: float) -> np.ndarray:
    m = float(np.max(np.abs(v))) if v.size else 0.0
    m = m * (1.0 + pad) if m > 0 else 1.0
    return np.linspace(-m, m, bins + 1)


def quadrant_stats(tlog: TrajectoryLog, bins: tuple[int, int] = (64, 64),
                   pad: float = 0.05) -> QuadrantStats:
    """Share of samples where torque opposes the commanded displacement, plus a 2-D histogram.

    Bins are symmetric about 0 and padded ``pad`` beyond the data extremes.
    """
    dq = np.asarray(tlog.q_des - tlog.q, dtype=float).ravel()
    tau = np.asarray(tlog.tau, dtype=float).ravel()
    if dq.size == 0:
        raise ContractError("empty log")
    opp = float(np.mean(tau * dq < 0))
    xe = _sym_edges(dq, bins[0], pad)
    ye = _sym_edges(tau, bins[1], pad)
    counts, _, _ = np.histogram2d(dq, tau, bins=(xe, ye))
    return QuadrantStats(opp, counts.astype(np.int64), xe, ye, dq.size)


# --- Table-III style report ------------------------------------------------------

Predictor = Callable[[TrajectoryLog], np.ndarray]


@dataclass
class Table3:
    models: list[str]
    datasets: list[str]
    cells: dict  # (model, dataset) -> MetricsReport | "failed"

    def _cell_values(self, m: str, d: str) -> list[str]:
        c = self.cells[(m, d)]
        if isinstance(c, str):
            return [c, c, c]
        return [_fmt(c.rmse_all), _fmt(c.rmse_thresh), _fmt(c.mape_thresh)]

    def to_text(self) -> str:
        w = 10
        name_w = max([len("Models")] + [len(m) for m in self.models]) + 2
        top = " " * name_w + "".join(f"| {d:^{3 * w + 2}}" for d in self.datasets)
        sub = f"{'Models':<{name_w}}" + "".join(
            f"| {'RMSE':>{w}}{'RMSE>50':>{w + 1}}{'MAPE>50%':>{w + 1}}" for _ in self.datasets)
        lines = [top, sub, "-" * len(sub)]
        for m in self.models:
            row = f"{m:<{name_w}}"
            for d in self.datasets:
                a, b, c = self._cell_values(m, d)
                row += f"| {a:>{w}}{b:>{w + 1}}{c:>{w + 1}}"
            lines.append(row)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["model"]
        for d in self.datasets:
            head += [f"{d}:rmse", f"{d}:rmse_thresh", f"{d}:mape_thresh"]
        w.writerow(head)
        for m in self.models:
            row = [m]
            for d in self.datasets:
                row += self._cell_values(m, d)
            w.writerow(row)
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{v:.4g}" if math.isfinite(v) else "nan"


def score_predictor(predict: Predictor, tlog: TrajectoryLog, thresh: float = THRESHOLD,
                    model: str = "", dataset: str = "") -> MetricsReport:
    """``predict(log)`` must return next-step torques for records 0..N-2."""
    pred = np.asarray(predict(tlog))
    return thresholded_metrics(pred, tlog.tau[1:], thresh, model, dataset)


def max_workers() -> int:
    """Parallelism cap from ``HYDRODYN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HYDRODYN_THREADS", "1")))
    except ValueError:
        return 1


def table3_report(models: Mapping[str, Predictor], logs: Mapping[str, TrajectoryLog],
                  thresh: float = THRESHOLD, workers: int | None = None) -> Table3:
    """Score every model on every log; a failing cell is recorded as ``failed``."""

    def cell(key):
        m, d = key
        try:
            return score_predictor(models[m], logs[d], thresh, m, d)
        except Exception:  # noqa: BLE001 - a broken cell must not stop the table
            return "failed"

    keys = [(m, d) for m in models for d in logs]
    workers = max_workers() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(cell, keys))
    else:
        results = [cell(k) for k in keys]
    return Table3(list(models), list(logs), dict(zip(keys, results)))

"""Trajectory logs and their CSV representation.

Column layout: ``t``, then for each joint j ``q_j, q_des_j, qd_j, tau_j``,
then optionally ``ref_j`` for every joint (closed-loop reference channel).
Values are written with 17 significant digits so parse(write(log)) is exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError

DT = 1e-3
CHANNELS = ("q", "q_des", "qd", "tau")


@dataclass
class TrajectoryLog:
    t: np.ndarray
    q: np.ndarray
    q_des: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    reference: np.ndarray | None = None
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]

    def __len__(self) -> int:
        return len(self.t)

    def joint(self, j: int) -> "TrajectoryLog":
        ref = None if self.reference is None else self.reference[:, j:j + 1]
        return TrajectoryLog(self.t, self.q[:, j:j + 1], self.q_des[:, j:j + 1],
                             self.qd[:, j:j + 1], self.tau[:, j:j + 1], ref, self.status)

    def slice(self, start: int, stop: int | None = None) -> "TrajectoryLog":
        sl = slice(start, stop)
        ref = None if self.reference is None else self.reference[sl]
        return TrajectoryLog(self.t[sl], self.q[sl], self.q_des[sl], self.qd[sl],
                             self.tau[sl], ref, self.status, dict(self.meta))


def header(n_joints: int = 12, with_reference: bool = False) -> list[str]:
    cols = ["t"]
    for j in range(n_joints):
        cols += [f"{c}_{j}" for c in CHANNELS]
    if with_reference:
        cols += [f"ref_{j}" for j in range(n_joints)]
    return cols


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_log(log: TrajectoryLog, path) -> None:
    Path(path).write_text(log_to_csv(log))


def log_to_csv(log: TrajectoryLog) -> str:
    J = log.n_joints
    with_ref = log.reference is not None
    blocks = [log.t[:, None]]
    per_joint = np.stack([log.q, log.q_des, log.qd, log.tau], axis=2).reshape(len(log.t), 4 * J)
    blocks.append(per_joint)
    if with_ref:
        blocks.append(log.reference)
    data = np.hstack(blocks)
    buf = io.StringIO()
    buf.write(",".join(header(J, with_ref)) + "\n")
    for row in data:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def parse_trajectory_csv(path, n_joints: int = 12) -> TrajectoryLog:
    """Read a log, validating header, numerics and time monotonicity."""
    with open(path, newline="") as fh:
        return parse_trajectory_text(fh, n_joints)


def parse_trajectory_text(fh, n_joints: int = 12) -> TrajectoryLog:
    reader = csv.reader(fh)
    try:
        cols = next(reader)
    except StopIteration:
        raise SchemaError("empty file") from None
    cols = [c.strip() for c in cols]
    base = header(n_joints, False)
    full = header(n_joints, True)
    if cols != base and cols != full:
        expected = set(full)
        missing = [c for c in base if c not in cols]
        extra = [c for c in cols if c not in expected]
        if missing or extra:
            raise SchemaError(f"bad columns; missing={missing} extra={extra}")
        raise SchemaError(f"columns out of canonical order: {cols}")
    with_ref = cols == full
    width = len(cols)
    rows = []
    prev_t = -math.inf
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != width:
            raise SchemaError(f"line {lineno}: expected {width} fields, got {len(rec)}")
        try:
            vals = [float(v) for v in rec]
        except ValueError:
            raise SchemaError(f"line {lineno}: malformed number") from None
        if not all(math.isfinite(v) for v in vals):
            raise SchemaError(f"line {lineno}: non-finite value")
        if vals[0] <= prev_t:
            raise SchemaError(f"line {lineno}: time not strictly increasing")
        prev_t = vals[0]
        rows.append(vals)
    if not rows:
        raise SchemaError("log has no records")
    data = np.array(rows)
    n = len(data)
    per = data[:, 1:1 + 4 * n_joints].reshape(n, n_joints, 4)
    ref = data[:, 1 + 4 * n_joints:] if with_ref else None
    return TrajectoryLog(data[:, 0], per[:, :, 0].copy(), per[:, :, 1].copy(),
                         per[:, :, 2].copy(), per[:, :, 3].copy(), ref)

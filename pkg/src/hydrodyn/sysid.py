"""Least-squares identification of the actuator coefficients from logs.

The torque model is linear in (k1, k2, k3, k4):

    tau[t+1] - tau[t] = [R^2 dq, -tau, -R^2 qd, R dq max(-tau sgn(dq), 0)] . k
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .actuator import ActuatorCoeffs
from .errors import ContractError, InsufficientExcitation
from .log import DT, TrajectoryLog

log = logging.getLogger(__name__)

COLUMNS = ("k1", "k2", "k3", "k4")
K2_MAX = 0.999
MIN_IMPACT_FRACTION = 0.01


@dataclass
class RegressionProblem:
    features: np.ndarray   # (N, 4)
    targets: np.ndarray    # (N,)
    joint_id: int = 0
    R: float = 0.05
    skipped: int = 0

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != 4:
            raise ContractError(f"features must be (N, 4), got {self.features.shape}")
        if len(self.targets) != len(self.features):
            raise ContractError("features and targets differ in length")
        if len(self.targets) < 4:
            raise ContractError(f"need at least 4 rows, got {len(self.targets)}")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise ContractError("non-finite regression rows")


@dataclass
class FitReport:
    joint_id: int
    coeffs: ActuatorCoeffs
    raw: np.ndarray             # unclamped OLS estimate
    stderr: np.ndarray
    residual_rms: float
    n_rows: int
    impact_fraction: float
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "joint_id": self.joint_id,
            "coeffs": {c: float(v) for c, v in zip(COLUMNS, self._k())},
            "raw": {c: float(v) for c, v in zip(COLUMNS, self.raw)},
            "stderr": {c: (None if not np.isfinite(s) else float(s))
                       for c, s in zip(COLUMNS, self.stderr)},
            "residual_rms": self.residual_rms,
            "n_rows": self.n_rows,
            "impact_fraction": self.impact_fraction,
            "flags": self.flags,
        }

    def _k(self):
        c = self.coeffs
        return (c.k1, c.k2, c.k3, c.k4)


def regression_features(R: float, q, q_des, qd, tau) -> np.ndarray:
    dq = np.asarray(q_des, float) - np.asarray(q, float)
    tau = np.asarray(tau, float)
    imp = np.maximum(-tau * np.sign(dq), 0.0)
    return np.column_stack([R * R * dq, -tau, -R * R * np.asarray(qd, float), R * dq * imp])


def build_regression(tlog: TrajectoryLog, R: float, joint_id: int = 0,
                     dt: float = DT) -> RegressionProblem:
    """One row per pair of consecutive records; pairs spanning a time gap are skipped."""
    if len(tlog) < 2:
        raise ContractError("need at least 2 records")
    j = joint_id
    step = np.diff(tlog.t)
    ok = np.abs(step - dt) <= 1e-6 * dt + 1e-12
    idx = np.nonzero(ok)[0]
    feats = regression_features(R, tlog.q[idx, j], tlog.q_des[idx, j], tlog.qd[idx, j],
                                tlog.tau[idx, j])
    targets = tlog.tau[idx + 1, j] - tlog.tau[idx, j]
    return RegressionProblem(feats, targets, joint_id, R, skipped=int(len(step) - len(idx)))


def _lstsq_qr(X: np.ndarray, y: np.ndarray, ridge: float = 0.0):
    """OLS through a QR factorisation of the column-scaled design matrix.

    Returns (coefficients, standard errors, residuals, rank-deficient column ids).
    """
    n, p = X.shape
    scale = np.sqrt(np.mean(X * X, axis=0))
    dead = scale == 0
    scale[dead] = 1.0
    Xs = X / scale
    if ridge > 0:
        Xs = np.vstack([Xs, np.sqrt(ridge) * np.eye(p)])
        y = np.concatenate([y, np.zeros(p)])
    Q, Rm = np.linalg.qr(Xs, mode="reduced")
    diag = np.abs(np.diag(Rm))
    tol = max(Xs.shape) * np.finfo(float).eps * max(diag.max(), 1.0) * 1e3
    deficient = [i for i in range(p) if dead[i] or diag[i] <= tol]
    if deficient:
        return None, None, None, deficient
    beta_s = np.linalg.solve(Rm, Q.T @ y)
    resid = y[:n] - Xs[:n] @ beta_s
    dof = max(n - p, 1)
    sigma2 = float(resid @ resid) / dof
    Rinv = np.linalg.inv(Rm)
    cov_s = sigma2 * (Rinv @ Rinv.T)
    return beta_s / scale, np.sqrt(np.diag(cov_s)) / scale, resid, []


def fit_coefficients(prob: RegressionProblem, ridge: float = 0.0,
                     min_impact_fraction: float = MIN_IMPACT_FRACTION) -> tuple[ActuatorCoeffs, FitReport]:
    """Fit k1..k4 for one joint.

    k4 is only identified when at least ``min_impact_fraction`` of the rows are
    impact-branch samples; otherwise it is fixed to 0 and flagged. k2 is clamped
    to [0, 0.999] and negative k1/k3/k4 to 0 after the fit.
    """
    X, y = prob.features, prob.targets
    impact_frac = float(np.mean(X[:, 3] != 0.0))
    flags: dict = {}
    cols = [0, 1, 2, 3]
    if impact_frac < min_impact_fraction:
        cols = [0, 1, 2]
        flags["k4"] = "unidentified"
        log.warning("joint %d: %.2f%% impact samples, k4 fixed to 0",
                    prob.joint_id, 100 * impact_frac)
    beta, se, resid, bad = _lstsq_qr(X[:, cols], y, ridge)
    if bad:
        raise InsufficientExcitation([COLUMNS[cols[i]] for i in bad])
    k = np.zeros(4)
    stderr = np.full(4, np.nan)
    k[cols] = beta
    stderr[cols] = se
    raw = k.copy()
    clamped = k.copy()
    clamped[1] = min(max(clamped[1], 0.0), K2_MAX)
    for i in (0, 2, 3):
        clamped[i] = max(clamped[i], 0.0)
    for i, c in enumerate(COLUMNS):
        if clamped[i] != raw[i] and c not in flags:
            flags[c] = "clamped"
    coeffs = ActuatorCoeffs(*clamped, R=prob.R)
    resid_rms = float(np.sqrt(np.mean(resid ** 2)))
    report = FitReport(prob.joint_id, coeffs, raw, stderr, resid_rms, len(y), impact_frac, flags)
    return coeffs, report


def fit_log(tlog: TrajectoryLog, R, ridge: float = 0.0) -> tuple[list[ActuatorCoeffs], list[FitReport]]:
    """Fit every joint of a log; ``R`` is a scalar or one radius per joint."""
    Rs = np.broadcast_to(np.asarray(R, dtype=float), (tlog.n_joints,))
    coeffs, reports = [], []
    for j in range(tlog.n_joints):
        c, r = fit_coefficients(build_regression(tlog, float(Rs[j]), j), ridge=ridge)
        coeffs.append(c)
        reports.append(r)
    return coeffs, reports


def format_report(reports: list[FitReport]) -> str:
    lines = [f"{'joint':>5} {'k1':>12} {'k2':>10} {'k3':>12} {'k4':>10} {'resid_rms':>10} {'impact%':>8} flags"]
    for r in reports:
        c = r.coeffs
        flags = ",".join(f"{k}:{v}" for k, v in r.flags.items())
        lines.append(f"{r.joint_id:>5} {c.k1:12.5g} {c.k2:10.4g} {c.k3:12.5g} {c.k4:10.4g} "
                     f"{r.residual_rms:10.4g} {100 * r.impact_fraction:8.2f} {flags}")
    return "\n".join(lines)

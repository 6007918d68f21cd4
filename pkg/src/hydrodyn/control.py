"""Torque- and position-PID loops around the rig, run at a dual-rate schedule.

The reference is sampled at ``command_rate`` and held (zero-order hold) while
the PID and the physics run at ``inner_rate``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import ConfigError, ContractError
from .log import TrajectoryLog
from .oracle import RigBank


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    i_limit: float = 1.0
    u_limit: float = 5e-4

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ConfigError(f"PID gains must be >= 0: {self}")
        if self.i_limit <= 0 or self.u_limit <= 0:
            raise ConfigError(f"PID limits must be > 0: {self}")


@dataclass
class PidState:
    integral: np.ndarray | float = 0.0
    prev_err: np.ndarray | float = 0.0


# Defaults from scripts/tune_gains.py on the default rig.
DEFAULT_POSITION_GAINS = PidGains(kp=4.0e-3, ki=0.0, kd=0.0, i_limit=0.05, u_limit=5e-4)
DEFAULT_TORQUE_GAINS = PidGains(kp=1.0e-6, ki=0.0, kd=0.0, i_limit=1.0, u_limit=5e-4)


@dataclass(frozen=True)
class LoopConfig:
    mode: Literal["position", "torque"] = "position"
    inner_rate: int = 1000
    command_rate: int = 100
    gains: PidGains = field(default=DEFAULT_POSITION_GAINS)
    qd_bound: float = 50.0

    def __post_init__(self):
        if self.mode not in ("position", "torque"):
            raise ConfigError(f"unknown loop mode {self.mode!r}")
        if self.inner_rate <= 0 or self.command_rate <= 0:
            raise ConfigError("rates must be positive")
        if self.inner_rate % self.command_rate:
            raise ConfigError("inner_rate must be an integer multiple of command_rate")

    @property
    def hold(self) -> int:
        return self.inner_rate // self.command_rate


def pid_step(g: PidGains, err, state: PidState, dt: float):
    """One PID update. Works on scalars or per-joint arrays.

    The integral is clamped to ``i_limit`` and frozen whenever the output saturates.
    """
    if not dt > 0:
        raise ContractError(f"dt must be > 0, got {dt}")
    err = np.asarray(err, dtype=float)
    integ = np.asarray(state.integral, dtype=float)
    cand = np.clip(integ + err * dt, -g.i_limit, g.i_limit)
    deriv = (err - np.asarray(state.prev_err, dtype=float)) / dt
    raw = g.kp * err + g.ki * cand + g.kd * deriv
    saturated = np.abs(raw) > g.u_limit
    u = np.clip(raw, -g.u_limit, g.u_limit)
    new_int = np.where(saturated, integ, cand)
    if u.ndim == 0:
        return float(u), PidState(float(new_int), float(err))
    return u, PidState(new_int, err.copy())


Profile = Callable[[float], np.ndarray]


def run_closed_loop(cfg: LoopConfig, rig: RigBank, profile: Profile, duration: float,
                    disturbance: Callable[[int], np.ndarray] | None = None,
                    gains: list[PidGains] | None = None) -> TrajectoryLog:
    """Simulate the loop for ``duration`` seconds; one log record per inner step.

    ``profile(t)`` returns the reference (rad in position mode, N·m in torque
    mode) for every joint; it is only evaluated on the command grid.
    ``disturbance(k)`` optionally returns an external joint torque at step k.
    ``gains`` overrides ``cfg.gains`` per joint.
    """
    if duration <= 0:
        raise ContractError("duration must be > 0")
    dt = 1.0 / cfg.inner_rate
    n = int(round(duration * cfg.inner_rate))
    J = rig.n_joints
    t = np.arange(n) / cfg.inner_rate
    q = np.zeros((n, J))
    q_des = np.zeros((n, J))
    qd = np.zeros((n, J))
    tau = np.zeros((n, J))
    ref = np.zeros((n, J))

    if gains is None:
        gains = [cfg.gains] * J
    kp = np.array([g.kp for g in gains])
    ki = np.array([g.ki for g in gains])
    kd = np.array([g.kd for g in gains])
    i_lim = np.array([g.i_limit for g in gains])
    u_lim = np.array([g.u_limit for g in gains])
    integ = np.zeros(J)
    prev = np.zeros(J)

    hold = cfg.hold
    r = np.zeros(J)
    status = "ok"
    for k in range(n):
        if k % hold == 0:
            r = np.broadcast_to(np.asarray(profile((k // hold) / cfg.command_rate), dtype=float),
                                (J,)).copy()
        q[k] = rig.q
        qd[k] = rig.qd
        tau[k] = rig.tau
        ref[k] = r
        if cfg.mode == "position":
            q_des[k] = r
            err = r - q[k]
        else:
            q_des[k] = q[k]
            err = r - tau[k]
        if not np.all(np.abs(qd[k]) <= cfg.qd_bound):
            status = "diverged"
            n = k + 1
            break
        # same update as pid_step, inlined over joints with per-joint gains
        cand = np.clip(integ + err * dt, -i_lim, i_lim)
        raw = kp * err + ki * cand + kd * (err - prev) / dt
        sat = np.abs(raw) > u_lim
        u = np.clip(raw, -u_lim, u_lim)
        integ = np.where(sat, integ, cand)
        prev = err
        rig.step(u, dt, None if disturbance is None else disturbance(k))

    return TrajectoryLog(t[:n], q[:n], q_des[:n], qd[:n], tau[:n], ref[:n], status,
                         {"mode": cfg.mode})


def phase_lag(log: TrajectoryLog, ref_freq: float, joint: int = 0,
              channel: str | None = None) -> float:
    """Lag of the measured channel behind the reference, in degrees in [0, 180).

    Estimated from the peak of the cross-correlation over lags in [0, T/2).
    ``channel`` defaults to ``tau`` for torque-mode logs and ``q`` otherwise.
    """
    if log.reference is None:
        raise ContractError("log has no reference channel")
    if channel is None:
        channel = "tau" if log.meta.get("mode") == "torque" else "q"
    fs = 1.0 / (log.t[1] - log.t[0])
    period = fs / ref_freq
    if len(log) < 3 * period:
        raise ContractError(f"need >= 3 periods ({3 * period:.0f} samples), got {len(log)}")
    ref = log.reference[:, joint]
    meas = getattr(log, channel)[:, joint]
    return _xcorr_lag_deg(ref, meas, period)


def _xcorr_lag_deg(ref: np.ndarray, meas: np.ndarray, period: float) -> float:
    # use an integer number of periods so the correlation is unbiased
    n_per = int(len(ref) // period)
    n = int(round(n_per * period))
    a = ref[-n:] - ref[-n:].mean()
    b = meas[-n:] - meas[-n:].mean()
    max_lag = int(np.ceil(period / 2))
    m = n - max_lag
    best, best_lag = -np.inf, 0
    for lag in range(max_lag):
        c = float(np.dot(a[:m], b[lag:lag + m]))
        if c > best:
            best, best_lag = c, lag
    # parabolic refinement of the peak
    lag = float(best_lag)
    if 0 < best_lag < max_lag - 1:
        c0 = float(np.dot(a[:m], b[best_lag - 1:best_lag - 1 + m]))
        c2 = float(np.dot(a[:m], b[best_lag + 1:best_lag + 1 + m]))
        denom = c0 - 2 * best + c2
        if denom < 0:
            lag += 0.5 * (c0 - c2) / denom
    deg = 360.0 * lag / period
    return float(deg % 180.0)

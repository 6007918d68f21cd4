"""Locomotion reward terms and policy observation, as pure functions of a robot snapshot.

Every term is computed exactly as its table expression, with no sign applied:
penalties come out non-negative and their gains are expected to be negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractError

CMD_ZERO_TOL = 1e-6

GLOBAL_TERMS = ("r_v", "r_yaw", "r_h", "r_m", "r_tau", "r_tauclip", "r_q", "r_qd", "r_qdd", "r_s")
LOCAL_TERMS = ("r_fl", "r_air", "r_slip", "r_c1", "r_c2", "r_grf", "r_act", "r_l")

_SHAPES = {
    "v_xy": (2,), "omega": (3,), "q": (12,), "qd": (12,), "qd_prev": (12,), "q_nom": (12,),
    "tau": (12,), "tau_clip": (12,), "q_des_hist": (3, 12), "contacts": (4,),
    "foot_v": (4, 3), "foot_h": (4,), "grf_hist": (3, 4), "T_a": (4,), "T_s": (4,),
    "cmd": (3,), "prev_c1": (4,), "q_des_clip": (12,), "q_limit_hi": (12,), "q_limit_lo": (12,),
}


def _z(*shape):
    return field(default_factory=lambda: np.zeros(shape))


@dataclass
class RobotState:
    """One robot snapshot.

    ``q_des_hist`` rows are the actions at t, t-1, t-2; ``grf_hist`` rows the
    ground-reaction magnitudes at t, t-1, t-2. ``q_des_clip`` holds the
    per-joint action overflow ``|a_raw - clip(a_raw)|``.
    """

    v_xy: np.ndarray = _z(2)
    v_z: float = 0.0
    omega: np.ndarray = _z(3)
    h: float = 0.0
    h0: float = 0.0
    q: np.ndarray = _z(12)
    qd: np.ndarray = _z(12)
    qd_prev: np.ndarray = _z(12)
    q_nom: np.ndarray = _z(12)
    tau: np.ndarray = _z(12)
    tau_clip: np.ndarray = _z(12)
    q_des_hist: np.ndarray = _z(3, 12)
    contacts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=bool))
    foot_v: np.ndarray = _z(4, 3)
    foot_h: np.ndarray = _z(4)
    h_tar: float = 0.0
    grf_hist: np.ndarray = _z(3, 4)
    T_a: np.ndarray = _z(4)
    T_s: np.ndarray = _z(4)
    cmd: np.ndarray = _z(3)
    prev_c1: np.ndarray = _z(4)
    q_des_clip: np.ndarray = _z(12)
    q_limit_hi: np.ndarray = field(default_factory=lambda: np.full(12, np.inf))
    q_limit_lo: np.ndarray = field(default_factory=lambda: np.full(12, -np.inf))

    def __post_init__(self):
        for name, shp in _SHAPES.items():
            dtype = bool if name == "contacts" else float
            arr = np.asarray(getattr(self, name), dtype=dtype)
            if arr.shape != shp:
                raise ContractError(f"RobotState.{name}: shape {arr.shape} != {shp}")
            setattr(self, name, arr)
        if np.any(self.T_a < 0) or np.any(self.T_s < 0):
            raise ContractError("airtime and stance time must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "RobotState":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown RobotState fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RobotState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RewardCoeffs:
    """Reward gains. Shipped defaults are placeholders; the gains are not published."""

    k_cmd: float = 1.0
    k_yaw: float = -0.5
    k_h: float = 0.5
    k_m: float = -1.0
    k_tau: float = -1e-5
    k_tauclip: float = -1e-3
    k_q: float = -0.1
    k_qd: float = -1e-3
    k_qdd: float = -1e-4
    k_s: float = -0.1
    k_fl: float = -1.0
    k_a: float = 1.0
    k_slip: float = -0.5
    k_c1: float = -5.0
    k_c2: float = -1.0
    k_grf: float = -1e-6
    k_act: float = -0.5
    k_l: float = -1.0
    c_f: float = 1.0
    yaw_branch_on_command: bool = False

    def __post_init__(self):
        if not 0.0 <= self.c_f <= 1.0:
            raise ContractError(f"c_f must lie in [0, 1], got {self.c_f}")

    def zeroed(self) -> "RewardCoeffs":
        vals = {f.name: 0.0 for f in fields(self) if f.name.startswith("k_")}
        return RewardCoeffs(**vals, c_f=self.c_f, yaw_branch_on_command=self.yaw_branch_on_command)


def _sq(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.dot(v.ravel(), v.ravel()))


def _cmd_is_zero(cmd: np.ndarray) -> bool:
    return float(np.linalg.norm(cmd)) <= CMD_ZERO_TOL


def assemble_observation(state: RobotState, q_des_prev=None, cmd=None) -> np.ndarray:
    """[omega(3), q(12), qd(12), previous action(12), cmd(3)] -> 42 values."""
    if q_des_prev is None:
        q_des_prev = state.q_des_hist[1]
    if cmd is None:
        cmd = state.cmd
    q_des_prev = np.asarray(q_des_prev, dtype=float)
    cmd = np.asarray(cmd, dtype=float)
    if q_des_prev.shape != (12,) or cmd.shape != (3,):
        raise ContractError("q_des_prev must have 12 entries and cmd 3")
    return np.concatenate([state.omega, state.q, state.qd, q_des_prev, cmd])


def global_rewards(s: RobotState, k: RewardCoeffs) -> dict[str, float]:
    cf = k.c_f
    e_xy = s.cmd[:2] - s.v_xy
    e_xy_sq = _sq(e_xy)
    e_yaw = s.cmd[2] - s.omega[2]
    r_v = k.k_cmd * (math.exp(-e_xy_sq) * (1.0 + math.exp(-0.5 * math.sqrt(e_xy_sq)))
                     + math.exp(-1.5 * e_yaw * e_yaw))

    yaw_ref = s.cmd[2] if k.yaw_branch_on_command else s.omega[2]
    yaw_mult = 10.0 if abs(yaw_ref) <= CMD_ZERO_TOL else 1.0
    r_yaw = yaw_mult * cf * k.k_yaw * e_yaw * e_yaw

    r_h = k.k_h * math.exp(-40.0 * abs(s.h0 - s.h))
    r_m = k.k_m * (s.v_z * s.v_z + 0.02 * (abs(s.omega[0]) + abs(s.omega[1])))
    r_tau = cf * k.k_tau * _sq(s.tau)
    r_tauclip = cf * k.k_tauclip * _sq(s.tau_clip)
    q_mult = 10.0 if _cmd_is_zero(s.cmd) else 1.0
    r_q = q_mult * cf * k.k_q * float(np.linalg.norm(s.q - s.q_nom))
    r_qd = cf * k.k_qd * _sq(s.qd)
    r_qdd = cf * k.k_qdd * _sq(s.qd - s.qd_prev)
    a0, a1, a2 = s.q_des_hist
    r_s = cf * k.k_s * (0.5 * _sq(a0 - 2.0 * a1 + a2) + _sq(a0 - a1))
    return {"r_v": r_v, "r_yaw": r_yaw, "r_h": r_h, "r_m": r_m, "r_tau": r_tau,
            "r_tauclip": r_tauclip, "r_q": r_q, "r_qd": r_qd, "r_qdd": r_qdd, "r_s": r_s}


def airtime_reward(T_a: float, T_s: float, cmd_zero: bool, k_a: float) -> float:
    """Branches are checked top to bottom; the first match wins."""
    if cmd_zero:
        return k_a * min(max(T_s - T_a, -0.25), 0.25)
    if T_a < 0.25:
        return k_a * min(T_a, 0.2)
    if T_s < 0.25:
        return k_a * min(T_s, 0.2)
    return 0.0


def local_rewards(s: RobotState, k: RewardCoeffs) -> dict[str, np.ndarray]:
    """Per-foot (4) or per-joint (12) term arrays; ``r_fl`` is a 1-element array."""
    cf = k.c_f
    cmd_zero = _cmd_is_zero(s.cmd)
    contact = s.contacts
    r_fl = np.array([cf * k.k_fl if not contact.any() else 0.0])
    r_air = np.array([airtime_reward(s.T_a[i], s.T_s[i], cmd_zero, k.k_a) for i in range(4)])
    v_xy_sq = np.sum(s.foot_v[:, :2] ** 2, axis=1)
    r_slip = np.where(contact, cf * k.k_slip * v_xy_sq, 0.0)
    v_norm = np.linalg.norm(s.foot_v, axis=1)
    swing = ~contact & (not cmd_zero)
    r_c1 = np.where(swing, k.k_c1 * v_norm * (s.foot_h - s.h_tar) ** 2, 0.0)
    r_c2 = np.where(contact, k.k_c2 * s.prev_c1, 0.0)
    f0, f1, f2 = s.grf_hist
    r_grf = cf * k.k_grf * (0.5 * (f0 - 2.0 * f1 + f2) ** 2 + (f0 - f1) ** 2)
    r_act = cf * k.k_act * np.abs(s.q_des_clip)
    over = (s.q > s.q_limit_hi) | (s.q < s.q_limit_lo)
    r_l = np.where(over, cf * k.k_l, 0.0)
    return {"r_fl": r_fl, "r_air": r_air, "r_slip": r_slip, "r_c1": r_c1, "r_c2": r_c2,
            "r_grf": r_grf, "r_act": r_act, "r_l": r_l}


def total_reward(s: RobotState, k: RewardCoeffs) -> float:
    g = global_rewards(s, k)
    loc = local_rewards(s, k)
    total = 0.0
    for name in GLOBAL_TERMS:
        total += g[name]
    for name in LOCAL_TERMS:
        total += float(np.sum(loc[name]))
    return total


def term_map(s: RobotState, k: RewardCoeffs) -> dict:
    """JSON-ready map of every term plus the total."""
    loc = local_rewards(s, k)
    return {"global": global_rewards(s, k),
            "local": {n: [float(v) for v in loc[n]] for n in LOCAL_TERMS},
            "total": total_reward(s, k)}


def clip_overflow(raw, lo, hi) -> np.ndarray:
    """``|raw - clip(raw, lo, hi)|``: how far an action or torque exceeds its limits."""
    raw = np.asarray(raw, dtype=float)
    return np.abs(raw - np.clip(raw, lo, hi))

"""Simplified analytical model of a hydraulic sprocket-chain actuator.

The model works per 1 ms step; the step length is folded into the
coefficients. Force form::

    df = k1*dx - k2*f - k3*xdot + k4*dx*max(-f*sgn(dx), 0)

and, with tau = R*f, x = R*q, the torque form::

    tau_next = k1*R^2*(q_des - q) + (1 - k2)*tau - k3*R^2*qd
               + k4*R*(q_des - q)*max(-tau*sgn(q_des - q), 0)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import ContractError, DomainError

N_JOINTS = 12


@dataclass(frozen=True)
class ActuatorCoeffs:
    k1: float
    k2: float
    k3: float
    k4: float
    R: float

    def __post_init__(self):
        vals = (self.k1, self.k2, self.k3, self.k4, self.R)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite coefficient in {self}")
        if self.R <= 0:
            raise DomainError(f"sprocket radius must be positive, got {self.R}")
        if self.k1 < 0 or self.k3 < 0 or self.k4 < 0:
            raise DomainError(f"k1, k3, k4 must be >= 0: {self}")
        if not 0.0 <= self.k2 < 1.0:
            raise DomainError(f"k2 must lie in [0, 1): {self.k2}")

    def as_array(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.k4, self.R])


@dataclass(frozen=True)
class JointSnapshot:
    q: float
    q_des: float
    qd: float
    tau: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.q_des, self.qd, self.tau])


@dataclass(frozen=True)
class ImpactParams:
    B: float
    A: float
    V: float
    f_max: float

    def __post_init__(self):
        for name in ("B", "A", "V", "f_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v}")

    @property
    def gain(self) -> float:
        return self.B * self.A**2 / (self.V * self.f_max)


def _sgn(v: float) -> float:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _check_finite(*vals: float) -> None:
    for v in vals:
        if not math.isfinite(v):
            raise DomainError(f"non-finite input: {vals}")


def predict_force_delta(coeffs: ActuatorCoeffs, f: float, x: float, x_des: float,
                        x_dot: float) -> float:
    """Force change over one step, in N."""
    _check_finite(f, x, x_des, x_dot)
    dx = x_des - x
    imp = -f * _sgn(dx)
    if imp < 0.0:
        imp = 0.0
    return coeffs.k1 * dx - coeffs.k2 * f - coeffs.k3 * x_dot + coeffs.k4 * dx * imp


def predict_torque_next(coeffs: ActuatorCoeffs, s: JointSnapshot) -> float:
    """Torque one step ahead, in N·m."""
    _check_finite(s.q, s.q_des, s.qd, s.tau)
    k1, k2, k3, k4, R = coeffs.k1, coeffs.k2, coeffs.k3, coeffs.k4, coeffs.R
    dq = s.q_des - s.q
    imp = -s.tau * _sgn(dq)
    if imp < 0.0:
        imp = 0.0
    # operation order mirrors _batch12_kernel so both paths agree bitwise
    return k1 * R * R * dq + (1.0 - k2) * s.tau - k3 * R * R * s.qd + k4 * R * dq * imp


def impact_correction(p: ImpactParams, f: float, dx: float) -> float:
    """Impact force correction ``B*A^2/(V*f_max) * f * dx``, active only when f*dx < 0."""
    if f * dx < 0.0:
        return p.gain * f * dx
    return 0.0


# --- batched hot path -------------------------------------------------------
# coeffs packed as (12, 5) rows [k1, k2, k3, k4, R]; states as (12, 4) rows
# [q, q_des, qd, tau].

@numba.njit(cache=True)
def _batch12_kernel(k, s, out):
    for i in range(k.shape[0]):
        k1 = k[i, 0]
        k2 = k[i, 1]
        k3 = k[i, 2]
        k4 = k[i, 3]
        R = k[i, 4]
        q = s[i, 0]
        q_des = s[i, 1]
        qd = s[i, 2]
        tau = s[i, 3]
        dq = q_des - q
        if dq > 0.0:
            sg = 1.0
        elif dq < 0.0:
            sg = -1.0
        else:
            sg = 0.0
        imp = -tau * sg
        if imp < 0.0:
            imp = 0.0
        out[i] = k1 * R * R * dq + (1.0 - k2) * tau - k3 * R * R * qd + k4 * R * dq * imp


def pack_coeffs(coeffs: Sequence[ActuatorCoeffs]) -> np.ndarray:
    return np.array([c.as_array() for c in coeffs], dtype=np.float64)


def pack_states(states: Sequence[JointSnapshot]) -> np.ndarray:
    return np.array([s.as_array() for s in states], dtype=np.float64)


def predict_batch12(coeffs, states, out: np.ndarray | None = None) -> np.ndarray:
    """Next-step torques for all 12 actuators.

    ``coeffs`` and ``states`` are either sequences of dataclasses or pre-packed
    float64 arrays of shape (12, 5) and (12, 4). With packed arrays and a
    caller-owned ``out`` buffer the call does not allocate.
    """
    if not isinstance(coeffs, np.ndarray):
        if len(coeffs) != N_JOINTS:
            raise ContractError(f"expected {N_JOINTS} coefficient sets, got {len(coeffs)}")
        coeffs = pack_coeffs(coeffs)
    if not isinstance(states, np.ndarray):
        if len(states) != N_JOINTS:
            raise ContractError(f"expected {N_JOINTS} snapshots, got {len(states)}")
        states = pack_states(states)
    if coeffs.shape != (N_JOINTS, 5) or states.shape != (N_JOINTS, 4):
        raise ContractError(f"bad shapes {coeffs.shape}, {states.shape}")
    if out is None:
        out = np.empty(N_JOINTS)
    _batch12_kernel(coeffs, states, out)
    return out


def predict_log(coeffs: ActuatorCoeffs, q, q_des, qd, tau) -> np.ndarray:
    """Vectorised one-step prediction over arrays of samples for one joint."""
    q, q_des, qd, tau = (np.asarray(a, dtype=float) for a in (q, q_des, qd, tau))
    R = coeffs.R
    dq = q_des - q
    imp = np.maximum(-tau * np.sign(dq), 0.0)
    return (coeffs.k1 * R * R * dq + (1.0 - coeffs.k2) * tau
            - coeffs.k3 * R * R * qd + coeffs.k4 * R * dq * imp)


# --- JSON --------------------------------------------------------------------

def coeffs_to_json(coeffs: Sequence[ActuatorCoeffs]) -> str:
    rows = [{"joint_id": j, **asdict(c)} for j, c in enumerate(coeffs)]
    return json.dumps(rows, indent=2)


def coeffs_from_json(text: str) -> list[ActuatorCoeffs]:
    rows = json.loads(text)
    rows = sorted(rows, key=lambda r: r["joint_id"])
    ids = [r["joint_id"] for r in rows]
    if ids != list(range(len(rows))):
        raise ContractError(f"joint ids must be 0..{len(rows) - 1}, got {ids}")
    return [ActuatorCoeffs(r["k1"], r["k2"], r["k3"], r["k4"], r["R"]) for r in rows]


def save_coeffs(path, coeffs: Sequence[ActuatorCoeffs]) -> None:
    Path(path).write_text(coeffs_to_json(coeffs) + "\n")


def load_coeffs(path) -> list[ActuatorCoeffs]:
    return coeffs_from_json(Path(path).read_text())

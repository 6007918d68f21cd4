"""Nonlinear single-cylinder servo-valve model and a 1-DOF joint rig built on it.

The cylinder force obeys

    fdot  = g(x) * xdot + h(f, x) * x_s
    g(x)  = -A^2 beta (1/(V0A + A x) + 1/(V0B + A (L - x)))
    h     = Cd w beta A sqrt((PS - PT)/rho - sgn(x_s) f/(rho A)) (1/(V0A + A x) + 1/(V0B + A (L - x)))

with the valve spool following a saturated first-order lag
``x_s' = (clip(u, +-xs_max) - x_s) / tau_v``.

The rig couples the cylinder to a joint through a sprocket of radius R
(x = x_offset + R q, tau = R f) and a load made of inertia, viscous
damping, a gravity term and a return spring. Integration is
fixed-step RK4; the rig takes ``substeps`` RK4 steps per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numba
import numpy as np

from .errors import ContractError, DomainError


@dataclass(frozen=True)
class CylinderParams:
    A: float = 1e-3          # piston area, m^2
    L: float = 0.2           # stroke, m
    beta: float = 1.5e9      # bulk modulus, Pa
    rho: float = 870.0       # oil density, kg/m^3
    V0A: float = 5e-5        # dead volume A, m^3
    V0B: float = 5e-5        # dead volume B, m^3
    Cd: float = 0.6
    w: float = 5e-3          # valve area gradient, m
    PS: float = 21e6         # supply pressure, Pa
    PT: float = 0.5e6        # return pressure, Pa
    tau_v: float = 5e-3      # valve time constant, s
    xs_max: float = 5e-4     # spool travel limit, m

    def __post_init__(self):
        for fl in fields(self):
            v = getattr(self, fl.name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"CylinderParams.{fl.name} must be finite and > 0, got {v}")
        if self.PS <= self.PT:
            raise DomainError("supply pressure must exceed return pressure")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, fl.name) for fl in fields(self)], dtype=np.float64)

    @property
    def f_relief(self) -> float:
        """Force at which the supply relief valve caps chamber pressure."""
        return self.A * self.PS


@dataclass
class CylinderState:
    x: float
    x_dot: float
    f: float
    x_s: float


@dataclass(frozen=True)
class RigParams:
    inertia: float = 0.2              # kg m^2
    damping: float = 20.0             # N m s/rad
    gravity_torque_amp: float = 100.0 # N m
    R: float = 0.05                   # sprocket radius, m
    q_min: float = -1.5
    q_max: float = 1.5
    x_offset: float = 0.1             # piston position at q = 0, m
    load_stiffness: float = 2000.0    # return spring about q = 0, N m/rad

    def __post_init__(self):
        if not self.inertia > 0:
            raise DomainError("inertia must be > 0")
        if self.damping < 0:
            raise DomainError("damping must be >= 0")
        if not self.R > 0:
            raise DomainError("R must be > 0")
        if not self.q_min < self.q_max:
            raise DomainError("q_min must be < q_max")
        if self.load_stiffness < 0:
            raise DomainError("load_stiffness must be >= 0")

    def check_stroke(self, cp: CylinderParams) -> None:
        lo = self.x_offset + self.R * self.q_min
        hi = self.x_offset + self.R * self.q_max
        if lo < 0 or hi > cp.L:
            raise DomainError(f"joint range maps to piston range [{lo}, {hi}] outside [0, {cp.L}]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, fl.name) for fl in fields(self)], dtype=np.float64)


@dataclass
class RigState:
    q: float = 0.0
    qd: float = 0.0
    f: float = 0.0
    x_s: float = 0.0

    def tau(self, rp: RigParams) -> float:
        return rp.R * self.f


# --- compiled kernels ----------------------------------------------------------
# cp row layout follows CylinderParams field order, rp row follows RigParams.

@numba.njit(cache=True)
def _gh(cp, f, x, xs_sign):
    A = cp[0]
    L = cp[1]
    beta = cp[2]
    rho = cp[3]
    inv_v = 1.0 / (cp[4] + A * x) + 1.0 / (cp[5] + A * (L - x))
    g = -A * A * beta * inv_v
    rad = (cp[8] - cp[9]) / rho - xs_sign * f / (rho * A)
    if rad < 0.0:
        rad = 0.0
    h = cp[6] * cp[7] * beta * A * math.sqrt(rad) * inv_v
    return g, h


@numba.njit(cache=True)
def _sign(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@numba.njit(cache=True)
def _cyl_rates(cp, f, x, x_dot, xs, u_sat):
    g, h = _gh(cp, f, x, _sign(xs))
    return g * x_dot + h * xs, (u_sat - xs) / cp[10]


@numba.njit(cache=True)
def _clip(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@numba.njit(cache=True)
def _cylinder_rk4(cp, x, x_dot, f, xs, u, dt):
    L = cp[1]
    u_sat = _clip(u, -cp[11], cp[11])
    half = 0.5 * dt
    x_mid = _clip(x + x_dot * half, 0.0, L)
    x_end = _clip(x + x_dot * dt, 0.0, L)
    df1, ds1 = _cyl_rates(cp, f, x, x_dot, xs, u_sat)
    df2, ds2 = _cyl_rates(cp, f + half * df1, x_mid, x_dot, xs + half * ds1, u_sat)
    df3, ds3 = _cyl_rates(cp, f + half * df2, x_mid, x_dot, xs + half * ds2, u_sat)
    df4, ds4 = _cyl_rates(cp, f + dt * df3, x_end, x_dot, xs + dt * ds3, u_sat)
    f_new = f + dt / 6.0 * (df1 + 2.0 * df2 + 2.0 * df3 + df4)
    xs_new = xs + dt / 6.0 * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4)
    relief = cp[0] * cp[8]
    return x_end, _clip(f_new, -relief, relief), _clip(xs_new, -cp[11], cp[11])


@numba.njit(cache=True)
def _rig_rates(cp, rp, q, qd, f, xs, u_sat, tau_ext):
    R = rp[3]
    x = _clip(rp[6] + R * q, 0.0, cp[1])
    df, dxs = _cyl_rates(cp, f, x, R * qd, xs, u_sat)
    qdd = (R * f - rp[1] * qd - rp[2] * math.sin(q) - rp[7] * q + tau_ext) / rp[0]
    return qd, qdd, df, dxs


@numba.njit(cache=True)
def _rig_step(cp, rp, state, u, tau_ext, dt, substeps):
    """Advance rig states in place. ``state`` is (J, 4): q, qd, f, x_s."""
    h = dt / substeps
    half = 0.5 * h
    for j in range(state.shape[0]):
        c = cp[j]
        r = rp[j]
        u_sat = _clip(u[j], -c[11], c[11])
        te = tau_ext[j]
        relief = c[0] * c[8]
        q = state[j, 0]
        qd = state[j, 1]
        f = state[j, 2]
        xs = state[j, 3]
        for _ in range(substeps):
            a1, b1, c1, d1 = _rig_rates(c, r, q, qd, f, xs, u_sat, te)
            a2, b2, c2, d2 = _rig_rates(c, r, q + half * a1, qd + half * b1,
                                        f + half * c1, xs + half * d1, u_sat, te)
            a3, b3, c3, d3 = _rig_rates(c, r, q + half * a2, qd + half * b2,
                                        f + half * c2, xs + half * d2, u_sat, te)
            a4, b4, c4, d4 = _rig_rates(c, r, q + h * a3, qd + h * b3,
                                        f + h * c3, xs + h * d3, u_sat, te)
            q = q + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            qd = qd + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            f = f + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            xs = xs + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
            f = _clip(f, -relief, relief)
            xs = _clip(xs, -c[11], c[11])
            # hard stop: clamp and kill velocity into the stop
            if q < r[4]:
                q = r[4]
                qd = 0.0
            elif q > r[5]:
                q = r[5]
                qd = 0.0
        state[j, 0] = q
        state[j, 1] = qd
        state[j, 2] = f
        state[j, 3] = xs


# --- public API -----------------------------------------------------------------

def flow_coefficients(p: CylinderParams, f: float, x: float, xs_sign: int) -> tuple[float, float]:
    """Return ``(g(x), h(f, x))`` for a valve opening of sign ``xs_sign``."""
    if not 0.0 <= x <= p.L:
        raise DomainError(f"piston position {x} outside [0, {p.L}]")
    if xs_sign not in (-1, 0, 1):
        raise DomainError(f"xs_sign must be -1, 0 or +1, got {xs_sign}")
    g, h = _gh(p.as_array(), float(f), float(x), float(xs_sign))
    return float(g), float(h)


def step_cylinder(p: CylinderParams, s: CylinderState, u: float, x_dot: float,
                  dt: float) -> CylinderState:
    """One RK4 step of force and spool with the piston velocity imposed."""
    if not dt > 0:
        raise ContractError(f"dt must be > 0, got {dt}")
    if not 0.0 <= s.x <= p.L:
        raise DomainError(f"piston position {s.x} outside [0, {p.L}]")
    x, f, xs = _cylinder_rk4(p.as_array(), s.x, x_dot, s.f, s.x_s, u, dt)
    return CylinderState(x=float(x), x_dot=x_dot, f=float(f), x_s=float(xs))


def step_rig(rp: RigParams, cp: CylinderParams, state: RigState, u: float, dt: float = 1e-3,
             substeps: int = 10, tau_ext: float = 0.0) -> RigState:
    """One control-period step of a single rig; returns a new state."""
    if not dt > 0:
        raise ContractError(f"dt must be > 0, got {dt}")
    arr = np.array([[state.q, state.qd, state.f, state.x_s]])
    _rig_step(cp.as_array()[None, :], rp.as_array()[None, :], arr,
              np.array([u], dtype=float), np.array([tau_ext], dtype=float), dt, substeps)
    return RigState(*map(float, arr[0]))


class RigBank:
    """A set of independent rigs (one per joint) stepped together.

    Stateful and single-threaded; separate instances may run in parallel.
    """

    def __init__(self, rigs: list[RigParams], cylinders: list[CylinderParams],
                 substeps: int = 10):
        if len(rigs) != len(cylinders):
            raise ContractError("need one CylinderParams per rig")
        for rp, cp in zip(rigs, cylinders):
            rp.check_stroke(cp)
        self.rigs = list(rigs)
        self.cylinders = list(cylinders)
        self.substeps = substeps
        self._rp = np.array([r.as_array() for r in rigs])
        self._cp = np.array([c.as_array() for c in cylinders])
        self.R = self._rp[:, 3].copy()
        self.state = np.zeros((len(rigs), 4))

    @property
    def n_joints(self) -> int:
        return len(self.rigs)

    def reset(self, q0=None, tau0=None) -> None:
        self.state[:] = 0.0
        if q0 is not None:
            self.state[:, 0] = q0
        if tau0 is not None:
            self.state[:, 2] = np.asarray(tau0) / self.R

    @property
    def q(self) -> np.ndarray:
        return self.state[:, 0]

    @property
    def qd(self) -> np.ndarray:
        return self.state[:, 1]

    @property
    def tau(self) -> np.ndarray:
        return self.R * self.state[:, 2]

    def step(self, u, dt: float = 1e-3, tau_ext=None) -> None:
        if not dt > 0:
            raise ContractError(f"dt must be > 0, got {dt}")
        u = np.ascontiguousarray(np.broadcast_to(np.asarray(u, dtype=float), (self.n_joints,)))
        if tau_ext is None:
            tau_ext = np.zeros(self.n_joints)
        else:
            tau_ext = np.ascontiguousarray(np.broadcast_to(np.asarray(tau_ext, dtype=float),
                                                           (self.n_joints,)))
        _rig_step(self._cp, self._rp, self.state, u, tau_ext, dt, self.substeps)

    @classmethod
    def single(cls, rp: RigParams | None = None, cp: CylinderParams | None = None,
               substeps: int = 10) -> "RigBank":
        return cls([rp or RigParams()], [cp or CylinderParams()], substeps)

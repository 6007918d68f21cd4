"""Synthetic 12-joint locomotion-like logs from the oracle rigs.

Joints are ordered leg-major: (roll, pitch, knee) for legs FL, FR, RL, RR.
Targets follow a trot-like periodic pattern updated at 100 Hz, with seeded
jitter; optional impact pulses act as external joint torques.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .control import DEFAULT_POSITION_GAINS, LoopConfig, PidGains, run_closed_loop
from .errors import ConfigError
from .log import TrajectoryLog
from .oracle import CylinderParams, RigBank, RigParams

N_JOINTS = 12
JOINT_TYPES = ("roll", "pitch", "knee")
LEG_PHASE = (0.0, np.pi, np.pi, 0.0)  # trot: diagonal pairs in phase

# Per joint-type load variations around the default rig.
TYPE_RIGS = {
    "roll": RigParams(inertia=0.15, damping=20.0, gravity_torque_amp=60.0, load_stiffness=900.0),
    "pitch": RigParams(inertia=0.25, damping=25.0, gravity_torque_amp=120.0, load_stiffness=500.0),
    "knee": RigParams(inertia=0.2, damping=20.0, gravity_torque_amp=100.0, load_stiffness=700.0),
}


@dataclass(frozen=True)
class CommandProfile:
    """Target pattern for all joints.

    ``kind`` is ``gait`` (periodic pattern scaled by ``speed``), ``sine``
    (same sine on every joint), ``step`` (step of ``amplitude`` at ``t_step``)
    or ``zero``.
    """

    kind: str = "gait"
    speed: float = 1.0            # commanded forward speed, m/s
    gait_freq: float | None = None  # Hz; default 1 + speed
    amplitude: float = 0.2        # rad, sine/step kinds
    frequency: float = 1.0        # Hz, sine kind
    t_step: float = 0.1           # s, step kind
    offsets: tuple[float, float, float] = (0.0, 0.15, -0.25)
    jitter: float = 0.01          # rad, std of per-tick target noise
    bias: tuple[float, float, float] = (0.0, 0.0, 0.0)  # N m constant external load per type
    impact_rate: float = 0.0      # impacts per second per joint
    impact_torque: float = 0.0    # N m peak of a half-sine pulse
    impact_ms: int = 30           # pulse length

    def validate(self) -> None:
        if self.kind not in ("gait", "sine", "step", "zero"):
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.speed < 0 or self.jitter < 0 or self.impact_rate < 0 or self.impact_ms < 1:
            raise ConfigError(f"invalid profile {self}")
        if self.gait_freq is not None and self.gait_freq <= 0:
            raise ConfigError("gait_freq must be > 0")


@dataclass(frozen=True)
class SynthConfig:
    profile: CommandProfile = field(default_factory=CommandProfile)
    loop: LoopConfig = field(default_factory=LoopConfig)
    gains: PidGains = DEFAULT_POSITION_GAINS
    cylinder: CylinderParams = field(default_factory=CylinderParams)
    tau_noise: float = 0.0        # N m, std of logged torque noise
    q_noise: float = 0.0          # rad, std of logged angle noise


def default_rigs() -> list[RigParams]:
    return [TYPE_RIGS[JOINT_TYPES[j % 3]] for j in range(N_JOINTS)]


def make_profile(p: CommandProfile, n_joints: int, rng: np.random.Generator):
    """Return a callable ``t -> q_des`` (rad per joint)."""
    p.validate()
    if p.kind == "zero":
        return lambda t: np.zeros(n_joints)
    if p.kind == "step":
        return lambda t: np.full(n_joints, p.amplitude if t >= p.t_step else 0.0)
    if p.kind == "sine":
        return lambda t: np.full(n_joints, p.amplitude * np.sin(2 * np.pi * p.frequency * t))

    freq = p.gait_freq if p.gait_freq is not None else 1.0 + p.speed
    types = np.array([j % 3 for j in range(n_joints)])
    legs = np.array([j // 3 for j in range(n_joints)]) % 4
    amp_by_type = np.array([0.04 + 0.04 * p.speed, 0.12 + 0.18 * p.speed, 0.15 + 0.25 * p.speed])
    amp = amp_by_type[types] * rng.uniform(0.85, 1.15, n_joints)
    phase = np.array([LEG_PHASE[leg] for leg in legs]) + rng.uniform(-0.2, 0.2, n_joints)
    # knee lags pitch by a quarter cycle to shape a swing trajectory
    phase = phase + np.where(types == 2, -np.pi / 2, 0.0)
    offset = np.asarray(p.offsets)[types]

    def q_des(t: float) -> np.ndarray:
        base = offset + amp * np.sin(2 * np.pi * freq * t + phase)
        return base + p.jitter * rng.standard_normal(n_joints)

    return q_des


def make_disturbance(p: CommandProfile, n_joints: int, n_steps: int, rng: np.random.Generator):
    """External joint torques per 1 ms step: constant bias plus random impact pulses."""
    types = np.array([j % 3 for j in range(n_joints)])
    tau = np.tile(np.asarray(p.bias, dtype=float)[types], (n_steps, 1))
    if p.impact_rate > 0 and p.impact_torque > 0:
        shape = np.sin(np.pi * (np.arange(p.impact_ms) + 0.5) / p.impact_ms)
        n_events = rng.poisson(p.impact_rate * n_steps / 1000.0, n_joints)
        for j in range(n_joints):
            starts = rng.integers(0, n_steps, n_events[j])
            signs = rng.choice([-1.0, 1.0], n_events[j])
            mags = p.impact_torque * rng.uniform(0.5, 1.0, n_events[j])
            for s, sg, m in zip(starts, signs, mags):
                end = min(s + p.impact_ms, n_steps)
                tau[s:end, j] += sg * m * shape[:end - s]
    return tau


def synthesize_log(cfg: SynthConfig, duration: float = 20.0, seed: int = 0,
                   rigs: list[RigParams] | None = None) -> TrajectoryLog:
    """Run the 12-joint rig bank under position PID and log it at 1 kHz."""
    if duration <= 0:
        raise ConfigError("duration must be > 0")
    rng = np.random.default_rng(seed)
    rigs = rigs or default_rigs()
    n_joints = len(rigs)
    bank = RigBank(rigs, [cfg.cylinder] * n_joints)
    loop = replace(cfg.loop, mode="position", gains=cfg.gains)
    profile = make_profile(cfg.profile, n_joints, rng)
    n_steps = int(round(duration * loop.inner_rate))
    dist = make_disturbance(cfg.profile, n_joints, n_steps, rng)
    bank.reset(q0=profile(0.0) if cfg.profile.kind == "gait" else None)
    log = run_closed_loop(loop, bank, profile, duration, disturbance=dist.__getitem__)
    if cfg.tau_noise > 0:
        log.tau = log.tau + cfg.tau_noise * rng.standard_normal(log.tau.shape)
    if cfg.q_noise > 0:
        log.q = log.q + cfg.q_noise * rng.standard_normal(log.q.shape)
    log.reference = None
    log.meta = {"seed": seed, "speed": cfg.profile.speed}
    return log

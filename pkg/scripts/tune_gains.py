"""Pick default PID gains on the default rig.

Position loop: scan kp and keep the smallest gain that settles a 0.2 rad
step to 2% within 0.15 s with no overshoot (larger gains mostly saturate
the valve and make the logged motion bang-bang). Torque loop: report the sine-tracking lag
for a small grid of kp so the shipped gain can be checked by eye.
"""

from __future__ import annotations

import argparse

import numpy as np

from hydrodyn.control import LoopConfig, PidGains, phase_lag, run_closed_loop
from hydrodyn.oracle import CylinderParams, RigBank, RigParams


def settling_time(kp: float, ki: float = 0.0, amp: float = 0.2, duration: float = 2.0):
    bank = RigBank.single(RigParams(), CylinderParams())
    g = PidGains(kp=kp, ki=ki, i_limit=0.05)
    cfg = LoopConfig(mode="position", gains=g)
    log = run_closed_loop(cfg, bank, lambda t: amp if t >= 0.1 else 0.0, duration)
    if log.status != "ok":
        return np.inf, np.inf
    q = log.q[:, 0]
    outside = np.nonzero(np.abs(q - amp) > 0.02 * amp)[0]
    t_s = log.t[outside[-1] + 1] - 0.1 if outside.size and outside[-1] + 1 < len(q) else np.inf
    overshoot = max(0.0, (q.max() - amp) / amp)
    return t_s, overshoot


def torque_lags(kp: float, freqs=(0.5, 1.0, 2.0, 5.0), amp: float = 100.0):
    out = []
    for f in freqs:
        bank = RigBank.single(RigParams(), CylinderParams())
        cfg = LoopConfig(mode="torque", gains=PidGains(kp=kp))
        log = run_closed_loop(cfg, bank, lambda t: amp * np.sin(2 * np.pi * f * t),
                              max(4.0, 6.0 / f))
        out.append(phase_lag(log, f))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=0.15, help="settling target, s")
    args = ap.parse_args(argv)
    chosen = None
    for kp in (1e-3, 2e-3, 3e-3, 4e-3, 6e-3, 1e-2, 2e-2):
        t_s, ov = settling_time(kp)
        print(f"position kp={kp:.0e}: settling {t_s:.3f} s, overshoot {100 * ov:.1f}%")
        if chosen is None and t_s <= args.target and ov == 0.0:
            chosen = kp
    print(f"chosen position kp: {chosen}")
    for kp in (2.5e-7, 5e-7, 1e-6, 2e-6):
        lags = ", ".join(f"{x:.1f}" for x in torque_lags(kp))
        print(f"torque kp={kp:.1e}: lag deg at 0.5/1/2/5 Hz = {lags}")


if __name__ == "__main__":
    main()

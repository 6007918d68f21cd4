"""Latency microbenchmark for the 12-actuator batch predictor.

Calls run back-to-back inside compiled code in batches of ``batch`` calls;
each batch is timed with ``perf_counter_ns`` and divided by its size, so the
reported figures are per-call latencies of ``predict_batch12``'s kernel with
inputs already in memory. Outputs are folded into a checksum so the work
cannot be optimised away.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .actuator import N_JOINTS, ActuatorCoeffs, _batch12_kernel, pack_coeffs
from .errors import ContractError

log = logging.getLogger(__name__)

MIN_ITERS = 100_000


@dataclass
class LatencyStats:
    median: float   # ns per call
    p99: float
    min: float
    iterations: int
    checksum: float
    batch: int

    def to_dict(self) -> dict:
        return asdict(self)


@numba.njit(cache=True)
def _run_calls(k, pool, start, count, out):
    acc = 0.0
    n = pool.shape[0]
    for c in range(count):
        _batch12_kernel(k, pool[(start + c) % n], out)
        for i in range(out.shape[0]):
            acc += out[i]
    return acc


def make_inputs(seed: int, pool: int = 4096) -> np.ndarray:
    """Random snapshots (pool, 12, 4) of [q, q_des, qd, tau]."""
    rng = np.random.default_rng(seed)
    s = np.empty((pool, N_JOINTS, 4))
    s[:, :, 0] = rng.uniform(-1.0, 1.0, (pool, N_JOINTS))
    s[:, :, 1] = s[:, :, 0] + rng.normal(0.0, 0.05, (pool, N_JOINTS))
    s[:, :, 2] = rng.normal(0.0, 2.0, (pool, N_JOINTS))
    s[:, :, 3] = rng.normal(0.0, 200.0, (pool, N_JOINTS))
    return s


def _pin_current_thread() -> None:
    if hasattr(os, "sched_setaffinity"):
        try:
            cpus = sorted(os.sched_getaffinity(0))
            os.sched_setaffinity(0, {cpus[0]})
        except OSError:
            pass


def replay_checksum(coeffs, n_iters: int, seed: int, batch: int = 1000, pool: int = 4096) -> float:
    """Checksum of the same call sequence, batched the same way, without timing."""
    k = _as_packed(coeffs)
    s = make_inputs(seed, pool)
    out = np.empty(N_JOINTS)
    total = 0.0
    for start in range(0, n_iters, batch):
        total += _run_calls(k, s, start, min(batch, n_iters - start), out)
    return float(total)


def _as_packed(coeffs) -> np.ndarray:
    if isinstance(coeffs, np.ndarray):
        k = np.ascontiguousarray(coeffs, dtype=np.float64)
    else:
        if len(coeffs) != N_JOINTS or not all(isinstance(c, ActuatorCoeffs) for c in coeffs):
            raise ContractError(f"need {N_JOINTS} ActuatorCoeffs")
        k = pack_coeffs(coeffs)
    if k.shape != (N_JOINTS, 5):
        raise ContractError(f"coefficients must be ({N_JOINTS}, 5), got {k.shape}")
    return k


def bench_latency(coeffs, n_iters: int = 1_000_000, seed: int = 0, batch: int = 1000,
                  pool: int = 4096) -> LatencyStats:
    if n_iters < MIN_ITERS:
        raise ContractError(f"n_iters must be >= {MIN_ITERS}")
    if batch < 1:
        raise ContractError("batch must be >= 1")
    res = time.get_clock_info("perf_counter").resolution
    if res * 1e9 > 100 and batch < 100:
        log.warning("timer resolution %.0f ns is coarse; raising batch to 100", res * 1e9)
        batch = 100
    _pin_current_thread()
    k = _as_packed(coeffs)
    s = make_inputs(seed, pool)
    out = np.empty(N_JOINTS)
    _run_calls(k, s, 0, min(batch, 10_000), out)   # warm-up (and compile)

    n_batches = -(-n_iters // batch)
    per_call = np.empty(n_batches)
    checksum = 0.0
    start = 0
    clock = time.perf_counter_ns
    for b in range(n_batches):
        count = min(batch, n_iters - start)
        t0 = clock()
        checksum += _run_calls(k, s, start, count, out)
        t1 = clock()
        per_call[b] = (t1 - t0) / count
        start += count
    if per_call.min() <= 0:
        raise RuntimeError("timer returned a zero interval; increase batch")
    return LatencyStats(float(np.median(per_call)), float(np.percentile(per_call, 99)),
                        float(per_call.min()), n_iters, float(checksum), batch)

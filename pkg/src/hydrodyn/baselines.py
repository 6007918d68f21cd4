"""Neural torque-predictor baselines: features, training, prediction, weight files.

Feature frame per joint j (joint-major, 4 values each, 48 in total)::

    [q_des_j - q_j, tau_j / 100, qd_j, previous-step (q_des_j - q_j)]

Targets are next-step torques divided by 100.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np

from . import nets
from .errors import ContractError, DivergedError, SchemaError
from .log import TrajectoryLog
from .nets import NetParams

log = logging.getLogger(__name__)

TAU_SCALE = 100.0
WINDOW = 50
# 5-point grid searched by scripts/tune_lr.py; the chosen value per arch is frozen below.
LR_GRID = (0.003, 0.01, 0.03, 0.1, 0.3)
DEFAULT_LR = {"mlp": 0.1, "lstm": 0.3, "gru": 0.3}
MOMENTUM = 0.9


def feature_frames(tlog: TrajectoryLog) -> np.ndarray:
    """(N, 48) feature frames for every record of a 12-joint log."""
    if tlog.n_joints * 4 != nets.N_IN:
        raise ContractError(f"need {nets.N_IN // 4} joints, got {tlog.n_joints}")
    dq = tlog.q_des - tlog.q
    dq_prev = np.vstack([dq[:1], dq[:-1]])
    per = np.stack([dq, tlog.tau / TAU_SCALE, tlog.qd, dq_prev], axis=2)
    return per.reshape(len(tlog), nets.N_IN)


def dataset_from_log(tlog: TrajectoryLog) -> tuple[np.ndarray, np.ndarray]:
    """Inputs at t and scaled targets tau[t+1] / 100 for t = 0..N-2."""
    X = feature_frames(tlog)
    return X[:-1], tlog.tau[1:] / TAU_SCALE


def to_windows(X: np.ndarray, window: int = WINDOW) -> np.ndarray:
    """(N, F) -> (window, N // window, F), dropping the incomplete tail."""
    nw = len(X) // window
    if nw == 0:
        raise ContractError(f"need at least {window} samples for a window")
    return X[:nw * window].reshape(nw, window, X.shape[1]).transpose(1, 0, 2)


def train(net: NetParams, X: np.ndarray, T: np.ndarray, iters: int = 1000, lr: float | None = None,
          momentum: float = MOMENTUM, window: int = WINDOW, history: list | None = None) -> NetParams:
    """Full-batch gradient descent with momentum on MSE; returns a trained copy.

    Recurrent nets use truncated BPTT over non-overlapping windows of
    ``window`` steps, each starting from a zero state. Deterministic: the only
    randomness is in :func:`nets.init_net`.
    """
    if len(X) == 0:
        raise ContractError("empty dataset")
    if lr is None:
        lr = DEFAULT_LR[net.arch]
    net = net.copy()
    if net.recurrent:
        X, T = to_windows(X, window), to_windows(T, window)
    vel = net.zeros_like()
    for it in range(iters):
        # overflow shows up as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = nets.mse_loss_and_grad(net, X, T)
        if not np.isfinite(loss):
            raise DivergedError(f"training diverged at iteration {it}", iteration=it)
        if history is not None:
            history.append(loss)
        for k, g in grads.items():
            v = vel[k]
            v *= momentum
            v -= lr * g
            net.params[k] += v
    with np.errstate(over="ignore", invalid="ignore"):
        loss = nets.mse_loss_and_grad(net, X, T)[0]
    if not np.isfinite(loss):
        raise DivergedError(f"training diverged at iteration {iters}", iteration=iters)
    if history is not None:
        history.append(loss)
    net.meta.update({"iters": iters, "lr": lr, "momentum": momentum, "window": window})
    return net


def train_on_log(arch: str, tlog: TrajectoryLog, iters: int = 1000, lr: float | None = None,
                 seed: int = 0) -> NetParams:
    X, T = dataset_from_log(tlog)
    return train(nets.init_net(arch, seed), X, T, iters=iters, lr=lr)


def predict_next(net: NetParams, tlog: TrajectoryLog, window: int = WINDOW) -> np.ndarray:
    """Predicted tau[t+1] (N·m) for t = 0..N-2; recurrent state is reset every ``window`` steps."""
    X = feature_frames(tlog)[:-1]
    if not net.recurrent:
        Y, _, _ = nets.forward_batch(net, X)
        return Y * TAU_SCALE
    n = len(X)
    nw = -(-n // window)
    pad = nw * window - n
    Xp = np.vstack([X, np.zeros((pad, X.shape[1]))]) if pad else X
    Y, _, _ = nets.forward_batch(net, to_windows(Xp, window))
    Y = Y.transpose(1, 0, 2).reshape(nw * window, -1)[:n]
    return Y * TAU_SCALE


# --- weight files ---------------------------------------------------------------
# Layout: 8-byte magic b"HDNNW001", uint32 little-endian header length n,
# n bytes of UTF-8 JSON header, then float64 little-endian tensors concatenated
# in header order. Header: {"arch", "sizes", "tensors": [{"name", "shape"}], "meta"}.

MAGIC = b"HDNNW001"


def save_weights(net: NetParams, path) -> None:
    names = sorted(net.params)
    head = {"arch": net.arch, "sizes": list(net.sizes),
            "tensors": [{"name": k, "shape": list(net.params[k].shape)} for k in names],
            "meta": net.meta}
    hb = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for k in names:
            fh.write(np.ascontiguousarray(net.params[k], dtype="<f8").tobytes())


def load_weights(path) -> NetParams:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise SchemaError(f"{path}: not a weights file")
    (n,) = struct.unpack("<I", data[8:12])
    head = json.loads(data[12:12 + n])
    off = 12 + n
    params = {}
    for t in head["tensors"]:
        size = int(np.prod(t["shape"]))
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=off)
        params[t["name"]] = arr.reshape(t["shape"]).astype(float)
        off += 8 * size
    if off != len(data):
        raise SchemaError(f"{path}: {len(data) - off} trailing bytes")
    return NetParams(head["arch"], params, tuple(head["sizes"]), head.get("meta", {}))

"""Numpy MLP, LSTM and GRU torque predictors with hand-written backprop.

All networks map a 48-wide feature frame to 12 outputs through a 64-unit
hidden layer. Outputs are in network units (torque / 100); scaling back to
N·m happens in :mod:`hydrodyn.baselines`.

Recurrent nets work on time-major batches ``(T, B, 48)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

N_IN, N_HID, N_OUT = 48, 64, 12
ARCHS = ("mlp", "lstm", "gru")


def _shapes(arch: str, n_in: int, n_hid: int, n_out: int) -> dict[str, tuple[int, ...]]:
    if arch == "mlp":
        return {"W1": (n_hid, n_in), "b1": (n_hid,), "W2": (n_out, n_hid), "b2": (n_out,)}
    if arch == "lstm":
        return {"Wx": (4 * n_hid, n_in), "Wh": (4 * n_hid, n_hid), "b": (4 * n_hid,),
                "Wo": (n_out, n_hid), "bo": (n_out,)}
    if arch == "gru":
        return {"Wx": (3 * n_hid, n_in), "Wh": (3 * n_hid, n_hid), "b": (3 * n_hid,),
                "bhn": (n_hid,), "Wo": (n_out, n_hid), "bo": (n_out,)}
    raise ContractError(f"unknown architecture {arch!r}")


@dataclass
class NetParams:
    arch: str
    params: dict[str, np.ndarray]
    sizes: tuple[int, int, int] = (N_IN, N_HID, N_OUT)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = _shapes(self.arch, *self.sizes)
        if set(expected) != set(self.params):
            raise ContractError(f"{self.arch}: expected tensors {sorted(expected)}, "
                                f"got {sorted(self.params)}")
        for k, shp in expected.items():
            if self.params[k].shape != shp:
                raise ContractError(f"{self.arch}.{k}: shape {self.params[k].shape} != {shp}")

    @property
    def recurrent(self) -> bool:
        return self.arch != "mlp"

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "NetParams":
        return NetParams(self.arch, {k: v.copy() for k, v in self.params.items()}, self.sizes,
                         dict(self.meta))

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def initial_state(self, batch: int = 1):
        H = self.sizes[1]
        if self.arch == "lstm":
            return (np.zeros((batch, H)), np.zeros((batch, H)))
        if self.arch == "gru":
            return np.zeros((batch, H))
        return None


def init_net(arch: str, seed: int = 0, sizes=(N_IN, N_HID, N_OUT), scale: float = 1.0) -> NetParams:
    """Glorot-uniform weights, zero biases (LSTM forget bias 1)."""
    rng = np.random.default_rng(seed)
    params = {}
    for k, shp in _shapes(arch, *sizes).items():
        if len(shp) == 2:
            lim = scale * np.sqrt(6.0 / (shp[0] + shp[1]))
            params[k] = rng.uniform(-lim, lim, shp)
        else:
            params[k] = np.zeros(shp)
    if arch == "lstm":
        H = sizes[1]
        params["b"][H:2 * H] = 1.0
    return NetParams(arch, params, tuple(sizes))


def _lin(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``X @ W.T`` over the last axis, done as one 2-D product."""
    return (X.reshape(-1, X.shape[-1]) @ W.T).reshape(X.shape[:-1] + (W.shape[0],))


def _outer_sum(dZ: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``sum_{t,b} dZ[t,b,:] X[t,b,:]^T`` as one 2-D product."""
    return dZ.reshape(-1, dZ.shape[-1]).T @ X.reshape(-1, X.shape[-1])


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# --- MLP ------------------------------------------------------------------------

def mlp_forward(net: NetParams, X: np.ndarray):
    p = net.params
    a = X @ p["W1"].T + p["b1"]
    h = np.tanh(a)
    y = h @ p["W2"].T + p["b2"]
    return y, (X, h)


def mlp_backward(net: NetParams, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    X, h = cache
    p = net.params
    da = (dY @ p["W2"]) * (1.0 - h * h)
    return {"W2": dY.T @ h, "b2": dY.sum(0), "W1": da.T @ X, "b1": da.sum(0)}


# --- LSTM -----------------------------------------------------------------------

def lstm_forward(net: NetParams, X: np.ndarray, state=None):
    p = net.params
    T, B, _ = X.shape
    H = net.sizes[1]
    h, c = state if state is not None else net.initial_state(B)
    xw = _lin(X, p["Wx"]) + p["b"]
    hs, cs, gates = [h], [c], []
    for t in range(T):
        z = xw[t] + h @ p["Wh"].T
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates.append((i, f, g, o))
        hs.append(h)
        cs.append(c)
    Hs = np.stack(hs[1:])
    Y = _lin(Hs, p["Wo"]) + p["bo"]
    return Y, (h, c), (X, hs, cs, gates, Hs)


def lstm_backward(net: NetParams, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    p = net.params
    X, hs, cs, gates, Hs = cache
    T = X.shape[0]
    grads = net.zeros_like()
    grads["Wo"] = _outer_sum(dY, Hs)
    grads["bo"] = dY.sum((0, 1))
    dHs = _lin(dY, p["Wo"].T)
    dz_all = np.empty((T,) + (X.shape[1], 4 * net.sizes[1]))
    dh_next = np.zeros_like(hs[0])
    dc_next = np.zeros_like(cs[0])
    for t in reversed(range(T)):
        i, f, g, o = gates[t]
        c = cs[t + 1]
        tc = np.tanh(c)
        dh = dHs[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        dc_next = dc * f
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g),
                             do * o * (1 - o)], axis=1)
        dz_all[t] = dz
        dh_next = dz @ p["Wh"]
    Hprev = np.stack(hs[:-1])
    grads["Wx"] = _outer_sum(dz_all, X)
    grads["Wh"] = _outer_sum(dz_all, Hprev)
    grads["b"] = dz_all.sum((0, 1))
    return grads


# --- GRU ------------------------------------------------------------------------

def gru_forward(net: NetParams, X: np.ndarray, state=None):
    p = net.params
    T, B, _ = X.shape
    H = net.sizes[1]
    h = state if state is not None else net.initial_state(B)
    xw = _lin(X, p["Wx"]) + p["b"]
    Wh = p["Wh"]
    hs, caches = [h], []
    for t in range(T):
        hw = h @ Wh.T
        r = _sigmoid(xw[t, :, :H] + hw[:, :H])
        z = _sigmoid(xw[t, :, H:2 * H] + hw[:, H:2 * H])
        hn = hw[:, 2 * H:] + p["bhn"]
        n = np.tanh(xw[t, :, 2 * H:] + r * hn)
        h = (1.0 - z) * n + z * h
        caches.append((r, z, n, hn))
        hs.append(h)
    Hs = np.stack(hs[1:])
    Y = _lin(Hs, p["Wo"]) + p["bo"]
    return Y, h, (X, hs, caches, Hs)


def gru_backward(net: NetParams, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    p = net.params
    X, hs, caches, Hs = cache
    T, B, _ = X.shape
    H = net.sizes[1]
    grads = net.zeros_like()
    grads["Wo"] = _outer_sum(dY, Hs)
    grads["bo"] = dY.sum((0, 1))
    dHs = _lin(dY, p["Wo"].T)
    dx_all = np.empty((T, B, 3 * H))   # grads wrt x-side pre-activations
    dh_all = np.empty((T, B, 3 * H))   # grads wrt h @ Wh.T (+ bhn for the n block)
    dh_next = np.zeros((B, H))
    for t in reversed(range(T)):
        r, z, n, hn = caches[t]
        hprev = hs[t]
        dh = dHs[t] + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (hprev - n)
        dan = dn * (1.0 - n * n)
        dar = dan * hn * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dhn = dan * r
        dx_all[t] = np.concatenate([dar, daz, dan], axis=1)
        dhw = np.concatenate([dar, daz, dhn], axis=1)
        dh_all[t] = dhw
        dh_next = dh * z + dhw @ p["Wh"]
    Hprev = np.stack(hs[:-1])
    grads["Wx"] = _outer_sum(dx_all, X)
    grads["b"] = dx_all.sum((0, 1))
    grads["Wh"] = _outer_sum(dh_all, Hprev)
    grads["bhn"] = dh_all[:, :, 2 * H:].sum((0, 1))
    return grads


# --- dispatch -------------------------------------------------------------------

def _check_input(net: NetParams, X: np.ndarray) -> None:
    if X.shape[-1] != net.sizes[0]:
        raise ContractError(f"input width {X.shape[-1]} != {net.sizes[0]}")


def forward(net: NetParams, frame: np.ndarray, state=None):
    """Single-step forward: ``frame`` is (48,) or (B, 48). Returns (output, new state)."""
    frame = np.asarray(frame, dtype=float)
    _check_input(net, frame)
    single = frame.ndim == 1
    X = frame[None, :] if single else frame
    if net.arch == "mlp":
        y, _ = mlp_forward(net, X)
        new_state = None
    elif net.arch == "lstm":
        Y, new_state, _ = lstm_forward(net, X[None], state)
        y = Y[0]
    else:
        Y, new_state, _ = gru_forward(net, X[None], state)
        y = Y[0]
    return (y[0] if single else y), new_state


def forward_batch(net: NetParams, X: np.ndarray, state=None):
    """MLP: X is (N, 48). Recurrent: X is (T, B, 48). Returns (Y, state, cache)."""
    X = np.asarray(X, dtype=float)
    _check_input(net, X)
    if net.arch == "mlp":
        Y, cache = mlp_forward(net, X)
        return Y, None, cache
    if net.arch == "lstm":
        return lstm_forward(net, X, state)
    return gru_forward(net, X, state)


def backward(net: NetParams, cache, dY: np.ndarray) -> dict[str, np.ndarray]:
    if net.arch == "mlp":
        return mlp_backward(net, cache, dY)
    if net.arch == "lstm":
        return lstm_backward(net, cache, dY)
    return gru_backward(net, cache, dY)


def mse_loss_and_grad(net: NetParams, X: np.ndarray, target: np.ndarray,
                      reduction: str = "mean"):
    """Squared-error loss and its parameter gradient.

    ``reduction="mean"`` averages over every output element; ``"sum"`` gives
    half the sum of squares.
    """
    Y, _, cache = forward_batch(net, X)
    diff = Y - target
    if reduction == "mean":
        loss = float(np.mean(diff * diff))
        dY = 2.0 * diff / diff.size
    else:
        loss = 0.5 * float(np.sum(diff * diff))
        dY = diff
    return loss, backward(net, cache, dY)


def _loss(net: NetParams, X, target, reduction: str) -> float:
    Y = forward_batch(net, X)[0]
    d = Y - target
    return float(np.mean(d * d)) if reduction == "mean" else 0.5 * float(np.sum(d * d))


def gradient_check(net: NetParams, X: np.ndarray, target: np.ndarray, eps: float = 1e-5,
                   reduction: str = "sum") -> float:
    """Max relative error between backprop and central differences over every parameter.

    Relative error is ``|ga - gn| / max(|ga|, |gn|, 1e-8)``. The summed loss is
    the default so that per-element gradients stay well above round-off.
    """
    _, grads = mse_loss_and_grad(net, X, target, reduction)
    worst = 0.0
    for name, P in net.params.items():
        flat = P.reshape(-1)
        ga = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            lp = _loss(net, X, target, reduction)
            flat[i] = old - eps
            lm = _loss(net, X, target, reduction)
            flat[i] = old
            gn = (lp - lm) / (2 * eps)
            denom = max(abs(ga[i]), abs(gn), 1e-8)
            worst = max(worst, abs(ga[i] - gn) / denom)
    return worst

"""Layer zoo with hand-written backward passes, the ``Model`` stack and MSE loss."""
from __future__ import annotations

import json

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numerics import ShapeMismatch, _same_pad, conv1d, relu, sigmoid

WEIGHTS_FORMAT = "spxnet-weights"
WEIGHTS_VERSION = 1


class StaleCache(RuntimeError):
    pass


def _act(name, z):
    if name == "relu":
        return relu(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, y):
    """Derivative of the activation, from its input ``z`` and output ``y``."""
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - y * y
    if name == "sigmoid":
        return y * (1.0 - y)
    return np.ones_like(z)


def glorot_uniform(rng, shape):
    if len(shape) == 3:  # (kernel_len, in_channels, filters)
        fan_in, fan_out = shape[0] * shape[1], shape[0] * shape[2]
    else:
        fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class. Subclasses fill ``params`` in ``build`` and ``grads`` in ``backward``."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.input_shape = None
        self.output_shape = None

    def build(self, input_shape, rng):
        self.input_shape = tuple(input_shape)
        self.output_shape = self._build(self.input_shape, rng)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        return self.output_shape

    def _build(self, input_shape, rng):
        return input_shape

    def _check_input(self, x):
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"{type(self).__name__} expects (B, {self.input_shape}), got {x.shape}")

    def config(self) -> dict:
        return {"kind": self.kind}

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, x, cache=True):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    kind = "dense"

    def __init__(self, units, activation="relu"):
        super().__init__()
        self.units, self.activation = units, activation

    def _build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeMismatch(f"Dense needs flat input, got {input_shape}")
        self.params["W"] = glorot_uniform(rng, (input_shape[0], self.units))
        self.params["b"] = np.zeros(self.units)
        return (self.units,)

    def config(self):
        return {"kind": self.kind, "units": self.units, "activation": self.activation}

    def forward(self, x, cache=True):
        self._check_input(x)
        z = x @ self.params["W"] + self.params["b"]
        y = _act(self.activation, z)
        if cache:
            self._cache = (x, z, y)
        return y

    def backward(self, dy):
        x, z, y = self._cache
        dz = dy * _act_grad(self.activation, z, y)
        self.grads["W"] = x.T @ dz
        self.grads["b"] = dz.sum(axis=0)
        return dz @ self.params["W"].T


class Conv1D(Layer):
    """Temporal convolution, kernels stored as (kernel_len, in_channels, filters)."""

    kind = "conv1d"

    def __init__(self, filters, kernel_len, activation="relu", padding="valid"):
        super().__init__()
        self.filters, self.kernel_len = filters, kernel_len
        self.activation, self.padding = activation, padding

    def _build(self, input_shape, rng):
        L, C = input_shape
        if self.padding == "valid" and L < self.kernel_len:
            raise ShapeMismatch(f"kernel length {self.kernel_len} exceeds {L}")
        self.params["W"] = glorot_uniform(rng, (self.kernel_len, C, self.filters))
        self.params["b"] = np.zeros(self.filters)
        out_len = L if self.padding == "same" else L - self.kernel_len + 1
        return (out_len, self.filters)

    def config(self):
        return {"kind": self.kind, "filters": self.filters, "kernel_len": self.kernel_len,
                "activation": self.activation, "padding": self.padding}

    def forward(self, x, cache=True):
        self._check_input(x)
        z = conv1d(x, self.params["W"], self.params["b"], self.padding)
        y = _act(self.activation, z)
        if cache:
            self._cache = (x, z, y)
        return y

    def backward(self, dy):
        x, z, y = self._cache
        W = self.params["W"]
        K = self.kernel_len
        dz = dy * _act_grad(self.activation, z, y)
        xp = _same_pad(x, K) if self.padding == "same" else x
        win = sliding_window_view(xp, K, axis=1)  # (B, L', C, K)
        self.grads["W"] = np.einsum("btck,btf->kcf", win, dz)
        self.grads["b"] = dz.sum(axis=(0, 1))
        dxp = np.zeros_like(xp)
        out_len = dz.shape[1]
        for k in range(K):
            dxp[:, k:k + out_len, :] += dz @ W[k].T
        if self.padding == "same":
            left = (K - 1) // 2
            return dxp[:, left:left + x.shape[1], :]
        return dxp


class Flatten(Layer):
    kind = "flatten"

    def _build(self, input_shape, rng):
        return (int(np.prod(input_shape)),)

    def forward(self, x, cache=True):
        self._check_input(x)
        return x.reshape(len(x), -1)

    def backward(self, dy):
        return dy.reshape((len(dy),) + self.input_shape)


class SimpleRNN(Layer):
    """h_t = act(x_t W + h_{t-1} U + b), zero initial state; emits the last h."""

    kind = "simple_rnn"

    def __init__(self, units, activation="tanh"):
        super().__init__()
        self.units, self.activation = units, activation

    def _build(self, input_shape, rng):
        _, C = input_shape
        u = self.units
        self.params["W"] = glorot_uniform(rng, (C, u))
        self.params["U"] = glorot_uniform(rng, (u, u))
        self.params["b"] = np.zeros(u)
        return (u,)

    def config(self):
        return {"kind": self.kind, "units": self.units, "activation": self.activation}

    def forward(self, x, cache=True):
        self._check_input(x)
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        B, T, _ = x.shape
        xw = x @ W + b
        hs = np.zeros((T + 1, B, self.units))
        zs = np.empty((T, B, self.units))
        for t in range(T):
            zs[t] = xw[:, t] + hs[t] @ U
            hs[t + 1] = _act(self.activation, zs[t])
        if cache:
            self._cache = (x, zs, hs)
        return hs[T]

    def backward(self, dy):
        x, zs, hs = self._cache
        W, U = self.params["W"], self.params["U"]
        T = x.shape[1]
        dz_all = np.empty_like(zs)
        dU = np.zeros_like(U)
        dh = dy
        for t in range(T - 1, -1, -1):
            dz = dh * _act_grad(self.activation, zs[t], hs[t + 1])
            dU += hs[t].T @ dz
            dh = dz @ U.T
            dz_all[t] = dz
        dz_bt = dz_all.transpose(1, 0, 2)  # (B, T, u)
        self.grads["W"] = np.einsum("btc,btu->cu", x, dz_bt)
        self.grads["U"] = dU
        self.grads["b"] = dz_bt.sum(axis=(0, 1))
        return dz_bt @ W.T


class LSTM(Layer):
    """LSTM with fused gate blocks in the order input, forget, cell, output."""

    kind = "lstm"

    def __init__(self, units):
        super().__init__()
        self.units = units

    def _build(self, input_shape, rng):
        _, C = input_shape
        u = self.units
        self.params["W"] = glorot_uniform(rng, (C, 4 * u))
        self.params["U"] = glorot_uniform(rng, (u, 4 * u))
        self.params["b"] = np.zeros(4 * u)
        return (u,)

    def config(self):
        return {"kind": self.kind, "units": self.units}

    def forward(self, x, cache=True, c0=None):
        self._check_input(x)
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        B, T, _ = x.shape
        u = self.units
        xw = x @ W + b
        hs = np.zeros((T + 1, B, u))
        cs = np.zeros((T + 1, B, u))
        if c0 is not None:
            cs[0] = c0
        gates = np.empty((T, B, 4 * u))
        tcs = np.empty((T, B, u))
        for t in range(T):
            a = xw[:, t] + hs[t] @ U
            g = gates[t]
            g[:, :2 * u] = sigmoid(a[:, :2 * u])
            g[:, 2 * u:3 * u] = np.tanh(a[:, 2 * u:3 * u])
            g[:, 3 * u:] = sigmoid(a[:, 3 * u:])
            cs[t + 1] = g[:, u:2 * u] * cs[t] + g[:, :u] * g[:, 2 * u:3 * u]
            tcs[t] = np.tanh(cs[t + 1])
            hs[t + 1] = g[:, 3 * u:] * tcs[t]
        if cache:
            self._cache = (x, gates, cs, tcs, hs)
        return hs[T]

    def backward(self, dy):
        x, gates, cs, tcs, hs = self._cache
        W, U = self.params["W"], self.params["U"]
        T = x.shape[1]
        u = self.units
        da_all = np.empty_like(gates)
        dU = np.zeros_like(U)
        dh, dc = dy, np.zeros_like(dy)
        for t in range(T - 1, -1, -1):
            g = gates[t]
            i, f, gg, o = g[:, :u], g[:, u:2 * u], g[:, 2 * u:3 * u], g[:, 3 * u:]
            tc = tcs[t]
            dc = dc + dh * o * (1.0 - tc * tc)
            da = da_all[t]
            da[:, :u] = dc * gg * i * (1.0 - i)
            da[:, u:2 * u] = dc * cs[t] * f * (1.0 - f)
            da[:, 2 * u:3 * u] = dc * i * (1.0 - gg * gg)
            da[:, 3 * u:] = dh * tc * o * (1.0 - o)
            dU += hs[t].T @ da
            dh = da @ U.T
            dc = dc * f
        da_bt = da_all.transpose(1, 0, 2)
        self.grads["W"] = np.einsum("btc,btg->cg", x, da_bt)
        self.grads["U"] = dU
        self.grads["b"] = da_bt.sum(axis=(0, 1))
        return da_bt @ W.T


LAYER_KINDS = {cls.kind: cls for cls in (Dense, Conv1D, Flatten, SimpleRNN, LSTM)}


def layer_from_config(cfg: dict) -> Layer:
    cfg = dict(cfg)
    return LAYER_KINDS[cfg.pop("kind")](**cfg)


class Model:
    """An ordered layer stack, initialised from ``seed`` with Glorot-uniform weights."""

    def __init__(self, layers, input_shape=(14, 2), seed=0, name=None):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.name = name
        self.seed = seed
        self._fresh = False
        self.init_params(seed)

    def init_params(self, seed):
        rng = np.random.default_rng(seed)
        shape = self.input_shape
        for layer in self.layers:
            layer.params = {}
            shape = layer.build(shape, rng)
        self.output_shape = shape
        self.seed = seed
        self._fresh = False
        return self

    def forward(self, x, cache=True):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape or len(x) == 0:
            raise ShapeMismatch(f"model expects (B>=1, {self.input_shape}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, cache=cache)
        if cache:
            self._fresh = True
        return x

    def predict(self, x):
        return self.forward(x, cache=False)

    __call__ = predict

    def backward(self, dpred):
        if not self._fresh:
            raise StaleCache("backward() needs a preceding forward() on the same batch")
        self._fresh = False
        d = dpred
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return self.gradients()

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.grads.items()}

    def count_params(self) -> int:
        return sum(layer.n_params() for layer in self.layers)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters().values()])

    def set_flat(self, flat):
        i = 0
        for p in self.parameters().values():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def to_dict(self) -> dict:
        return {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "name": self.name,
            "seed": self.seed,
            "input_shape": list(self.input_shape),
            "layers": [
                {"index": i, "config": layer.config(),
                 "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                            for k, v in layer.params.items()}}
                for i, layer in enumerate(self.layers)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Model":
        if doc.get("format") != WEIGHTS_FORMAT or doc.get("version") != WEIGHTS_VERSION:
            raise ValueError("not a spxnet weights document")
        layers = [layer_from_config(entry["config"]) for entry in doc["layers"]]
        model = cls(layers, doc["input_shape"], seed=doc["seed"], name=doc["name"])
        for layer, entry in zip(model.layers, doc["layers"]):
            for k, spec in entry["params"].items():
                arr = np.array(spec["data"], dtype=np.float64).reshape(spec["shape"])
                if arr.shape != layer.params[k].shape:
                    raise ShapeMismatch(f"layer {entry['index']} {k}: {arr.shape}")
                layer.params[k] = arr
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def mse_loss(pred, target):
    """Mean squared error over the batch and its gradient w.r.t. ``pred``."""
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size

"""Dense float64 array kernels used by the layers.

Arrays are plain ``numpy.ndarray`` objects in float64; the functions here add
shape checking and the exact conventions the layers rely on (valid
cross-correlation, ReLU subgradient 0 at 0).
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeMismatch(ValueError):
    pass


class KernelTooLong(ShapeMismatch):
    pass


def as_tensor(x) -> np.ndarray:
    t = np.asarray(x, dtype=np.float64)
    if not 1 <= t.ndim <= 3:
        raise ShapeMismatch(f"rank must be 1..3, got {t.ndim}")
    return t


def check_finite(x, name="tensor"):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{name} contains NaN or Inf")
    return x


def matmul(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _same_pad(x, k):
    left = (k - 1) // 2
    pad = [(0, 0)] * x.ndim
    pad[-2] = (left, k - 1 - left)
    return np.pad(x, pad)


def conv1d(x, kernels, bias, padding="valid"):
    """Stride-1 cross-correlation over the time axis.

    ``x`` is (L, C) or (B, L, C); ``kernels`` is (K, C, F); ``bias`` is (F,).
    Output is (..., L - K + 1, F) for ``"valid"`` and (..., L, F) for ``"same"``.
    """
    x = np.asarray(x, dtype=np.float64)
    K, C, F = kernels.shape
    if x.ndim not in (2, 3) or x.shape[-1] != C or bias.shape != (F,):
        raise ShapeMismatch(f"input {x.shape}, kernels {kernels.shape}, bias {bias.shape}")
    if padding == "same":
        x = _same_pad(x, K)
    elif padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    if x.shape[-2] < K:
        raise KernelTooLong(f"kernel length {K} exceeds input length {x.shape[-2]}")
    win = sliding_window_view(x, K, axis=-2)  # (..., L', C, K)
    return np.einsum("...ck,kcf->...f", win, kernels) + bias


def conv1d_valid(x, kernels, bias):
    return conv1d(x, kernels, bias, "valid")


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    return (np.asarray(x) > 0).astype(np.float64)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def tanh(x):
    return np.tanh(x)


def _same_shape(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def add(a, b):
    a, b = _same_shape(a, b)
    return a + b


def sub(a, b):
    a, b = _same_shape(a, b)
    return a - b


def hadamard(a, b):
    a, b = _same_shape(a, b)
    return a * b


def scale(a, s):
    return np.asarray(a, dtype=np.float64) * float(s)


def total(a):
    return float(np.sum(a))


def mean(a):
    return float(np.mean(a))

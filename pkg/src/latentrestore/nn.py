"""Minimal CPU neural-network layers with hand-written backward passes.

Tensors are NHWC ndarrays, float32 by default (float64 works too, which the
gradient-check tests rely on).  Each layer caches what its backward pass
needs during ``forward`` and overwrites its parameter gradients on every
``backward`` call, so a layer instance must appear at most once per step.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Conv2d",
    "GroupNorm",
    "Linear",
    "SiLU",
    "Sigmoid",
    "Upsample2x",
    "Adam",
    "collect_state",
    "load_state",
]


def _out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _patch_index(h_pad: int, w_pad: int, c: int, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """Flat gather indices of shape (oh*ow, k*k*c) into a padded (h_pad, w_pad, c) array."""
    rows = np.arange(oh)[:, None] * stride + np.arange(k)[None, :]          # (oh, k)
    cols = np.arange(ow)[:, None] * stride + np.arange(k)[None, :]          # (ow, k)
    grid = rows[:, None, :, None] * w_pad + cols[None, :, None, :]          # (oh, ow, k, k)
    idx = grid[..., None] * c + np.arange(c)                                # (oh, ow, k, k, c)
    return idx.reshape(oh * ow, k * k * c)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, pad: int):
    """Correlate NHWC ``x`` with ``w`` of shape (k, k, cin, cout).

    Returns (y, cols) where ``cols`` are the gathered patches used by the
    weight-gradient computation.
    """
    n, h, wdt, cin = x.shape
    k = w.shape[0]
    oh = _out_size(h, k, stride, pad)
    ow = _out_size(wdt, k, stride, pad)
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else x
    idx = _patch_index(xp.shape[1], xp.shape[2], cin, k, stride, oh, ow)
    cols = xp.reshape(n, -1)[:, idx]                                        # (n, oh*ow, k*k*cin)
    y = cols @ w.reshape(-1, w.shape[-1])
    if b is not None:
        y += b
    return y.reshape(n, oh, ow, w.shape[-1]), cols


class Conv2d:
    """3x3 (or kxk) convolution, stride 1 or 2, symmetric zero padding."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator,
                 k: int = 3, stride: int = 1, pad: int | None = None):
        self.k, self.stride = k, stride
        self.pad = (k - 1) // 2 if pad is None else pad
        scale = math.sqrt(2.0 / (k * k * cin))
        self.w = (rng.standard_normal((k, k, cin, cout)) * scale).astype(np.float32)
        self.b = np.zeros(cout, dtype=np.float32)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, cols = _conv_forward(x, self.w, self.b, self.stride, self.pad)
        self._cache = (cols, x.shape)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        cols, x_shape = self._cache
        n, h, wdt, cin = x_shape
        k, s, p = self.k, self.stride, self.pad
        cout = self.w.shape[-1]
        dy2 = dy.reshape(n, -1, cout)
        self.gb = dy2.sum(axis=(0, 1))
        self.gw = (cols.reshape(-1, cols.shape[-1]).T @ dy2.reshape(-1, cout)).reshape(self.w.shape)

        # dx: correlate the zero-dilated dy with the flipped, channel-swapped kernel.
        oh, ow = dy.shape[1], dy.shape[2]
        dyd = dy
        if s > 1:
            dyd = np.zeros((n, (oh - 1) * s + 1, (ow - 1) * s + 1, cout), dtype=dy.dtype)
            dyd[:, ::s, ::s] = dy
        wb = self.w[::-1, ::-1].transpose(0, 1, 3, 2)                       # (k, k, cout, cin)
        full, _ = _conv_forward(dyd, wb, None, 1, k - 1)
        hp, wp = h + 2 * p, wdt + 2 * p
        dxp = np.zeros((n, hp, wp, cin), dtype=dy.dtype)
        dxp[:, : full.shape[1], : full.shape[2]] = full
        return dxp[:, p : p + h, p : p + wdt]


class GroupNorm:
    """Group normalization over (H, W, C/groups) per sample, affine per channel."""

    def __init__(self, c: int, groups: int = 8, eps: float = 1e-5):
        if c % groups:
            raise ValueError(f"channels {c} not divisible by groups {groups}")
        self.groups, self.eps = groups, eps
        self.g = np.ones(c, dtype=np.float32)
        self.b = np.zeros(c, dtype=np.float32)
        self.gg = np.zeros_like(self.g)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return {"g": self.g, "b": self.b}

    def grads(self):
        return {"g": self.gg, "b": self.gb}

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        cg = c // self.groups
        xg = x.reshape(n, h, w, self.groups, cg)
        mu = xg.mean(axis=(1, 2, 4), keepdims=True)
        var = xg.var(axis=(1, 2, 4), keepdims=True)
        ivar = 1.0 / np.sqrt(var + self.eps)
        xhat = (xg - mu) * ivar
        self._cache = (xhat, ivar)
        return xhat.reshape(n, h, w, c) * self.g + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, ivar = self._cache
        n, h, w, c = dy.shape
        cg = c // self.groups
        xhat_flat = xhat.reshape(n, h, w, c)
        self.gg = (dy * xhat_flat).sum(axis=(0, 1, 2))
        self.gb = dy.sum(axis=(0, 1, 2))
        dxh = (dy * self.g).reshape(n, h, w, self.groups, cg)
        m = h * w * cg
        s1 = dxh.sum(axis=(1, 2, 4), keepdims=True)
        s2 = (dxh * xhat).sum(axis=(1, 2, 4), keepdims=True)
        dx = ivar / m * (m * dxh - s1 - xhat * s2)
        return dx.reshape(n, h, w, c)


class Linear:
    def __init__(self, din: int, dout: int, rng: np.random.Generator):
        scale = math.sqrt(1.0 / din)
        self.w = (rng.standard_normal((din, dout)) * scale).astype(np.float32)
        self.b = np.zeros(dout, dtype=np.float32)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x
        return x @ self.w + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._cache
        self.gw = x.T @ dy
        self.gb = dy.sum(axis=0)
        return dy @ self.w.T


class SiLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        sig = 1.0 / (1.0 + np.exp(-x))
        self._cache = (x, sig)
        return x * sig

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, sig = self._cache
        return dy * (sig * (1.0 + x * (1.0 - sig)))


class Sigmoid:
    def forward(self, x: np.ndarray) -> np.ndarray:
        y = 1.0 / (1.0 + np.exp(-x))
        self._cache = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        y = self._cache
        return dy * y * (1.0 - y)


class Upsample2x:
    """Nearest-neighbour spatial upsampling by a factor of 2."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        n, h2, w2, c = dy.shape
        return dy.reshape(n, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4))


class Adam:
    """Adam over a named parameter dict; updates arrays in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k].astype(p.dtype, copy=False)
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def collect_state(layers: list[tuple[str, object]]) -> dict[str, np.ndarray]:
    """Flatten named layers into a 'prefix.param' -> array map (live views)."""
    state: dict[str, np.ndarray] = {}
    for name, layer in layers:
        if not hasattr(layer, "params"):
            continue
        for pname, arr in layer.params().items():
            state[f"{name}.{pname}"] = arr
    return state


def collect_grads(layers: list[tuple[str, object]]) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    for name, layer in layers:
        if not hasattr(layer, "grads"):
            continue
        for pname, arr in layer.grads().items():
            grads[f"{name}.{pname}"] = arr
    return grads


def load_state(layers: list[tuple[str, object]], tensors: dict[str, np.ndarray]) -> None:
    """Copy ``tensors`` into the layers' parameters, validating names and shapes."""
    for name, layer in layers:
        if not hasattr(layer, "params"):
            continue
        for pname, arr in layer.params().items():
            key = f"{name}.{pname}"
            if key not in tensors:
                raise KeyError(f"weights container is missing tensor '{key}'")
            src = tensors[key]
            if src.shape != arr.shape:
                raise ValueError(
                    f"tensor '{key}' has shape {src.shape}, expected {arr.shape}"
                )
            arr[...] = src

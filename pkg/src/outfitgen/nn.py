"""Minimal dense/conv layers with hand-written backprop, float64 throughout.

Layers are functional: ``forward`` is pure, ``forward_train`` returns the
activation plus an opaque cache, and ``backward(cache, grad)`` accumulates
parameter gradients and returns the input gradient. Caches never live on
the layer object, so shared models can serve concurrent read-only
inference while a single trainer owns the gradient buffers.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ShapeError


class Param:
    """Named trainable array with an accumulated gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self):
        return f"Param({self.name}, shape={self.value.shape})"


class Linear:
    def __init__(self, name: str, in_dim: int, out_dim: int, rng: np.random.Generator,
                 init: str = "he"):
        scale = {"he": np.sqrt(2.0 / in_dim), "lecun": np.sqrt(1.0 / in_dim)}[init]
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.W = Param(f"{name}.W", rng.normal(0.0, scale, size=(in_dim, out_dim)))
        self.b = Param(f"{name}.b", np.zeros(out_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"{self.W.name}: expected input dim {self.in_dim}, got {x.shape[-1]}")
        return x @ self.W.value + self.b.value

    def forward_train(self, x: np.ndarray):
        return self.forward(x), x

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        x = cache
        self.W.grad += x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.W.value.T

    def params(self) -> list[Param]:
        return [self.W, self.b]


class ReLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)

    def forward_train(self, x: np.ndarray):
        y = np.maximum(x, 0.0)
        return y, x > 0.0

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return grad * cache

    def params(self) -> list[Param]:
        return []


class Conv2d:
    """3x3-style convolution over (N, C, H, W) built on im2col + BLAS."""

    def __init__(self, name: str, c_in: int, c_out: int, rng: np.random.Generator,
                 ksize: int = 3, stride: int = 1, pad: int = 1):
        fan_in = c_in * ksize * ksize
        self.c_in, self.c_out = c_in, c_out
        self.ksize, self.stride, self.pad = ksize, stride, pad
        self.W = Param(f"{name}.W", rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                               size=(c_out, c_in, ksize, ksize)))
        self.b = Param(f"{name}.b", np.zeros(c_out))

    def _check(self, x: np.ndarray):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeError(f"{self.W.name}: expected (N, {self.c_in}, H, W), got {x.shape}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_train(x)[0]

    def forward_train(self, x: np.ndarray):
        self._check(x)
        n, _, h, w = x.shape
        oh = kernels.conv_output_size(h, self.ksize, self.stride, self.pad)
        ow = kernels.conv_output_size(w, self.ksize, self.stride, self.pad)
        cols = kernels.im2col(x, self.ksize, self.stride, self.pad)
        w2 = self.W.value.reshape(self.c_out, -1)
        out = cols @ w2.T + self.b.value
        y = out.reshape(n, oh, ow, self.c_out).transpose(0, 3, 1, 2)
        return y, (cols, x.shape)

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        cols, x_shape = cache
        n, _, oh, ow = grad.shape
        g2 = grad.transpose(0, 2, 3, 1).reshape(n * oh * ow, self.c_out)
        self.W.grad += (g2.T @ cols).reshape(self.W.value.shape)
        self.b.grad += g2.sum(axis=0)
        dcols = g2 @ self.W.value.reshape(self.c_out, -1)
        return kernels.col2im(dcols, x_shape, self.ksize, self.stride, self.pad)

    def params(self) -> list[Param]:
        return [self.W, self.b]


class GlobalAvgPool:
    """Mean over the spatial axes: (N, C, H, W) -> (N, C)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.mean(axis=(2, 3))

    def forward_train(self, x: np.ndarray):
        return x.mean(axis=(2, 3)), x.shape

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        n, c, h, w = cache
        return np.broadcast_to(grad[:, :, None, None], (n, c, h, w)) / (h * w)

    def params(self) -> list[Param]:
        return []


class Sequential:
    def __init__(self, layers: list):
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_train(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward_train(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, grad: np.ndarray) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad = layer.backward(cache, grad)
        return grad

    def params(self) -> list[Param]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out


def mlp(name: str, dims: list[int], rng: np.random.Generator,
        output_init: str = "lecun") -> Sequential:
    """Fully connected stack with ReLU between layers, linear output."""
    layers: list = []
    for i in range(len(dims) - 1):
        last = i == len(dims) - 2
        layers.append(Linear(f"{name}.fc{i}", dims[i], dims[i + 1], rng,
                             init=output_init if last else "he"))
        if not last:
            layers.append(ReLU())
    return Sequential(layers)


def zero_grads(params: list[Param]):
    for p in params:
        p.grad[...] = 0.0


class Adam:
    """Adaptive-moment optimizer over an explicit parameter list."""

    def __init__(self, params: list[Param], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * np.square(p.grad)
            p.value -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def finite_difference_check(loss_fn, params: list[Param], rng: np.random.Generator,
                            probes_per_param: int = 5, h: float = 1e-5) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` must zero the grads, run forward+backward, and return the
    scalar loss; after the call each param's ``grad`` holds the analytic
    gradient. Returns the max relative error per parameter name.
    """
    loss_fn()
    analytic = {p.name: p.grad.copy() for p in params}
    report: dict[str, float] = {}
    for p in params:
        flat = p.value.reshape(-1)
        n_probe = min(probes_per_param, flat.size)
        idx = rng.choice(flat.size, size=n_probe, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[p.name].reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
        report[p.name] = worst
    # restore analytic grads for callers that inspect them afterwards
    loss_fn()
    return report

"""Layers and losses with explicit forward/backward passes.

Activations are time-major: ``(batch, time, channels)``. In this layout the
electrode-spanning spatial convolution is a per-timepoint linear map (an
ordinary dense layer broadcast over time), temporal convolutions assemble
their patch matrix from ``kernel`` contiguous slice copies feeding a single
GEMM, and the pooling layers reduce over a contiguous axis. Every layer
caches what its backward pass needs when called with ``training=True`` and
is single-use per step: ``forward`` then ``backward`` before the next
``forward``.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    """A trainable array and its gradient accumulator."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = value
        self.grad = np.zeros_like(value)
        self.name = name


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int,
                   fan_out: int, dtype=np.float32) -> np.ndarray:
    """Glorot/Xavier uniform draw on +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class; stateless layers only need ``forward``/``backward``."""

    def params(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray):
        raise NotImplementedError


class ToTimeMajor(Layer):
    """Reorders ``(batch, channels, samples)`` input to ``(batch, time, channels)``."""

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def backward(self, dy: np.ndarray):
        # The input is raw data; nothing consumes its gradient.
        return None


class Dense(Layer):
    """Linear map ``y = x W + b`` over the last axis.

    Accepts any number of leading batch-like axes; with time-major 3-D input
    this is exactly a width-1 convolution across all channels, which is how
    the spatial filtering stage is realized.
    """

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.weight = Parameter(
            glorot_uniform(rng, (in_features, out_features),
                           in_features, out_features, dtype), "weight")
        self.bias = Parameter(np.zeros(out_features, dtype=dtype), "bias")
        self._x = None

    def params(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if training:
            self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x2 = self._x.reshape(-1, self.weight.value.shape[0])
        dy2 = dy.reshape(-1, self.weight.value.shape[1])
        self._x = None
        self.weight.grad += x2.T @ dy2
        self.bias.grad += dy2.sum(axis=0)
        return dy @ self.weight.value.T


class TemporalConv(Layer):
    """Valid 1-D convolution along the time axis.

    Parameters
    ----------
    in_channels, out_channels : int
    kernel : int
        Temporal kernel length; output time size shrinks by ``kernel - 1``.
    rng : np.random.Generator
        Source of the Glorot-uniform weight draw.
    dtype : numpy dtype
        Parameter dtype.

    The weight is stored as ``(kernel * in_channels, out_channels)`` so the
    whole layer is one GEMM on a patch matrix assembled from ``kernel``
    shifted slices of the input.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: np.random.Generator, dtype=np.float32):
        fan_in = in_channels * kernel
        fan_out = out_channels * kernel
        self.weight = Parameter(
            glorot_uniform(rng, (kernel * in_channels, out_channels),
                           fan_in, fan_out, dtype), "weight")
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype), "bias")
        self.kernel = kernel
        self.in_channels = in_channels
        self._cache = None

    def params(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def _patches(self, x: np.ndarray) -> np.ndarray:
        b, w, c = x.shape
        k = self.kernel
        wo = w - k + 1
        if wo < 1:
            raise ValueError(f"input time axis {w} shorter than kernel {k}")
        cols = np.empty((b, wo, k * c), dtype=x.dtype)
        for i in range(k):
            cols[:, :, i * c:(i + 1) * c] = x[:, i:i + wo, :]
        return cols

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        cols = self._patches(x)
        if training:
            self._cache = (cols, x.shape)
        b, wo, _ = cols.shape
        out = cols.reshape(b * wo, -1) @ self.weight.value + self.bias.value
        return out.reshape(b, wo, -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        cols, xshape = self._cache
        self._cache = None
        b, wo, oc = dy.shape
        dy2 = dy.reshape(b * wo, oc)
        self.weight.grad += cols.reshape(b * wo, -1).T @ dy2
        self.bias.grad += dy2.sum(axis=0)
        dcols = (dy2 @ self.weight.value.T).reshape(b, wo, -1)
        dx = np.zeros(xshape, dtype=dy.dtype)
        c = self.in_channels
        for i in range(self.kernel):
            dx[:, i:i + wo, :] += dcols[:, :, i * c:(i + 1) * c]
        return dx


class ReLU(Layer):
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        mask = x > 0
        if training:
            self._mask = mask
        return x * mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp is evaluated on the non-positive branch only so large |x|
    # saturates without overflow.
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y


class Sigmoid(Layer):
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        y = _sigmoid(x)
        if training:
            self._y = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._y * (1.0 - self._y)


class MaxPoolTime(Layer):
    """Non-overlapping max pool along time with floor division.

    A trailing remainder that does not fill a window is dropped, so time
    size W maps to floor(W / size). The gradient routes to the first maximum
    of each window (the argmax convention).
    """

    def __init__(self, size: int = 2):
        self.size = size

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        b, w, c = x.shape
        s = self.size
        wo = w // s
        blocks = x[:, :wo * s, :].reshape(b, wo, s, c)
        if training:
            self._argmax = blocks.argmax(axis=2)
            self._in_width = w
        return blocks.max(axis=2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        b, wo, c = dy.shape
        s = self.size
        dblocks = np.zeros((b, wo, s, c), dtype=dy.dtype)
        np.put_along_axis(dblocks, self._argmax[:, :, None, :], dy[:, :, None, :],
                          axis=2)
        dx = dblocks.reshape(b, wo * s, c)
        if wo * s < self._in_width:
            full = np.zeros((b, self._in_width, c), dtype=dy.dtype)
            full[:, :wo * s, :] = dx
            dx = full
        return dx


class AdaptiveMaxPoolTime(Layer):
    """Max pool onto a fixed number of near-equal contiguous time bins.

    Bin ``i`` covers samples ``floor(i * W / out) .. floor((i+1) * W / out) - 1``,
    a partition into contiguous segments whose lengths differ by at most one.
    Requires ``W >= out``.
    """

    def __init__(self, out_width: int):
        self.out_width = out_width
        self._maps: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _gather_map(self, w: int) -> tuple[np.ndarray, np.ndarray]:
        if w < self.out_width:
            raise ValueError(
                f"adaptive pool needs time axis >= {self.out_width}, got {w}")
        if w not in self._maps:
            edges = (np.arange(self.out_width + 1) * w) // self.out_width
            lengths = np.diff(edges)
            maxbin = int(lengths.max())
            idx = edges[:-1, None] + np.arange(maxbin)[None, :]
            valid = np.arange(maxbin)[None, :] < lengths[:, None]
            self._maps[w] = (np.where(valid, idx, 0), valid)
        return self._maps[w]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        idx, valid = self._gather_map(x.shape[1])
        gathered = np.where(valid[None, :, :, None], x[:, idx, :],
                            x.dtype.type(-np.inf))
        local = gathered.argmax(axis=2)
        out = np.take_along_axis(gathered, local[:, :, None, :], axis=2)[:, :, 0, :]
        if training:
            offsets = (np.arange(self.out_width) * x.shape[1]) // self.out_width
            self._argmax = local + offsets[None, :, None]
            self._in_width = x.shape[1]
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = np.zeros((dy.shape[0], self._in_width, dy.shape[2]), dtype=dy.dtype)
        np.put_along_axis(dx, self._argmax, dy, axis=1)
        return dx


class Dropout(Layer):
    """Inverted dropout: active only in training, identity at inference."""

    def __init__(self, p: float, rng: np.random.Generator):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = p
        self.rng = rng

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if not training or self.p == 0.0:
            return x
        keep = self.rng.random(x.shape) >= self.p
        self._mask = keep.astype(x.dtype) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.p == 0.0:
            return dy
        return dy * self._mask


class Flatten(Layer):
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if training:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)


class Sequential(Layer):
    """A chain of layers applied in order."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def params(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, dy: np.ndarray):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class MSELoss:
    """Mean squared error over every output element."""

    def forward(self, pred: np.ndarray, target: np.ndarray) -> float:
        self._diff = pred - target
        return float(np.mean(self._diff ** 2))

    def backward(self) -> np.ndarray:
        return (2.0 / self._diff.size) * self._diff


class SoftmaxCrossEntropy:
    """Fused softmax and cross-entropy on integer labels."""

    @staticmethod
    def probabilities(logits: np.ndarray) -> np.ndarray:
        shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def forward(self, logits: np.ndarray, labels: np.ndarray) -> float:
        n = logits.shape[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1))
        self._probs = np.exp(shifted - logsumexp[:, None])
        self._labels = labels
        return float(np.mean(logsumexp - shifted[np.arange(n), labels]))

    def backward(self) -> np.ndarray:
        n = self._probs.shape[0]
        grad = self._probs.copy()
        grad[np.arange(n), self._labels] -= 1.0
        return grad / n


class BCEWithLogits:
    """Binary cross-entropy on logits, numerically stable for large |z|."""

    def forward(self, logits: np.ndarray, targets: np.ndarray) -> float:
        self._logits = logits
        self._targets = targets
        z = logits
        return float(np.mean(np.maximum(z, 0) - z * targets
                             + np.log1p(np.exp(-np.abs(z)))))

    def backward(self) -> np.ndarray:
        sig = _sigmoid(self._logits)
        return (sig - self._targets) / self._logits.size

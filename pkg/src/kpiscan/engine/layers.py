"""Layers with hand-derived analytic gradients.

Every layer follows the same protocol: ``forward(x, train)`` caches whatever
the backward pass needs (train mode only), ``backward(grad_out)`` returns the
gradient with respect to the layer input and stores parameter gradients,
``params()`` / ``grads()`` expose aligned (name, array) lists for the
optimizer and the gradient checker, and ``state()`` exposes persisted
non-trainable arrays (batch-norm running statistics).
"""

from __future__ import annotations

import numpy as np

from ..errors import (
    BadRate,
    BatchTooSmall,
    KernelTooLarge,
    NoForwardState,
    ShapeMismatch,
    WindowTooLarge,
)
from .activations import activation_apply, activation_grad, sigmoid


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Fan-balanced uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class; parameter-free layers inherit the empty accessors."""

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[tuple[str, np.ndarray]]:
        return []

    def grads(self) -> list[tuple[str, np.ndarray]]:
        return []

    def state(self) -> list[tuple[str, np.ndarray]]:
        return []


class Dense(Layer):
    """Fully connected layer: activation(x @ W.T + b)."""

    def __init__(self, in_features: int, out_features: int, activation: str = "identity",
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weights = glorot_uniform(rng, (out_features, in_features), in_features, out_features)
        self.bias = np.zeros(out_features)
        self.d_weights = np.zeros_like(self.weights)
        self.d_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None
        self._pre: np.ndarray | None = None

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"dense expects [batch, {self.in_features}], got {x.shape}")
        pre = x @ self.weights.T + self.bias
        if train:
            self._x, self._pre = x, pre
        return activation_apply(self.activation, pre)

    def backward(self, grad_out):
        if self._x is None or self._pre is None:
            raise NoForwardState("dense backward() without a cached forward pass")
        d_pre = grad_out * activation_grad(self.activation, self._pre)
        self.d_weights = d_pre.T @ self._x
        self.d_bias = d_pre.sum(axis=0)
        return d_pre @ self.weights

    def params(self):
        return [("weights", self.weights), ("bias", self.bias)]

    def grads(self):
        return [("weights", self.d_weights), ("bias", self.d_bias)]


class Conv1d(Layer):
    """Valid (no padding) 1-D convolution in the cross-correlation convention.

    out[b, f, i] = bias[f] + sum_{c,j} kernels[f, c, j] * x[b, c, i*stride + j]

    ``bias=False`` omits the bias parameter entirely; useful when a batch-norm
    layer directly follows and would cancel it anyway.
    """

    def __init__(self, in_channels: int, filters: int, kernel: int, stride: int = 1,
                 bias: bool = True, rng: np.random.Generator | None = None):
        if kernel < 1 or stride < 1:
            raise ValueError("kernel and stride must be >= 1")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.kernels = glorot_uniform(
            rng, (filters, in_channels, kernel), in_channels * kernel, filters * kernel
        )
        self.bias = np.zeros(filters) if bias else None
        self.d_kernels = np.zeros_like(self.kernels)
        self.d_bias = np.zeros(filters) if bias else None
        self._cols: np.ndarray | None = None
        self._x_shape: tuple | None = None

    def out_length(self, length: int) -> int:
        if length < self.kernel:
            raise KernelTooLarge(f"kernel {self.kernel} exceeds input length {length}")
        return (length - self.kernel) // self.stride + 1

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"conv1d expects [batch, {self.in_channels}, L], got {x.shape}")
        batch, _, length = x.shape
        l_out = self.out_length(length)
        windows = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=2)
        if self.stride > 1:
            windows = windows[:, :, :: self.stride]
        # [batch, C, l_out, k] view -> [batch, l_out, C*k] im2col copy
        cols = windows.transpose(0, 2, 1, 3).reshape(batch, l_out, self.in_channels * self.kernel)
        out = cols @ self.kernels.reshape(self.filters, -1).T
        if self.bias is not None:
            out += self.bias
        if train:
            self._cols, self._x_shape = cols, x.shape
        return np.ascontiguousarray(out.transpose(0, 2, 1))

    def backward(self, grad_out):
        if self._cols is None or self._x_shape is None:
            raise NoForwardState("conv1d backward() without a cached forward pass")
        batch, _, length = self._x_shape
        l_out = grad_out.shape[2]
        g = np.ascontiguousarray(grad_out.transpose(0, 2, 1))  # [batch, l_out, filters]
        self.d_kernels = np.tensordot(g, self._cols, axes=([0, 1], [0, 1])).reshape(self.kernels.shape)
        if self.bias is not None:
            self.d_bias = grad_out.sum(axis=(0, 2))
        d_cols = (g @ self.kernels.reshape(self.filters, -1)).reshape(
            batch, l_out, self.in_channels, self.kernel
        )
        dx = np.zeros(self._x_shape)
        for j in range(self.kernel):
            dx[:, :, j : j + self.stride * l_out : self.stride] += d_cols[:, :, :, j].transpose(0, 2, 1)
        return dx

    def params(self):
        out = [("kernels", self.kernels)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out

    def grads(self):
        out = [("kernels", self.d_kernels)]
        if self.bias is not None:
            out.append(("bias", self.d_bias))
        return out


class MaxPool1d(Layer):
    """Non-overlapping max pooling; a trailing remainder shorter than the
    window is dropped.  Gradient routes to the first occurrence of the max."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._argmax: np.ndarray | None = None
        self._x_shape: tuple | None = None

    def out_length(self, length: int) -> int:
        if length < self.window:
            raise WindowTooLarge(f"pool window {self.window} exceeds input length {length}")
        return length // self.window

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeMismatch(f"maxpool expects [batch, channels, L], got {x.shape}")
        batch, channels, length = x.shape
        n = self.out_length(length)
        xw = x[:, :, : n * self.window].reshape(batch, channels, n, self.window)
        if train:
            self._argmax = xw.argmax(axis=3)  # argmax returns the first max
            self._x_shape = x.shape
        # chained pairwise maximum beats a small-axis reduce; same result
        out = xw[..., 0]
        for j in range(1, self.window):
            out = np.maximum(out, xw[..., j])
        return out

    def backward(self, grad_out):
        if self._argmax is None or self._x_shape is None:
            raise NoForwardState("maxpool backward() without a cached forward pass")
        batch, channels, length = self._x_shape
        n = grad_out.shape[2]
        dxw = np.zeros((batch, channels, n, self.window))
        np.put_along_axis(dxw, self._argmax[..., None], grad_out[..., None], axis=3)
        dx = np.zeros(self._x_shape)
        dx[:, :, : n * self.window] = dxw.reshape(batch, channels, n * self.window)
        return dx


class BatchNorm1d(Layer):
    """Per-channel batch normalization for [batch, C] or [batch, C, L] inputs.

    Train mode standardizes by the batch moments (over batch and spatial
    axes) and updates running statistics as
    ``running = momentum * running + (1 - momentum) * batch_moment``;
    eval mode standardizes by the running statistics.
    """

    def __init__(self, channels: int, epsilon: float = 1e-5, momentum: float = 0.9):
        if epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        self.channels = channels
        self.epsilon = epsilon
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.d_gamma = np.zeros(channels)
        self.d_beta = np.zeros(channels)
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None
        self._axes: tuple | None = None

    def _reshape(self, v: np.ndarray, ndim: int) -> np.ndarray:
        return v.reshape((1, self.channels) + (1,) * (ndim - 2))

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (2, 3) or x.shape[1] != self.channels:
            raise ShapeMismatch(f"batchnorm expects [batch, {self.channels}(, L)], got {x.shape}")
        axes = (0,) if x.ndim == 2 else (0, 2)
        if train:
            if x.shape[0] < 2:
                raise BatchTooSmall("batchnorm needs batch >= 2 in train mode")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = self.momentum * self.running_mean + (1.0 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1.0 - self.momentum) * var
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            xhat = (x - self._reshape(mean, x.ndim)) * self._reshape(inv_std, x.ndim)
            self._xhat, self._inv_std, self._axes = xhat, inv_std, axes
            return self._reshape(self.gamma, x.ndim) * xhat + self._reshape(self.beta, x.ndim)
        # eval: fold standardization and affine into one scale/shift pass
        scale = self.gamma / np.sqrt(self.running_var + self.epsilon)
        shift = self.beta - self.running_mean * scale
        out = x * self._reshape(scale, x.ndim)
        out += self._reshape(shift, x.ndim)
        return out

    def backward(self, grad_out):
        if self._xhat is None or self._inv_std is None or self._axes is None:
            raise NoForwardState("batchnorm backward() without a cached forward pass")
        xhat, axes, ndim = self._xhat, self._axes, self._xhat.ndim
        m = float(np.prod([xhat.shape[a] for a in axes]))
        self.d_gamma = (grad_out * xhat).sum(axis=axes)
        self.d_beta = grad_out.sum(axis=axes)
        d_xhat = grad_out * self._reshape(self.gamma, ndim)
        dx = (self._reshape(self._inv_std, ndim) / m) * (
            m * d_xhat
            - self._reshape(d_xhat.sum(axis=axes), ndim)
            - xhat * self._reshape((d_xhat * xhat).sum(axis=axes), ndim)
        )
        return dx

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grads(self):
        return [("gamma", self.d_gamma), ("beta", self.d_beta)]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


def dropout_mask(shape, rate: float, seed: int) -> np.ndarray:
    """Inverted-dropout mask: a pure function of (seed, shape).

    Entries are 0 with probability ``rate`` and 1/(1 - rate) otherwise.
    """
    keep = np.random.default_rng(seed).random(shape) >= rate
    return keep / (1.0 - rate)


def dropout_apply(x: np.ndarray, rate: float, seed: int, train: bool) -> np.ndarray:
    """Inverted dropout: identity in eval mode, masked-and-rescaled in train."""
    if not 0.0 <= rate < 1.0:
        raise BadRate(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not train or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, seed)


class Dropout(Layer):
    """Inverted dropout layer; ``seed`` is reassigned per training step."""

    def __init__(self, rate: float, seed: int = 0):
        if not 0.0 <= rate < 1.0:
            raise BadRate(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.seed = seed
        self._mask: np.ndarray | None = None

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = dropout_mask(x.shape, self.rate, self.seed)
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class Lstm(Layer):
    """Single-layer LSTM over [batch, steps, features] sequences.

    Per step, with z = concat(x_t, h_{t-1}):

        f = sigmoid(w_f z + b_f)        forget gate
        i = sigmoid(w_i z + b_i)        input gate
        g = tanh   (w_c z + b_c)        candidate cell value
        o = sigmoid(w_o z + b_o)        output gate
        c_t = f * c_{t-1} + i * g
        h_t = o * tanh(c_t)

    ``forward`` returns every hidden state [batch, steps, hidden]; the final
    (h, c) pair is kept on ``h_final`` / ``c_final``.  The backward pass is
    full backpropagation through time.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_size = input_size
        self.hidden_size = hidden_size
        z = input_size + hidden_size
        self.w_f = glorot_uniform(rng, (hidden_size, z), z, hidden_size)
        self.w_i = glorot_uniform(rng, (hidden_size, z), z, hidden_size)
        self.w_c = glorot_uniform(rng, (hidden_size, z), z, hidden_size)
        self.w_o = glorot_uniform(rng, (hidden_size, z), z, hidden_size)
        self.b_f = np.zeros(hidden_size)
        self.b_i = np.zeros(hidden_size)
        self.b_c = np.zeros(hidden_size)
        self.b_o = np.zeros(hidden_size)
        self._zero_grads()
        self.h_final: np.ndarray | None = None
        self.c_final: np.ndarray | None = None
        self._steps: list[tuple] | None = None

    def _zero_grads(self):
        self.d_w_x = np.zeros((4 * self.hidden_size, self.input_size))
        self.d_w_h = np.zeros((4 * self.hidden_size, self.hidden_size))
        self.d_b = np.zeros(4 * self.hidden_size)

    def _stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gate parameters stacked in (f, i, o, c) row order, split into the
        input-facing and recurrent column blocks of each [hidden, in+hidden]
        matrix.  The sigmoid gates sit in one contiguous block so the whole
        trio is computed in a single call; splitting the columns lets the
        input-side product run as one matmul over every step at once."""
        gates = (self.w_f, self.w_i, self.w_o, self.w_c)
        w_x = np.concatenate([w[:, : self.input_size] for w in gates], axis=0)
        w_h = np.concatenate([w[:, self.input_size :] for w in gates], axis=0)
        b = np.concatenate([self.b_f, self.b_i, self.b_o, self.b_c])
        return w_x, w_h, b

    def forward(self, x, train=False, h0=None, c0=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeMismatch(f"lstm expects [batch, steps, {self.input_size}], got {x.shape}")
        batch, steps, _ = x.shape
        hidden = self.hidden_size
        h = np.zeros((batch, hidden)) if h0 is None else np.asarray(h0, dtype=np.float64)
        c = np.zeros((batch, hidden)) if c0 is None else np.asarray(c0, dtype=np.float64)
        if h.shape != (batch, hidden) or c.shape != (batch, hidden):
            raise ShapeMismatch("h0/c0 must have shape [batch, hidden]")
        w_x, w_h, b = self._stacked()
        ax = (x.reshape(batch * steps, self.input_size) @ w_x.T).reshape(batch, steps, 4 * hidden)
        ax += b
        hs = np.empty((batch, steps, hidden))
        if train:
            caches = []
            for t in range(steps):
                a = ax[:, t, :] + h @ w_h.T
                s = sigmoid(a[:, : 3 * hidden])
                f = s[:, :hidden]
                i = s[:, hidden : 2 * hidden]
                o = s[:, 2 * hidden :]
                g = np.tanh(a[:, 3 * hidden :])
                c_prev = c
                c = f * c_prev + i * g
                tc = np.tanh(c)
                h_prev = h
                h = o * tc
                hs[:, t, :] = h
                caches.append((h_prev, f, i, o, g, c_prev, tc))
            self._steps = caches
            self._x_cached = x
            self._w_h_cached = w_h
            self._w_x_cached = w_x
        else:
            # inference path: same arithmetic, buffers reused across steps
            w_h_t = np.ascontiguousarray(w_h.T)
            a = np.empty((batch, 4 * hidden))
            tmp = np.empty((batch, hidden))
            c = np.array(c)
            h = np.array(h)
            for t in range(steps):
                np.matmul(h, w_h_t, out=a)
                a += ax[:, t, :]
                sigmoid(a[:, : 3 * hidden], out=a[:, : 3 * hidden])
                f = a[:, :hidden]
                i = a[:, hidden : 2 * hidden]
                o = a[:, 2 * hidden : 3 * hidden]
                g = np.tanh(a[:, 3 * hidden :], out=a[:, 3 * hidden :])
                c *= f
                np.multiply(i, g, out=tmp)
                c += tmp
                np.tanh(c, out=tmp)
                np.multiply(o, tmp, out=h)
                hs[:, t, :] = h
        self.h_final, self.c_final = h, c
        return hs

    def backward(self, grad_hs):
        """BPTT given the loss gradient for every hidden state [batch, steps, hidden]."""
        if self._steps is None:
            raise NoForwardState("lstm backward() without a cached forward pass")
        batch, steps, hidden = grad_hs.shape
        self._zero_grads()
        da_all = np.empty((batch, steps, 4 * hidden))
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            h_prev, f, i, o, g, c_prev, tc = self._steps[t]
            dh = grad_hs[:, t, :] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            da = da_all[:, t, :]
            da[:, :hidden] = (dc * c_prev) * f * (1.0 - f)
            da[:, hidden : 2 * hidden] = (dc * g) * i * (1.0 - i)
            da[:, 2 * hidden : 3 * hidden] = (dh * tc) * o * (1.0 - o)
            da[:, 3 * hidden :] = (dc * i) * (1.0 - g * g)
            self.d_w_h += da.T @ h_prev
            dh_next = da @ self._w_h_cached
            dc_next = dc * f
        self.d_w_x = np.tensordot(da_all, self._x_cached, axes=([0, 1], [0, 1]))
        self.d_b = da_all.sum(axis=(0, 1))
        dx = (da_all.reshape(batch * steps, -1) @ self._w_x_cached).reshape(
            batch, steps, self.input_size
        )
        return dx

    def params(self):
        return [
            ("w_f", self.w_f), ("w_i", self.w_i), ("w_c", self.w_c), ("w_o", self.w_o),
            ("b_f", self.b_f), ("b_i", self.b_i), ("b_c", self.b_c), ("b_o", self.b_o),
        ]

    def grads(self):
        # stacked row order is (f, i, o, c); re-split to match params()
        h = self.hidden_size
        blocks = {}
        for row, name in enumerate(("f", "i", "o", "c")):
            blocks[name] = (
                np.concatenate(
                    [self.d_w_x[row * h : (row + 1) * h], self.d_w_h[row * h : (row + 1) * h]],
                    axis=1,
                ),
                self.d_b[row * h : (row + 1) * h],
            )
        return [
            ("w_f", blocks["f"][0]), ("w_i", blocks["i"][0]),
            ("w_c", blocks["c"][0]), ("w_o", blocks["o"][0]),
            ("b_f", blocks["f"][1]), ("b_i", blocks["i"][1]),
            ("b_c", blocks["c"][1]), ("b_o", blocks["o"][1]),
        ]


class Activation(Layer):
    """Stateless element-wise activation layer."""

    def __init__(self, kind: str):
        self.kind = kind
        self._x: np.ndarray | None = None

    def forward(self, x, train=False):
        if train:
            self._x = np.asarray(x, dtype=np.float64)
        return activation_apply(self.kind, x)

    def backward(self, grad_out):
        if self._x is None:
            raise NoForwardState("activation backward() without a cached forward pass")
        return grad_out * activation_grad(self.kind, self._x)


class Flatten(Layer):
    """[batch, C, L] -> [batch, C*L]."""

    def __init__(self):
        self._shape: tuple | None = None

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if self._shape is None:
            raise NoForwardState("flatten backward() without a cached forward pass")
        return grad_out.reshape(self._shape)


class ToSequence(Layer):
    """[batch, channels, L] -> [batch, L, channels] (conv stack to LSTM input)."""

    def forward(self, x, train=False):
        return np.ascontiguousarray(np.asarray(x, dtype=np.float64).transpose(0, 2, 1))

    def backward(self, grad_out):
        return np.ascontiguousarray(grad_out.transpose(0, 2, 1))


class TakeLastStep(Layer):
    """[batch, steps, features] -> [batch, features] at the final step."""

    def __init__(self):
        self._shape: tuple | None = None

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        self._shape = x.shape
        return x[:, -1, :]

    def backward(self, grad_out):
        if self._shape is None:
            raise NoForwardState("take-last backward() without a cached forward pass")
        dx = np.zeros(self._shape)
        dx[:, -1, :] = grad_out
        return dx

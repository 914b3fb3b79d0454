"""Element-wise activation functions and their derivatives."""

from __future__ import annotations

import numpy as np

from ..errors import NonDifferentiable

KINDS = ("step", "sigmoid", "tanh", "relu", "identity")


def sigmoid(x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Numerically stable logistic function.

    Computed as 0.5 * (1 + tanh(x/2)), which equals 1/(1 + exp(-x)) and
    saturates cleanly instead of overflowing for large |x|.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.multiply(x, 0.5, out=out)
    np.tanh(out, out=out)
    out *= 0.5
    out += 0.5
    return out


def activation_apply(kind: str, x: np.ndarray) -> np.ndarray:
    """Apply the named activation element-wise."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "step":
        return (x > 0).astype(np.float64)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, x: np.ndarray) -> np.ndarray:
    """Element-wise derivative of the named activation at ``x``.

    relu uses the subgradient convention relu'(0) = 0; the step function is
    rejected because its derivative is zero almost everywhere, which would
    silently kill training.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == "step":
        raise NonDifferentiable("the step activation cannot be trained through")
    if kind == "sigmoid":
        s = sigmoid(x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "identity":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}")

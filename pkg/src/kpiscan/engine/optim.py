"""Plain stochastic gradient descent."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def sgd_step(params, grads, lr: float) -> None:
    """In-place update p <- p - lr * g for every (param, grad) pair.

    No momentum, no weight decay.  ``params`` and ``grads`` are aligned
    sequences of arrays.
    """
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} params vs {len(grads)} grads")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeMismatch(f"param {p.shape} vs grad {np.shape(g)}")
        p -= lr * g

"""Softmax cross-entropy loss for one-hot multi-class targets."""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for numerical stability."""
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def per_example_ce(logits: np.ndarray, true_index: np.ndarray) -> np.ndarray:
    """-log softmax(logits)[true class] per row, via the logsumexp identity."""
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max(axis=1)
    lse = np.log(np.exp(logits - m[:, None]).sum(axis=1)) + m
    return lse - logits[np.arange(logits.shape[0]), true_index]


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    ``targets`` must be one-hot rows.  The returned gradient is
    (softmax(logits) - targets) / batch, i.e. the exact derivative of the
    mean loss, so downstream layers need no extra batch scaling.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ValueError(f"logits {logits.shape} and targets {targets.shape} differ")
    ok = np.all((targets == 0.0) | (targets == 1.0)) and np.all(targets.sum(axis=1) == 1.0)
    if not ok:
        raise ValueError("targets must be one-hot rows")
    batch = logits.shape[0]
    true_index = targets.argmax(axis=1)
    loss = float(per_example_ce(logits, true_index).mean())
    grad = (softmax(logits) - targets) / batch
    return loss, grad

"""Central finite-difference verification of analytic gradients.

Works against any object exposing the model protocol:

* ``parameters()``            -> ordered list of (name, array)
* ``loss_and_gradients(x, y)`` -> (loss, list of gradient arrays aligned
                                   with ``parameters()``)
* ``loss_only(x, y)``          -> loss as a float, using the exact same
                                  forward determinism (dropout seed pinned)

The checker perturbs sampled scalar parameters in place and restores them,
so the model is unchanged afterwards.
"""

from __future__ import annotations

import numpy as np


def finite_diff_check(model, inputs, targets, eps: float = 1e-4,
                      n_params: int = 100, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples ``n_params`` scalar parameters uniformly at random (seeded, with
    replacement), perturbs each by +/- eps, and compares
    (loss(+eps) - loss(-eps)) / (2 eps) against the analytic gradient using

        |a - n| / max(|a|, |n|, 1e-8)

    Returns 0.0 when ``n_params`` is 0.
    """
    if n_params <= 0:
        return 0.0
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps must be in [1e-6, 1e-3], got {eps}")
    _, analytic = model.loss_and_gradients(inputs, targets)
    arrays = [arr for _, arr in model.parameters()]
    sizes = np.array([a.size for a in arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, total, size=n_params)
    max_rel = 0.0
    for flat in picks:
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        at = int(flat - offsets[which])
        arr = arrays[which]
        a = float(analytic[which].flat[at])
        orig = arr.flat[at]
        arr.flat[at] = orig + eps
        loss_plus = model.loss_only(inputs, targets)
        arr.flat[at] = orig - eps
        loss_minus = model.loss_only(inputs, targets)
        arr.flat[at] = orig
        n = (loss_plus - loss_minus) / (2.0 * eps)
        rel = abs(a - n) / max(abs(a), abs(n), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel

"""From-scratch neural-network engine.

Dense float64 numpy arrays are the single numeric carrier; every layer
implements its own analytic backward pass (no autodiff), and a
finite-difference checker verifies the whole chain.
"""

from .activations import activation_apply, activation_grad
from .gradcheck import finite_diff_check
from .layers import (
    Activation,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    Flatten,
    Lstm,
    MaxPool1d,
    TakeLastStep,
    ToSequence,
    dropout_apply,
    glorot_uniform,
)
from .loss import softmax, softmax_cross_entropy
from .optim import sgd_step

__all__ = [
    "activation_apply",
    "activation_grad",
    "Activation",
    "BatchNorm1d",
    "Conv1d",
    "Dense",
    "Dropout",
    "Flatten",
    "Lstm",
    "MaxPool1d",
    "TakeLastStep",
    "ToSequence",
    "dropout_apply",
    "glorot_uniform",
    "finite_diff_check",
    "softmax",
    "softmax_cross_entropy",
    "sgd_step",
]

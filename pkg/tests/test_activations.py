import math

import numpy as np
import pytest

from kpiscan.engine import activation_apply, activation_grad
from kpiscan.errors import NonDifferentiable


def test_sigmoid_center():
    assert activation_apply("sigmoid", np.array([0.0]))[0] == 0.5


def test_sigmoid_matches_logistic_formula():
    x = np.linspace(-30, 30, 101)
    expected = np.array([1.0 / (1.0 + math.exp(-v)) for v in x])
    assert np.allclose(activation_apply("sigmoid", x), expected, atol=1e-14)


def test_sigmoid_saturation_is_finite():
    out = activation_apply("sigmoid", np.array([-1e4, 1e4]))
    assert out[0] == 0.0 and out[1] == 1.0


def test_relu_definition():
    assert np.array_equal(activation_apply("relu", np.array([-3.0, 0.0, 2.0])), [0.0, 0.0, 2.0])


def test_tanh_odd():
    assert activation_apply("tanh", np.array([0.0]))[0] == 0.0


def test_step_forward():
    assert np.array_equal(activation_apply("step", np.array([-1.0, 0.0, 0.5])), [0.0, 0.0, 1.0])


def test_identity():
    x = np.array([1.5, -2.0])
    assert np.array_equal(activation_apply("identity", x), x)


def test_sigmoid_grad_center():
    assert activation_grad("sigmoid", np.array([0.0]))[0] == 0.25


def test_tanh_grad_center():
    assert activation_grad("tanh", np.array([0.0]))[0] == 1.0


def test_relu_grad_zero_convention():
    assert np.array_equal(activation_grad("relu", np.array([-1.0, 0.0, 1.0])), [0.0, 0.0, 1.0])


def test_step_grad_rejected():
    with pytest.raises(NonDifferentiable):
        activation_grad("step", np.array([1.0]))


def test_unknown_kind():
    with pytest.raises(ValueError):
        activation_apply("softplus", np.array([1.0]))


@pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu", "identity"])
def test_grads_match_finite_differences(kind):
    rng = np.random.default_rng(7)
    x = rng.standard_normal(200) * 2 + 0.01  # keep clear of the relu kink
    eps = 1e-6
    numeric = (activation_apply(kind, x + eps) - activation_apply(kind, x - eps)) / (2 * eps)
    assert np.allclose(activation_grad(kind, x), numeric, atol=1e-6)

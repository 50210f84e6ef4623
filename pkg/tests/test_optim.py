import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from partmesh.errors import ContractViolation
from partmesh.optim import OptimizerState, learning_rate, sgd_momentum_step


def step(p, g, lr, momentum, v=None):
    state = OptimizerState(momentum, {} if v is None else {"p": np.array(v)})
    new, state = sgd_momentum_step({"p": np.array(p)}, {"p": np.array(g)}, state, lr)
    return new["p"], state


def test_plain_sgd_when_momentum_is_zero():
    p, _ = step(1.0, 2.0, 0.1, 0.0)
    assert p == pytest.approx(0.8)


def test_first_momentum_step():
    p, state = step(0.0, 1.0, 1.0, 0.9, v=0.0)
    assert p == -1.0
    assert state.velocity["p"] == -1.0


def test_two_steps_constant_gradient():
    # v1 = -1, p1 = -1; v2 = 0.9 * -1 - 1 = -1.9, p2 = -2.9
    state = OptimizerState(0.9)
    params = {"p": np.array(0.0)}
    for _ in range(2):
        params, state = sgd_momentum_step(params, {"p": np.array(1.0)}, state, 1.0)
    assert params["p"] == pytest.approx(-2.9, abs=1e-15)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.floats(1e-4, 1.0))
def test_zero_momentum_is_bitwise_gradient_descent(values, lr):
    p = np.array(values)
    g = np.cos(p) * 3.0
    new, _ = sgd_momentum_step({"p": p}, {"p": g}, OptimizerState(0.0), lr)
    assert np.array_equal(new["p"], p - lr * g)


def test_shape_mismatch_is_a_contract_violation():
    with pytest.raises(ContractViolation):
        sgd_momentum_step({"p": np.zeros(3)}, {"p": np.zeros(2)}, OptimizerState(0.9), 0.1)
    with pytest.raises(ContractViolation):
        OptimizerState(1.0)


def test_learning_rate_schedule_values():
    assert learning_rate(0) == 0.0125
    assert learning_rate(1) == pytest.approx(0.012375, rel=1e-15)
    assert learning_rate(299) == pytest.approx(0.0125 * math.exp(299 * math.log(0.99)), rel=1e-12)
    assert learning_rate(299) == pytest.approx(6.19e-4, rel=1e-3)


@given(st.integers(0, 5000))
def test_learning_rate_positive_and_strictly_decreasing(epoch):
    assert 0 < learning_rate(epoch + 1) < learning_rate(epoch)

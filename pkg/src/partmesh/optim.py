"""SGD with classical momentum and the exponential learning-rate decay."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

BASE_LR = 0.0125
LR_DECAY = 0.99


def learning_rate(epoch, base=BASE_LR, decay=LR_DECAY):
    if epoch < 0:
        raise ContractViolation("epoch must be non-negative")
    return base * decay**epoch


@dataclass
class OptimizerState:
    momentum: float = 0.9
    velocity: dict = field(default_factory=dict)
    epoch: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ContractViolation(f"momentum must lie in [0, 1), got {self.momentum}")


def sgd_momentum_step(params, grads, state, lr):
    """One update ``v <- m*v - lr*g; p <- p + v`` for every named tensor.

    Returns new ``(params, state)``; the inputs are left untouched.
    """
    if not lr > 0:
        raise ContractViolation("learning rate must be positive")
    if params.keys() != grads.keys():
        raise ContractViolation("parameter and gradient names differ")
    new_params = {}
    new_velocity = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ContractViolation(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ContractViolation(f"velocity shape mismatch for {name}")
        if state.momentum == 0.0:
            v_new = -lr * g
        else:
            v_new = state.momentum * v - lr * g
        new_velocity[name] = v_new
        new_params[name] = p + v_new
    return new_params, OptimizerState(state.momentum, new_velocity, state.epoch)

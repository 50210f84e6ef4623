"""Chebyshev spectral graph convolution.

A filter of order K is ``sum_k theta_k T_k(L~)`` on the scaled Laplacian,
with ``T_0 = I``, ``T_1 = L~`` and ``T_k = 2 L~ T_{k-1} - T_{k-2}``.
Layer coefficients are stored as a (K, F_in, F_out) array; features live on
the last axis, vertices on the first, and any axes in between (the batch)
are carried along.
"""
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .errors import ContractViolation, NumericOverflowError


@dataclass
class ChebLayer:
    theta: np.ndarray  # (K, F_in, F_out)
    bias: np.ndarray  # (F_out,)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.theta.ndim != 3 or self.theta.shape[0] < 1:
            raise ContractViolation(f"theta must be (K>=1, F_in, F_out), got {self.theta.shape}")
        if self.bias.shape != (self.theta.shape[2],):
            raise ContractViolation("bias length must equal F_out")

    @property
    def order(self):
        return self.theta.shape[0]

    @property
    def f_in(self):
        return self.theta.shape[1]

    @property
    def f_out(self):
        return self.theta.shape[2]


def _check(scaled, x, f_in=None):
    n = scaled.shape[0]
    if scaled.shape != (n, n):
        raise ContractViolation("scaled Laplacian must be square")
    if x.shape[0] != n:
        raise ContractViolation(f"x has {x.shape[0]} rows for a {n}-vertex graph")
    if f_in is not None and x.shape[-1] != f_in:
        raise ContractViolation(f"x has {x.shape[-1]} features, layer expects {f_in}")


def cheb_basis(scaled, x, order):
    """``[T_0(L~) x, ..., T_{K-1}(L~) x]`` as plain arrays."""
    x = np.asarray(x, dtype=np.float64)
    _check(scaled, x)
    if order < 1:
        raise ContractViolation("order must be at least 1")
    out = [x]
    if order > 1:
        out.append(scaled.matmul(x))
    for _ in range(2, order):
        out.append(2.0 * scaled.matmul(out[-1]) - out[-2])
    return out


def cheb_conv(layer, scaled, x):
    """Pre-activation output ``sum_i W_theta_ij(L~) x_i + b_j``."""
    x = np.asarray(x, dtype=np.float64)
    _check(scaled, x, layer.f_in)
    basis = cheb_basis(scaled, x, layer.order)
    y = sum(t @ layer.theta[k] for k, t in enumerate(basis)) + layer.bias
    if not np.all(np.isfinite(y)):
        raise NumericOverflowError("non-finite output from Chebyshev convolution")
    return y


def tape_cheb_basis(tape: Tape, scaled, x, order):
    """Differentiable :func:`cheb_basis` recorded on ``tape``."""
    _check(scaled, x.value)
    out = [x]
    if order > 1:
        out.append(tape.spmm(scaled, x))
    for _ in range(2, order):
        out.append(tape.sub(tape.scale(tape.spmm(scaled, out[-1]), 2.0), out[-2]))
    return out


def tape_cheb_conv(tape: Tape, theta, bias, scaled, x):
    """Differentiable :func:`cheb_conv`; ``theta`` and ``bias`` are tape nodes."""
    order, f_in, f_out = theta.shape
    _check(scaled, x.value, f_in)
    basis = tape_cheb_basis(tape, scaled, x, order)
    stacked = basis[0] if order == 1 else tape.concat(basis, axis=-1)
    weights = tape.reshape(theta, (order * f_in, f_out))
    return tape.add_bias(tape.matmul(stacked, weights), bias)

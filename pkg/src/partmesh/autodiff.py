"""Reverse-mode differentiation over a small, fixed set of array primitives.

A :class:`Tape` evaluates eagerly: every primitive computes its value when it
is recorded, so the tape only has to remember how to push cotangents back.
Nodes are appended in evaluation order, which makes the tape a topological
order by construction.

Primitives: sparse·dense and dense·dense products, add/sub/multiply, scalar
scale, bias broadcast, ReLU, outer product, sum, absolute-error reduction,
plus the structural ops (reshape, transpose, concat) that batching needs.
"""
import weakref

import numpy as np

from .errors import ContractViolation, NumericOverflowError
from .sparse import SparseMatrix


class Node:
    __slots__ = ("_tape", "index", "op", "value", "parents", "vjp", "requires_grad")

    def __init__(self, tape, index, op, value, parents, vjp, requires_grad):
        # A strong back-reference would make every tape a reference cycle that
        # only the cyclic collector can reclaim, and tapes hold large arrays.
        self._tape = weakref.ref(tape)
        self.index = index
        self.op = op
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad

    @property
    def tape(self):
        return self._tape()

    @property
    def shape(self):
        return self.value.shape

    @property
    def name(self):
        return f"{self.op}#{self.index}"

    def __repr__(self):
        return f"Node({self.name}, shape={self.value.shape})"


def _unbroadcast_bias(g, ndim_bias):
    return g.reshape(-1, g.shape[-1]).sum(axis=0) if ndim_bias == 1 else g


class Tape:
    def __init__(self, check_finite=True):
        self.nodes = []
        self.check_finite = check_finite

    def _record(self, op, value, parents=(), vjp=None, requires_grad=None):
        value = np.asarray(value, dtype=np.float64)
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        node = Node(self, len(self.nodes), op, value, tuple(parents), vjp, requires_grad)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NumericOverflowError(f"non-finite value produced by {node.name}", node=node.name)
        self.nodes.append(node)
        return node

    def _wrap(self, x):
        if isinstance(x, Node):
            if x.tape is not self:
                raise ContractViolation("node belongs to a different tape")
            return x
        return self.constant(x)

    # leaves

    def leaf(self, value, name="leaf"):
        """A differentiable input."""
        return self._record(name, np.array(value, dtype=np.float64), requires_grad=True)

    def constant(self, value):
        return self._record("const", value, requires_grad=False)

    # primitives

    def spmm(self, s: SparseMatrix, x):
        x = self._wrap(x)
        return self._record("spmm", s.matmul(x.value), (x,), lambda g: (s.T.matmul(g),))

    def matmul(self, a, b):
        """Contract the last axis of ``a`` with the first axis of 2-D ``b``."""
        a, b = self._wrap(a), self._wrap(b)
        av, bv = a.value, b.value
        if bv.ndim != 2 or av.shape[-1] != bv.shape[0]:
            raise ContractViolation(f"matmul shape mismatch {av.shape} x {bv.shape}")

        def vjp(g):
            ga = g @ bv.T
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb

        return self._record("matmul", av @ bv, (a, b), vjp)

    def add(self, a, b):
        a, b = self._wrap(a), self._wrap(b)
        if a.shape != b.shape:
            raise ContractViolation(f"add shape mismatch {a.shape} vs {b.shape}")
        return self._record("add", a.value + b.value, (a, b), lambda g: (g, g))

    def sub(self, a, b):
        a, b = self._wrap(a), self._wrap(b)
        if a.shape != b.shape:
            raise ContractViolation(f"sub shape mismatch {a.shape} vs {b.shape}")
        return self._record("sub", a.value - b.value, (a, b), lambda g: (g, -g))

    def mul(self, a, b):
        a, b = self._wrap(a), self._wrap(b)
        if a.shape != b.shape:
            raise ContractViolation(f"mul shape mismatch {a.shape} vs {b.shape}")
        av, bv = a.value, b.value
        return self._record("mul", av * bv, (a, b), lambda g: (g * bv, g * av))

    def scale(self, a, c):
        a = self._wrap(a)
        c = float(c)
        return self._record("scale", a.value * c, (a,), lambda g: (g * c,))

    def add_bias(self, a, bias):
        """Add a vector along the last axis of ``a``."""
        a, bias = self._wrap(a), self._wrap(bias)
        if bias.value.ndim != 1 or bias.shape[0] != a.shape[-1]:
            raise ContractViolation(f"bias {bias.shape} does not match {a.shape}")
        return self._record(
            "bias", a.value + bias.value, (a, bias), lambda g: (g, _unbroadcast_bias(g, 1))
        )

    def relu(self, a):
        a = self._wrap(a)
        mask = a.value > 0.0  # subgradient 0 at the kink
        return self._record("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))

    def outer(self, a, b):
        """``out[i..., j...] = a[i...] * b[j...]``."""
        a, b = self._wrap(a), self._wrap(b)
        av, bv = a.value, b.value

        def vjp(g):
            ga = np.tensordot(g, bv, axes=bv.ndim) if bv.ndim else g * bv
            gb = np.tensordot(av, g, axes=av.ndim) if av.ndim else g * av
            return ga, gb

        return self._record("outer", np.multiply.outer(av, bv), (a, b), vjp)

    def sum(self, a):
        a = self._wrap(a)
        shape = a.shape
        return self._record("sum", a.value.sum(), (a,), lambda g: (np.full(shape, float(g)),))

    def abs_error(self, a, b, reduce="mean"):
        """Sum or mean of ``|a - b|``; the subgradient at equality is 0."""
        a, b = self._wrap(a), self._wrap(b)
        if a.shape != b.shape:
            raise ContractViolation(f"abs_error shape mismatch {a.shape} vs {b.shape}")
        diff = a.value - b.value
        total = np.abs(diff).sum()
        if reduce == "mean":
            n = max(diff.size, 1)
            value, factor = total / n, 1.0 / n
        elif reduce == "sum":
            value, factor = total, 1.0
        else:
            raise ContractViolation(f"unknown reduction {reduce!r}")
        sign = np.sign(diff)

        def vjp(g):
            s = sign * (float(g) * factor)
            return s, -s

        return self._record("abs_error", value, (a, b), vjp)

    def reshape(self, a, shape):
        a = self._wrap(a)
        old = a.shape
        return self._record("reshape", a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))

    def transpose(self, a, axes=None):
        a = self._wrap(a)
        axes = tuple(reversed(range(a.value.ndim))) if axes is None else tuple(axes)
        inv = tuple(np.argsort(axes))
        return self._record(
            "transpose", a.value.transpose(axes), (a,), lambda g: (g.transpose(inv),)
        )

    def concat(self, parts, axis=-1):
        parts = [self._wrap(p) for p in parts]
        sizes = [p.value.shape[axis] for p in parts]
        cuts = np.cumsum(sizes)[:-1]
        value = np.concatenate([p.value for p in parts], axis=axis)
        return self._record(
            "concat", value, parts, lambda g: tuple(np.split(g, cuts, axis=axis))
        )

    # reverse pass

    def backward(self, output, wrt):
        """Gradients of scalar ``output`` with respect to each node in ``wrt``."""
        if output.value.size != 1 or output.value.ndim != 0:
            raise ContractViolation(f"backward needs a scalar output, got shape {output.shape}")
        grads = {output.index: np.ones(())}
        keep = {w.index for w in wrt}
        for node in reversed(self.nodes[: output.index + 1]):
            g = grads.get(node.index)
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if not parent.requires_grad:
                    continue
                if parent.index in grads:
                    grads[parent.index] = grads[parent.index] + pg
                else:
                    grads[parent.index] = pg
            if node.index != output.index and node.index not in keep:
                # interior cotangents are no longer needed
                del grads[node.index]
        return [
            np.asarray(grads.get(w.index, np.zeros(w.shape)), dtype=np.float64).reshape(w.shape)
            for w in wrt
        ]


def evaluate_and_backprop(tape, leaves):
    """Value of the tape's final node and its gradient with respect to ``leaves``."""
    if not tape.nodes:
        raise ContractViolation("empty tape")
    out = tape.nodes[-1]
    if out.value.ndim != 0:
        raise ContractViolation(f"terminal node {out.name} is not scalar")
    return float(out.value), tape.backward(out, leaves)

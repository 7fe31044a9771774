"""Minimal reverse-mode automatic differentiation over numpy arrays.

A `Var` wraps an ndarray and records its parents plus a backward closure.
Graphs are built eagerly; `backward()` walks a topological order and
accumulates gradients into `.grad` of every reachable `Var` that has
`requires_grad=True`. Everything stays in the dtype of the inputs
(float64 throughout this package unless a model opts into float32).
"""
from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Var(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- graph mechanics ---------------------------------------------------

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into .grad for every requires_grad leaf."""
        if seed is None:
            seed = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(seed, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad or pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def zero_grad(self):
        self.grad = None

    # -- operators -----------------------------------------------------------
    # python scalars stay scalars (a wrapped 0-d float64 array would promote
    # float32 graphs); they need no gradient anyway

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return add_scalar(self, other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return add_scalar(self, -other)
        return add(self, neg(as_var(other)))

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return add_scalar(neg(self), other)
        return add(as_var(other), neg(self))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, 1.0 / other)
        return mul(self, powc(as_var(other), -1.0))

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(powc(self, -1.0), other)
        return mul(as_var(other), powc(self, -1.0))

    def __pow__(self, exponent):
        return powc(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def as_var(x):
    return x if isinstance(x, Var) else Var(np.asarray(x))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b):
    a, b = as_var(a), as_var(b)
    out_data = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Var(out_data, _parents=(a, b), _backward=bw)


def add_scalar(a, s):
    a = as_var(a)
    s = float(s)
    return Var(a.data + s, _parents=(a,), _backward=lambda g: (g,))


def mul_scalar(a, s):
    a = as_var(a)
    s = float(s)
    return Var(a.data * s, _parents=(a,), _backward=lambda g: (g * s,))


def neg(a):
    a = as_var(a)
    return Var(-a.data, _parents=(a,), _backward=lambda g: (-g,))


def mul(a, b):
    a, b = as_var(a), as_var(b)
    out_data = a.data * b.data

    def bw(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return Var(out_data, _parents=(a, b), _backward=bw)


def powc(a, exponent):
    a = as_var(a)
    e = float(exponent)
    out_data = a.data ** e

    def bw(g):
        return (g * e * a.data ** (e - 1.0),)

    return Var(out_data, _parents=(a,), _backward=bw)


def matmul(a, b):
    a, b = as_var(a), as_var(b)
    out_data = a.data @ b.data

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return Var(out_data, _parents=(a, b), _backward=bw)


def linear(x, w, b):
    """x @ w + b with a single fused backward node (row-major batches)."""
    x, w, b = as_var(x), as_var(w), as_var(b)
    out_data = x.data @ w.data + b.data

    def bw(g):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    return Var(out_data, _parents=(x, w, b), _backward=bw)


def tanh(a):
    a = as_var(a)
    t = np.tanh(a.data)
    return Var(t, _parents=(a,), _backward=lambda g: (g * (1.0 - t * t),))


def relu(a):
    a = as_var(a)
    out = np.maximum(a.data, 0)
    return Var(out, _parents=(a,), _backward=lambda g: (g * (a.data > 0),))


def sin(a):
    a = as_var(a)
    return Var(np.sin(a.data), _parents=(a,), _backward=lambda g: (g * np.cos(a.data),))


def cos(a):
    a = as_var(a)
    return Var(np.cos(a.data), _parents=(a,), _backward=lambda g: (-g * np.sin(a.data),))


def exp(a):
    a = as_var(a)
    e = np.exp(a.data)
    return Var(e, _parents=(a,), _backward=lambda g: (g * e,))


def log(a):
    a = as_var(a)
    return Var(np.log(a.data), _parents=(a,), _backward=lambda g: (g / a.data,))


def vsum(a, axis=None, keepdims=False):
    a = as_var(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).astype(a.data.dtype, copy=False),)

    return Var(out_data, _parents=(a,), _backward=bw)


def mean(a, axis=None, keepdims=False):
    a = as_var(a)
    if axis is None:
        n = a.data.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.data.shape[i] for i in axis]))
    else:
        n = a.data.shape[axis]
    return mul_scalar(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def take(a, key):
    a = as_var(a)
    out_data = a.data[key]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return Var(out_data, _parents=(a,), _backward=bw)


def concat(parts, axis=-1):
    parts = [as_var(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bw(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return Var(out_data, _parents=tuple(parts), _backward=bw)


def stack_cols(parts):
    """Stack 1-d (N,) vars into an (N, k) matrix."""
    return concat([reshape(p, (-1, 1)) for p in parts], axis=1)


def reshape(a, shape):
    a = as_var(a)
    old = a.data.shape
    return Var(a.data.reshape(shape), _parents=(a,),
               _backward=lambda g: (g.reshape(old),))


def roll2d(a, shift_h, shift_w, axes=(-2, -1)):
    """Circular shift over a pair of axes (spatial dims by default)."""
    a = as_var(a)
    out_data = np.roll(a.data, (shift_h, shift_w), axis=axes)

    def bw(g):
        return (np.roll(g, (-shift_h, -shift_w), axis=axes),)

    return Var(out_data, _parents=(a,), _backward=bw)


def _conv_backend():
    from . import kernels
    return kernels


def laplacian5_circular(x, inv_dx2):
    """5-point Laplacian with circular boundary over the last two axes,
    scaled by 1/dx^2. Self-adjoint, so the backward pass is itself."""
    x = as_var(x)

    def lap(a):
        return (np.roll(a, 1, axis=-2) + np.roll(a, -1, axis=-2)
                + np.roll(a, 1, axis=-1) + np.roll(a, -1, axis=-1)
                - 4.0 * a) * inv_dx2

    return Var(lap(x.data), _parents=(x,), _backward=lambda g: (lap(g),))


def conv2d_circular(x, w, b):
    """kxk convolution with circular padding, stride 1.

    x: (B, Cin, H, W); w: (Cout, Cin, k, k); b: (Cout,). Runs through the
    compiled kernel when built (direct padded-plane loops) and otherwise
    through a numpy im2col + GEMM fallback. dtype follows the input.
    """
    x, w, b = as_var(x), as_var(w), as_var(b)
    B, cin, H, W = x.data.shape
    cout, cin2, kh, kw = w.data.shape
    if cin2 != cin:
        raise ValueError(f"channel mismatch: input {cin}, kernel {cin2}")
    kern = _conv_backend()
    if (kh, kw) != (3, 3) and kern.CONV_BACKEND == "c":
        # compiled taps are specialized for 3x3; other sizes take the fallback
        kern = kern.get_conv_backend("python")
    wd = w.data.astype(x.data.dtype, copy=False)
    bd = b.data.astype(x.data.dtype, copy=False)
    out_data = kern.conv_circ_fwd(x.data, wd, bd)

    def bw(g):
        g = np.ascontiguousarray(g)
        gx, gw, gb = kern.conv_circ_bwd(x.data, wd, g,
                                        x.requires_grad, w.requires_grad)
        return (gx if x.requires_grad else None,
                gw.astype(w.data.dtype, copy=False) if w.requires_grad else None,
                gb.astype(b.data.dtype, copy=False))

    return Var(out_data, _parents=(x, w, b), _backward=bw)


def mse(pred, target):
    """Mean squared error over all elements; target is constant."""
    pred = as_var(pred)
    diff = pred.data - np.asarray(target)
    val = np.array((diff * diff).mean(), dtype=pred.data.dtype)
    scale = 2.0 / diff.size

    def bw(g):
        return (g * scale * diff,)

    return Var(val, _parents=(pred,), _backward=bw)


def numeric_gradient(f, params, h=1e-6):
    """Central finite differences of scalar f(params) w.r.t. a list of arrays."""
    grads = []
    for p in params:
        g = np.zeros_like(p, dtype=np.float64)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads

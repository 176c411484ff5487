"""Minimal dense-tensor engine with reverse-mode differentiation.

Tensors wrap numpy arrays (float32 for training, float64 for gradient
checks) and record an eager tape: every op stores its parents and a
closure that routes the output gradient back to them.  ``backward`` on
a scalar walks the tape once in reverse topological order.

Broadcasting is limited to what the regression model needs: equal
shapes, or a smaller operand expanded across leading batch axes (the
usual bias-add case).  Gradients for broadcast operands are summed back
to the original shape.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import NotScalar, ShapeMismatch


class Tensor:
    """A numpy array plus the tape bookkeeping for reverse mode."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None):
        arr = np.asarray(values)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.values = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.values.shape}{flag})"

    # operators
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other, self.dtype), -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return tslice(self, key)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def abs(self):
        return tabs(self)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every tracked tensor's grad."""
        if self.values.shape != ():
            raise NotScalar(f"backward needs a scalar, got shape {self.values.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _as_tensor(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype)
    return Tensor(arr)


def _needs_grad(*tensors) -> bool:
    return any(t.requires_grad for t in tensors)


def _accumulate(tensor: Tensor, grad) -> None:
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.array(grad, copy=True)
    else:
        tensor.grad = tensor.grad + grad


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape}") from exc


# -- elementwise and linear algebra -------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    out = Tensor(a.values + b.values, _needs_grad(a, b), (a, b))

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    out = Tensor(a.values * b.values, _needs_grad(a, b), (a, b))

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.values, a.shape))
        _accumulate(b, _unbroadcast(g * a.values, b.shape))

    out._backward = backward
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    out = Tensor(a.values * np.asarray(factor, dtype=a.dtype), a.requires_grad, (a,))

    def backward(g):
        _accumulate(a, g * factor)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim < 2 or b.values.ndim < 2:
        raise ShapeMismatch(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner dims: {a.shape} @ {b.shape}")
    try:
        values = a.values @ b.values
    except ValueError as exc:
        raise ShapeMismatch(f"matmul batch dims: {a.shape} @ {b.shape}") from exc
    out = Tensor(values, _needs_grad(a, b), (a, b))

    def backward(g):
        _accumulate(a, _unbroadcast(g @ b.values.swapaxes(-1, -2), a.shape))
        _accumulate(b, _unbroadcast(a.values.swapaxes(-1, -2) @ g, b.shape))

    out._backward = backward
    return out


# -- nonlinearities ------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.values, 0), a.requires_grad, (a,))

    def backward(g):
        _accumulate(a, g * (a.values > 0))

    out._backward = backward
    return out


SQRT2 = np.sqrt(2.0)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.values
    cdf = 0.5 * (1.0 + erf(x / SQRT2))
    out = Tensor(x * cdf, a.requires_grad, (a,))

    def backward(g):
        pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
        _accumulate(a, g * (cdf + x * pdf))

    out._backward = backward
    return out


def softmax(a: Tensor, axis=-1) -> Tensor:
    x = a.values
    if not -x.ndim <= axis < x.ndim:
        raise ShapeMismatch(f"softmax axis {axis} invalid for shape {a.shape}")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, a.requires_grad, (a,))

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (g - inner))

    out._backward = backward
    return out


def layer_norm(a: Tensor, axis=-1, eps=1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along one axis (no affine)."""
    x = a.values
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    out = Tensor(y, a.requires_grad, (a,))

    def backward(g):
        gm = g.mean(axis=axis, keepdims=True)
        gym = (g * y).mean(axis=axis, keepdims=True)
        _accumulate(a, inv * (g - gm - y * gym))

    out._backward = backward
    return out


# -- shape manipulation --------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    try:
        values = a.values.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot reshape {a.shape} to {shape}") from exc
    out = Tensor(values, a.requires_grad, (a,))

    def backward(g):
        _accumulate(a, g.reshape(a.shape))

    out._backward = backward
    return out


def transpose(a: Tensor, axes=None) -> Tensor:
    out = Tensor(a.values.transpose(axes), a.requires_grad, (a,))
    inverse = None if axes is None else tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    out._backward = backward
    return out


def concat(tensors, axis=0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeMismatch("concat of zero tensors")
    try:
        values = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat shapes {[t.shape for t in tensors]}") from exc
    out = Tensor(values, _needs_grad(*tensors), tuple(tensors))
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            _accumulate(t, piece)

    out._backward = backward
    return out


def _is_basic_index(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, slice, type(Ellipsis), type(None)))
               for p in parts)


def tslice(a: Tensor, key) -> Tensor:
    out = Tensor(a.values[key], a.requires_grad, (a,))
    basic = _is_basic_index(key)

    def backward(g):
        buf = np.zeros_like(a.values)
        if basic:
            # A basic slice never repeats an element, so += suffices.
            buf[key] += g
        else:
            np.add.at(buf, key, g)
        _accumulate(a, buf)

    out._backward = backward
    return out


def pad2d(a: Tensor, pad: int) -> Tensor:
    """Zero-pad the last two axes by ``pad`` cells on every side."""
    if a.values.ndim < 2:
        raise ShapeMismatch(f"pad2d needs >=2-d input, got {a.shape}")
    width = [(0, 0)] * (a.values.ndim - 2) + [(pad, pad), (pad, pad)]
    out = Tensor(np.pad(a.values, width), a.requires_grad, (a,))
    center = tuple([slice(None)] * (a.values.ndim - 2)
                   + [slice(pad, pad + a.shape[-2]), slice(pad, pad + a.shape[-1])])

    def backward(g):
        _accumulate(a, g[center])

    out._backward = backward
    return out


def scatter_rows(values: Tensor, row_index, n_rows: int) -> Tensor:
    """Sum rows of (M, C) ``values`` into an (n_rows, C) output by index."""
    if values.values.ndim != 2:
        raise ShapeMismatch(f"scatter_rows needs (M, C) values, got {values.shape}")
    rows = np.asarray(row_index, dtype=np.int64)
    if rows.shape != (values.shape[0],):
        raise ShapeMismatch(
            f"row_index shape {rows.shape} does not match values {values.shape}"
        )
    buf = np.zeros((n_rows, values.shape[1]), dtype=values.dtype)
    np.add.at(buf, rows, values.values)
    out = Tensor(buf, values.requires_grad, (values,))

    def backward(g):
        _accumulate(values, g[rows])

    out._backward = backward
    return out


# -- reductions ----------------------------------------------------------

def tsum(a: Tensor, axis=None) -> Tensor:
    out = Tensor(a.values.sum(axis=axis), a.requires_grad, (a,))

    def backward(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.shape))

    out._backward = backward
    return out


def tmean(a: Tensor, axis=None) -> Tensor:
    out = Tensor(a.values.mean(axis=axis), a.requires_grad, (a,))
    count = a.values.size if axis is None else a.shape[axis]

    def backward(g):
        if axis is None:
            spread = np.broadcast_to(g, a.shape)
        else:
            spread = np.broadcast_to(np.expand_dims(g, axis), a.shape)
        _accumulate(a, spread / count)

    out._backward = backward
    return out


def tabs(a: Tensor) -> Tensor:
    """|x| with the subgradient at zero fixed to 0 (sign convention)."""
    out = Tensor(np.abs(a.values), a.requires_grad, (a,))

    def backward(g):
        _accumulate(a, g * np.sign(a.values))

    out._backward = backward
    return out


# -- verification --------------------------------------------------------

def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


def finite_diff_check(f, params, step=1e-5) -> float:
    """Max relative error of backward() grads vs central differences.

    ``f`` maps the given parameter list to a scalar Tensor.  Relative
    error per coordinate is |analytic - numeric| / max(1e-8, |numeric|).
    Parameters are perturbed in place and restored.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    zero_grads(params)
    f(params).backward()
    analytic = [None if p.grad is None else np.array(p.grad, copy=True)
                for p in params]
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.values.ravel()
        gflat = (np.zeros(flat.size) if grad is None else grad.ravel())
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            hi = float(f(params).values)
            flat[i] = saved - step
            lo = float(f(params).values)
            flat[i] = saved
            numeric = (hi - lo) / (2.0 * step)
            err = abs(float(gflat[i]) - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
    return worst

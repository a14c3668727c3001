"""Reverse-mode autodiff over float64 numpy buffers.

Every op records a closure computing the vector-Jacobian product of its
inputs; ``Tensor.backward`` replays them in reverse topological order.
The tape lives for one forward pass and is dropped after backward.
Elementwise ops require equal shapes or a scalar operand; anything
fancier (bias adds, gates) goes through an explicit ``expand``.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ShapeError, UsageError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation rollouts)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    """A float64 n-d value, optionally attached to the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, free_graph=True):
        """Populate ``.grad`` on every reachable tensor requiring grad.

        Only defined for scalar outputs. The graph is released afterwards
        unless ``free_graph`` is False.
        """
        if self.data.ndim != 0 and self.data.size != 1:
            raise UsageError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            if free_graph and node is not self:
                node._parents = ()
                node._backward = None
        if free_graph:
            self._parents = ()
            self._backward = None

    # Operator sugar; scalars are promoted to constant tensors.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None):
        return reduce_sum(self, axis)

    def mean(self, axis=None):
        return reduce_mean(self, axis)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _is_scalar(t):
    return t.data.ndim == 0 or t.data.size == 1


def _check_elementwise(a, b, op):
    if a.shape == b.shape or _is_scalar(a) or _is_scalar(b):
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not match")


def _reduce_to(g, shape):
    """Sum ``g`` down to ``shape`` (undo scalar/lead-axis broadcasting)."""
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0 or int(np.prod(shape)) == 1:
        return np.sum(g).reshape(shape)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    _check_elementwise(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    _check_elementwise(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    _check_elementwise(a, b, "mul")
    a_data, b_data = a.data, b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g * b_data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g * a_data, b.shape))

    return _make(a_data * b_data, (a, b), backward)


def matmul(a, b):
    """``np.matmul`` semantics for operands of ndim >= 2.

    Leading axes of either operand may broadcast; the gradient is summed
    back over broadcast axes.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-d, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b_data, -1, -2))
            a.accumulate_grad(_reduce_to(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a_data, -1, -2), g)
            b.accumulate_grad(_reduce_to(gb, b.shape))

    return _make(np.matmul(a_data, b_data), (a, b), backward)


def affine(x, w, b):
    """Fused x @ w + b for x [..., i], w [i, j], b [j].

    One tape node instead of matmul + expand + add; the pointwise maps
    inside the model live on this.
    """
    if x.ndim < 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"affine: bad ranks for {x.shape} @ {w.shape} + {b.shape}")
    if x.shape[-1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeError(f"affine: shapes {x.shape} @ {w.shape} + {b.shape} do not chain")
    x_data, w_data = x.data, w.data

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.matmul(g, w_data.T))
        if w.requires_grad:
            g2 = g.reshape(-1, g.shape[-1])
            x2 = np.ascontiguousarray(x_data).reshape(-1, x_data.shape[-1])
            w.accumulate_grad(x2.T @ g2)
        if b.requires_grad:
            b.accumulate_grad(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _make(np.matmul(x_data, w_data) + b.data, (x, w, b), backward)


def reshape(t, shape):
    shape = tuple(shape)
    old = t.shape

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g.reshape(old))

    return _make(t.data.reshape(shape), (t,), backward)


def transpose(t, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(np.transpose(g, inv))

    return _make(np.transpose(t.data, axes), (t,), backward)


def expand(t, shape):
    """Broadcast ``t`` to ``shape``; the adjoint sums over expanded axes.

    Returns a zero-stride view: graph buffers are never written, so
    downstream ops may read it directly without a dense copy.
    """
    shape = tuple(shape)
    try:
        data = np.broadcast_to(t.data, shape)
    except ValueError as exc:
        raise ShapeError(f"expand: cannot broadcast {t.shape} to {shape}") from exc

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(_reduce_to(g, t.shape))

    return _make(data, (t,), backward)


def reduce_sum(t, axis=None):
    if axis is not None and not isinstance(axis, tuple):
        axis = (axis,)
    in_shape = t.shape

    def backward(g):
        if not t.requires_grad:
            return
        if axis is None:
            t.accumulate_grad(np.broadcast_to(g, in_shape).copy())
        else:
            gk = np.expand_dims(g, axis)
            t.accumulate_grad(np.broadcast_to(gk, in_shape).copy())

    return _make(t.data.sum(axis=axis), (t,), backward)


def reduce_mean(t, axis=None):
    if axis is not None and not isinstance(axis, tuple):
        axis = (axis,)
    in_shape = t.shape
    if axis is None:
        count = t.size
    else:
        count = int(np.prod([in_shape[a] for a in axis]))

    def backward(g):
        if not t.requires_grad:
            return
        if axis is None:
            t.accumulate_grad(np.broadcast_to(g / count, in_shape).copy())
        else:
            gk = np.expand_dims(g / count, axis)
            t.accumulate_grad(np.broadcast_to(gk, in_shape).copy())

    return _make(t.data.mean(axis=axis), (t,), backward)


def narrow(t, axis, start, length):
    """Slice ``length`` entries from ``start`` along ``axis``."""
    n = t.shape[axis]
    if start < 0 or start + length > n:
        raise ShapeError(f"narrow: [{start}:{start + length}] outside axis of size {n}")
    idx = tuple(
        slice(start, start + length) if ax == axis else slice(None)
        for ax in range(t.ndim)
    )
    in_shape = t.shape

    def backward(g):
        if t.requires_grad:
            buf = np.zeros(in_shape)
            buf[idx] = g
            t.accumulate_grad(buf)

    return _make(t.data[idx].copy(), (t,), backward)


def zero_pad(t, axis, total, start):
    """Embed ``t`` into zeros of size ``total`` along ``axis`` at ``start``."""
    n = t.shape[axis]
    if start < 0 or start + n > total:
        raise ShapeError(f"zero_pad: [{start}:{start + n}] outside axis of size {total}")
    out_shape = list(t.shape)
    out_shape[axis] = total
    idx = tuple(
        slice(start, start + n) if ax == axis else slice(None) for ax in range(t.ndim)
    )
    buf = np.zeros(out_shape)
    buf[idx] = t.data

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g[idx].copy())

    return _make(buf, (t,), backward)


def gather_pairs(t, axes, idx0, idx1):
    """Pick entries ``t[..., idx0[p], idx1[p], ...]`` over two adjacent axes.

    The two indexed axes collapse into one axis of ``len(idx0)`` at the
    position of the first; used to pull a retained set of 2-d Fourier
    modes out of a half-spectrum.
    """
    ax0, ax1 = axes
    if ax1 != ax0 + 1:
        raise ShapeError(f"gather_pairs: axes must be adjacent, got {axes}")
    idx0 = np.asarray(idx0, dtype=np.intp)
    idx1 = np.asarray(idx1, dtype=np.intp)
    sel = tuple(slice(None) for _ in range(ax0)) + (idx0, idx1)
    in_shape = t.shape

    def backward(g):
        if t.requires_grad:
            buf = np.zeros(in_shape)
            np.add.at(buf, sel, g)
            t.accumulate_grad(buf)

    return _make(t.data[sel].copy(), (t,), backward)


def scatter_pairs(t, axes, sizes, idx0, idx1):
    """Inverse of ``gather_pairs``: place pairs into a zero field."""
    ax0, _ = axes
    idx0 = np.asarray(idx0, dtype=np.intp)
    idx1 = np.asarray(idx1, dtype=np.intp)
    out_shape = t.shape[:ax0] + tuple(sizes) + t.shape[ax0 + 1 :]
    sel = tuple(slice(None) for _ in range(ax0)) + (idx0, idx1)
    buf = np.zeros(out_shape)
    buf[sel] = t.data

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g[sel].copy())

    return _make(buf, (t,), backward)


def contract(a, b, axes):
    """Tensordot with autodiff, built from transpose/reshape/matmul.

    ``axes`` is either an int (contract that many trailing axes of ``a``
    with leading axes of ``b``) or a pair of axis lists.
    """
    if isinstance(axes, int):
        ca = list(range(a.ndim - axes, a.ndim))
        cb = list(range(axes))
    else:
        ca = [ax % a.ndim for ax in axes[0]]
        cb = [ax % b.ndim for ax in axes[1]]
    if len(ca) != len(cb):
        raise ShapeError(f"contract: axis lists differ in length: {ca} vs {cb}")
    for i, j in zip(ca, cb):
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"contract: dim {a.shape[i]} (axis {i} of {a.shape}) != "
                f"dim {b.shape[j]} (axis {j} of {b.shape})"
            )
    fa = [ax for ax in range(a.ndim) if ax not in ca]
    fb = [ax for ax in range(b.ndim) if ax not in cb]
    csize = int(np.prod([a.shape[ax] for ax in ca])) if ca else 1
    fa_dims = [a.shape[ax] for ax in fa]
    fb_dims = [b.shape[ax] for ax in fb]
    a2 = reshape(transpose(a, fa + ca), (int(np.prod(fa_dims)) if fa_dims else 1, csize))
    b2 = reshape(transpose(b, cb + fb), (csize, int(np.prod(fb_dims)) if fb_dims else 1))
    return reshape(matmul(a2, b2), tuple(fa_dims + fb_dims))


def clamp(t, lo, hi):
    data = t.data
    mask = (data > lo) & (data < hi)

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g * mask)

    return _make(np.clip(data, lo, hi), (t,), backward)


def relu(t):
    mask = t.data > 0

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g * mask)

    return _make(np.where(mask, t.data, 0.0), (t,), backward)


def sigmoid(t):
    s = 1.0 / (1.0 + np.exp(-t.data))

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g * s * (1.0 - s))

    return _make(s, (t,), backward)


def hard_sigmoid(t):
    """clamp(x/6 + 1/2, 0, 1): saturates at +-3, slope 1/6 inside."""
    return clamp(t * (1.0 / 6.0) + 0.5, 0.0, 1.0)


def swish(t, beta):
    """x * sigmoid(beta x) in one fused node; ``beta`` is a scalar,
    optionally a trainable tensor (the per-layer slope)."""
    beta = _as_tensor(beta)
    if not _is_scalar(beta):
        raise ShapeError(f"swish: beta must be scalar, got shape {beta.shape}")
    x = t.data
    bval = float(beta.data)
    s = 1.0 / (1.0 + np.exp(-bval * x))

    def backward(g):
        ds = s * (1.0 - s)
        if t.requires_grad:
            t.accumulate_grad(g * (s + bval * x * ds))
        if beta.requires_grad:
            beta.accumulate_grad(np.sum(g * x * x * ds).reshape(beta.shape))

    return _make(x * s, (t, beta), backward)


def absolute(t):
    s = np.sign(t.data)

    def backward(g):
        if t.requires_grad:
            t.accumulate_grad(g * s)

    return _make(np.abs(t.data), (t,), backward)


def gradients(loss, params):
    """Backward ``loss`` and return a name -> gradient map for ``params``.

    Disconnected parameters get explicit zero gradients rather than None.
    """
    for p in params.values():
        p.zero_grad()
    loss.backward()
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

"""A small reverse-mode autodiff core over numpy arrays (NCHW)."""

import numpy as np

from .. import kernels
from ..errors import CgunwarpError, DimensionError


class GraphError(CgunwarpError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Populate ``.grad`` on every upstream tensor that requires it."""
        if self._backward is None and not self._parents:
            if not self.requires_grad:
                raise GraphError("backward() on a tensor with no recorded graph")
        if grad is None:
            if self.data.size != 1:
                raise GraphError("backward() without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            if node.requires_grad:
                node._accumulate(g)
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _needs(*ts):
    return any(t.requires_grad or t._backward is not None for t in ts)


def _node(data, parents, backward):
    if _needs(*parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)


def parameter(data, name=None):
    return Tensor(np.asarray(data), requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def add(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"add shape mismatch {a.shape} vs {b.shape}")
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"sub shape mismatch {a.shape} vs {b.shape}")
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a, k):
    return _node(a.data * k, (a,), lambda g: (g * k,))


def relu(x):
    mask = x.data > 0
    return _node(x.data * mask, (x,), lambda g: (g * mask,))


def mean(x):
    n = x.data.size
    return _node(np.asarray(x.data.mean()), (x,), lambda g: (np.full(x.shape, g / n, dtype=x.dtype),))


def square(x):
    return _node(x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def mse(pred, target):
    """Mean over all elements of the squared difference."""
    if pred.shape != target.shape:
        raise DimensionError(f"mse shape mismatch {pred.shape} vs {target.shape}")
    return mean(square(sub(pred, target)))


# ---------------------------------------------------------------------------
# convolution and pooling
# ---------------------------------------------------------------------------


def conv_output_size(n, k, stride, dilation, padding):
    return (n + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def conv2d(x, weight, bias=None, stride=1, dilation=1, padding=0):
    """Cross-correlation of NCHW ``x`` with (C_out, C_in, kh, kw) ``weight``."""
    n, c, h, w = x.shape
    co, ci, kh, kw = weight.shape
    if c != ci:
        raise DimensionError(f"conv2d: input has {c} channels, weight expects {ci}")
    ho = conv_output_size(h, kh, stride, dilation, padding)
    wo = conv_output_size(w, kw, stride, dilation, padding)
    if ho <= 0 or wo <= 0:
        raise DimensionError(f"conv2d: non-positive output size {ho}x{wo}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    xp = np.ascontiguousarray(xp)
    cols = kernels.im2col(xp, kh, kw, stride, dilation, ho, wo)
    out = np.tensordot(weight.data, cols, axes=([1, 2, 3], [1, 2, 3])).transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 4, 5]))
        gx = None
        if _needs(x):
            gcols = np.tensordot(weight.data, g, axes=([0], [1])).transpose(3, 0, 1, 2, 4, 5)
            gxp = kernels.col2im(gcols, xp.shape, stride, dilation)
            gx = gxp[:, :, padding : padding + h, padding : padding + w] if padding else gxp
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return _node(out, parents, backward)


def _pool_matrix(n_in, n_out, dtype):
    m = np.zeros((n_out, n_in), dtype=dtype)
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -((-(i + 1) * n_in) // n_out)
        m[i, lo:hi] = 1.0 / (hi - lo)
    return m


def adaptive_avg_pool2d(x, out_h, out_w):
    """Average over the adaptive bins [floor(i*n/m), ceil((i+1)*n/m))."""
    py = _pool_matrix(x.shape[2], out_h, x.dtype)
    px = _pool_matrix(x.shape[3], out_w, x.dtype)
    out = np.einsum("ah,nchw,bw->ncab", py, x.data, px, optimize=True)

    def backward(g):
        return (np.einsum("ah,ncab,bw->nchw", py, g, px, optimize=True),)

    return _node(out, (x,), backward)

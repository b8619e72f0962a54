"""Dense-tensor autodiff engine on numpy arrays.

Reverse mode over a dynamically recorded graph: each op returns a new
Tensor holding a backward closure; calling ``backward()`` on a scalar
topo-sorts the graph and accumulates gradients into ``grad``. Constants
(requires_grad=False inputs) record nothing, so eval-mode forwards build no
graph. 64-bit is the default dtype; training may opt into 32-bit.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, ValidityError

DEFAULT_DTYPE = np.float64


def set_default_dtype(name) -> None:
    """Switch new tensors to another float dtype (e.g. float32 training)."""
    global DEFAULT_DTYPE
    dtype = np.dtype(name)
    if dtype.kind != "f":
        raise ValidityError(f"default dtype must be a float type, got {dtype}")
    DEFAULT_DTYPE = dtype


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_done", "_grad_owned")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()
        self._done = False
        self._grad_owned = False

    # -- plumbing ----------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        # first contribution borrows the array (producers never mutate a
        # node's grad after its backward ran); later ones copy-on-write
        if self.grad is None:
            self.grad = grad
            self._grad_owned = False
        elif self._grad_owned:
            self.grad += grad
        else:
            self.grad = self.grad + grad
            self._grad_owned = True

    def zero_grad(self) -> None:
        self.grad = None
        self._grad_owned = False

    def backward(self) -> None:
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar tensor")
        if self._done:
            raise ContractError("backward() already ran on this graph; re-run the forward pass")
        self._done = True

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out = _result(self.data + other.data, (self, other))
        if out.requires_grad:
            def _bw():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(out.grad, other.data.shape))
            out._backward = _bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _result(-self.data, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(-out.grad)
            out._backward = _bw
        return out

    def __sub__(self, other):
        other = _as_tensor(other)
        out = _result(self.data - other.data, (self, other))
        if out.requires_grad:
            def _bw():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-out.grad, other.data.shape))
            out._backward = _bw
        return out

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        other = _as_tensor(other)
        out = _result(self.data * other.data, (self, other))
        if out.requires_grad:
            def _bw():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad * other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(out.grad * self.data, other.data.shape))
            out._backward = _bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out = _result(self.data / other.data, (self, other))
        if out.requires_grad:
            def _bw():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad / other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-out.grad * self.data / (other.data ** 2), other.data.shape))
            out._backward = _bw
        return out

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __pow__(self, exponent: float):
        out = _result(self.data ** exponent, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * exponent * self.data ** (exponent - 1))
            out._backward = _bw
        return out

    def __matmul__(self, other):
        other = _as_tensor(other)
        out = _result(self.data @ other.data, (self, other))
        if out.requires_grad:
            def _bw():
                if self.requires_grad:
                    self._accumulate(out.grad @ other.data.T)
                if other.requires_grad:
                    other._accumulate(self.data.T @ out.grad)
            out._backward = _bw
        return out

    # -- reductions and shaping --------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = _result(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            def _bw():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
            out._backward = _bw
        return out

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / count

    def reshape(self, *shape):
        out = _result(self.data.reshape(*shape), (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad.reshape(self.data.shape))
            out._backward = _bw
        return out

    def narrow(self, axis: int, start: int, length: int):
        """Contiguous slice along one axis."""
        index = [slice(None)] * self.data.ndim
        index[axis] = slice(start, start + length)
        index = tuple(index)
        out = _result(self.data[index], (self,))
        if out.requires_grad:
            def _bw():
                g = np.zeros_like(self.data)
                g[index] = out.grad
                self._accumulate(g)
            out._backward = _bw
        return out

    def take_per_row(self, cols: np.ndarray):
        """out[i] = self[i, cols[i]] for a 2-D tensor."""
        rows = np.arange(self.data.shape[0])
        out = _result(self.data[rows, cols], (self,))
        if out.requires_grad:
            def _bw():
                g = np.zeros_like(self.data)
                np.add.at(g, (rows, cols), out.grad)
                self._accumulate(g)
            out._backward = _bw
        return out

    # -- elementwise nonlinearities -----------------------------------------

    def exp(self):
        value = np.exp(self.data)
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * value)
            out._backward = _bw
        return out

    def log(self):
        out = _result(np.log(self.data), (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad / self.data)
            out._backward = _bw
        return out

    def tanh(self):
        value = np.tanh(self.data)
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * (1.0 - value ** 2))
            out._backward = _bw
        return out

    def sigmoid(self):
        # exp overflow at very negative x still yields the exact limit 0.0
        with np.errstate(over="ignore"):
            value = 1.0 / (1.0 + np.exp(-self.data))
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * value * (1.0 - value))
            out._backward = _bw
        return out

    def relu(self):
        out = _result(np.maximum(self.data, 0.0), (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * (self.data > 0))
            out._backward = _bw
        return out

    def leaky_relu(self, slope: float = 0.01):
        out = _result(np.where(self.data > 0, self.data, slope * self.data), (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * np.where(self.data > 0, 1.0, slope))
            out._backward = _bw
        return out

    def elu(self, alpha: float = 1.0):
        value = np.where(self.data > 0, self.data, alpha * np.expm1(self.data))
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                self._accumulate(out.grad * np.where(self.data > 0, 1.0, value + alpha))
            out._backward = _bw
        return out

    def softplus(self):
        value = np.maximum(self.data, 0.0) + np.log1p(np.exp(-np.abs(self.data)))
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                with np.errstate(over="ignore"):
                    sig = 1.0 / (1.0 + np.exp(-self.data))
                self._accumulate(out.grad * sig)
            out._backward = _bw
        return out

    def gelu(self):
        # tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
        c = np.sqrt(2.0 / np.pi)
        x = self.data
        inner = c * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        out = _result(0.5 * x * (1.0 + t), (self,))
        if out.requires_grad:
            def _bw():
                d_inner = c * (1.0 + 3 * 0.044715 * x ** 2)
                grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner
                self._accumulate(out.grad * grad)
            out._backward = _bw
        return out

    def log_softmax(self):
        """Row-wise log-softmax of a 2-D tensor, numerically stable."""
        shifted = self.data - self.data.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        value = shifted - lse
        out = _result(value, (self,))
        if out.requires_grad:
            def _bw():
                soft = np.exp(value)
                self._accumulate(out.grad - soft * out.grad.sum(axis=1, keepdims=True))
            out._backward = _bw
        return out


class Parameter(Tensor):
    """Trainable tensor with a name and an optional per-parameter L2 weight."""

    __slots__ = ("name", "l2")

    def __init__(self, data, name: str = "", l2: float = 0.0, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.l2 = l2


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data)
    out.grad = None
    out._backward = None
    out._done = False
    out._grad_owned = False
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(p for p in parents if p.requires_grad)
    else:
        out.requires_grad = False
        out._prev = ()
    return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    datas = [t.data for t in tensors]
    out = _result(np.concatenate(datas, axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [d.shape[axis] for d in datas]
        offsets = np.cumsum([0] + sizes)

        def _bw():
            for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    index = [slice(None)] * out.grad.ndim
                    index[axis] = slice(start, stop)
                    t._accumulate(out.grad[tuple(index)])
        out._backward = _bw
    return out


def coo_matmul(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n_rows: int, x: Tensor) -> Tensor:
    """Multiply a constant sparse operator (COO triplets) by a dense tensor.

    out[r] += vals[k] * x[c] for each triplet (r, c) — the message-passing
    primitive used by graph convolutions. The operator itself is data, not
    a trainable quantity.
    """
    out_data = np.zeros((n_rows,) + x.data.shape[1:], dtype=x.data.dtype)
    np.add.at(out_data, rows, vals.reshape(-1, *([1] * (x.data.ndim - 1))) * x.data[cols])
    out = _result(out_data, (x,))
    if out.requires_grad:
        def _bw():
            gx = np.zeros_like(x.data)
            np.add.at(gx, cols, vals.reshape(-1, *([1] * (x.data.ndim - 1))) * out.grad[rows])
            x._accumulate(gx)
        out._backward = _bw
    return out


def segment_pool(x: Tensor, ranges: list[tuple[int, int]], method: str) -> Tensor:
    """Pool contiguous row ranges of a 2-D tensor into one row per range."""
    if any(stop <= start for start, stop in ranges):
        raise ValidityError("cannot pool an empty node set")
    d = x.data.shape[1]
    out_data = np.empty((len(ranges), d), dtype=x.data.dtype)
    argmax = None
    if method == "mean":
        for i, (start, stop) in enumerate(ranges):
            out_data[i] = x.data[start:stop].mean(axis=0)
    elif method == "add":
        for i, (start, stop) in enumerate(ranges):
            out_data[i] = x.data[start:stop].sum(axis=0)
    elif method == "max":
        argmax = np.empty((len(ranges), d), dtype=int)
        for i, (start, stop) in enumerate(ranges):
            seg = x.data[start:stop]
            idx = seg.argmax(axis=0)
            argmax[i] = start + idx
            out_data[i] = seg[idx, np.arange(d)]
    else:
        raise ValidityError(f"unknown pooling method {method!r}")
    out = _result(out_data, (x,))
    if out.requires_grad:
        def _bw():
            gx = np.zeros_like(x.data)
            if method == "mean":
                for i, (start, stop) in enumerate(ranges):
                    gx[start:stop] += out.grad[i] / (stop - start)
            elif method == "add":
                for i, (start, stop) in enumerate(ranges):
                    gx[start:stop] += out.grad[i]
            else:
                for i in range(len(ranges)):
                    gx[argmax[i], np.arange(d)] += out.grad[i]
            x._accumulate(gx)
        out._backward = _bw
    return out

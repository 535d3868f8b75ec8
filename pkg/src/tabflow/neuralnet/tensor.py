"""Small reverse-mode autodiff engine over numpy arrays.

Covers exactly the operator set the velocity networks need: elementwise
arithmetic, ReLU, matmul, 1-D convolution, stride-2 down/upsampling, channel
concatenation, frame padding, and scalar reductions. Every op output is
checked for NaN/Inf and aborts naming the op when one appears.
"""

from __future__ import annotations

import contextlib
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import NumericError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction (inference / ODE right-hand sides)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by op '{op}'")


class Tensor:
    """A numpy array plus optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        _check_finite(self.data, "leaf")
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self) -> None:
        """Populate grads of every tracked leaf reachable from this scalar."""
        if self.data.size != 1:
            raise NumericError("backward requires a scalar loss")
        if not self.requires_grad:
            raise NumericError("backward on an untracked graph")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad += g
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] += pg
                else:
                    grads[id(parent)] = pg

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, op={self.op})"


def _result(data: np.ndarray, op: str, parents: tuple[Tensor, ...],
            backward) -> Tensor:
    _check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.op = op
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out.grad = None
    if track:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad back down to shape after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=dtype))


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))
    return _result(a.data + b.data, "add", (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape)))
    return _result(a.data - b.data, "sub", (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, _unbroadcast(g * b.data, a.shape)),
                (b, _unbroadcast(g * a.data, b.shape)))
    return _result(a.data * b.data, "mul", (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    def backward(g):
        return ((a, g * s),)
    return _result(a.data * s, "scale", (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        return ((a, g * mask),)
    return _result(np.where(mask, a.data, 0.0), "relu", (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return ((a, g @ b.data.T), (b, a.data.T @ g))
    return _result(a.data @ b.data, "matmul", (a, b), backward)


def _im2col(arr: np.ndarray, k: int, pad: int) -> np.ndarray:
    """[B, C, L] -> contiguous [B*L, C*K] patch matrix."""
    b, c, length = arr.shape
    padded = np.pad(arr, ((0, 0), (0, 0), (pad, pad)))
    cols = sliding_window_view(padded, k, axis=2)  # [B, C, L', K]
    return np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(
        b * cols.shape[2], c * k)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Same-length 1-D convolution, stride 1, odd kernel, zero padding.

    x: [B, Cin, L]; w: [Cout, Cin, K]; b: [Cout]. One GEMM each for the
    output, the weight gradient, and the input gradient.
    """
    batch, c_in, length = x.data.shape
    c_out, _, k = w.data.shape
    pad = k // 2
    cols = _im2col(x.data, k, pad)                       # [B*L, Cin*K]
    out = (cols @ w.data.reshape(c_out, c_in * k).T)     # [B*L, Cout]
    out = np.ascontiguousarray(out.reshape(batch, length, c_out).transpose(0, 2, 1))
    if b is not None:
        out += b.data[None, :, None]

    def backward(g):
        g2d = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(batch * length, c_out)
        gw = (g2d.T @ cols).reshape(c_out, c_in, k)
        gcols = _im2col(g, k, k - 1 - pad)               # [B*L, Cout*K]
        wf = np.ascontiguousarray(
            w.data[:, :, ::-1].transpose(0, 2, 1)).reshape(c_out * k, c_in)
        gx = (gcols @ wf).reshape(batch, length, c_in).transpose(0, 2, 1)
        grads = [(x, np.ascontiguousarray(gx)), (w, gw)]
        if b is not None:
            grads.append((b, g.sum(axis=(0, 2))))
        return grads

    parents = (x, w) if b is None else (x, w, b)
    return _result(out, "conv1d", parents, backward)


def downsample2(x: Tensor) -> Tensor:
    """Keep every second sample along the last axis."""
    def backward(g):
        gx = np.zeros_like(x.data)
        gx[..., ::2] = g
        return ((x, gx),)
    return _result(np.ascontiguousarray(x.data[..., ::2]), "downsample2", (x,), backward)


def upsample2(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsample along the last axis."""
    def backward(g):
        return ((x, g.reshape(*x.data.shape, 2).sum(axis=-1)),)
    return _result(np.repeat(x.data, 2, axis=-1), "upsample2", (x,), backward)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(zip(tensors, np.split(g, splits, axis=axis)))
    return _result(np.concatenate([t.data for t in tensors], axis=axis),
                   "concat", tuple(tensors), backward)


def pad_last(x: Tensor, before: int, after: int) -> Tensor:
    widths = [(0, 0)] * (x.data.ndim - 1) + [(before, after)]

    def backward(g):
        sl = [slice(None)] * (g.ndim - 1) + [slice(before, g.shape[-1] - after)]
        return ((x, g[tuple(sl)]),)
    return _result(np.pad(x.data, widths), "pad_last", (x,), backward)


def crop_last(x: Tensor, length: int) -> Tensor:
    def backward(g):
        widths = [(0, 0)] * (g.ndim - 1) + [(0, x.data.shape[-1] - length)]
        return ((x, np.pad(g, widths)),)
    return _result(np.ascontiguousarray(x.data[..., :length]), "crop_last", (x,), backward)


def mean(a: Tensor) -> Tensor:
    def backward(g):
        return ((a, np.full_like(a.data, float(g) / a.data.size)),)
    return _result(np.asarray(a.data.mean()), "mean", (a,), backward)


def tensor_sum(a: Tensor) -> Tensor:
    def backward(g):
        return ((a, np.full_like(a.data, float(g))),)
    return _result(np.asarray(a.data.sum()), "sum", (a,), backward)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all elements of the squared difference."""
    diff = a.data - b.data

    def backward(g):
        gd = (2.0 * float(g) / diff.size) * diff
        return ((a, gd), (b, -gd))
    return _result(np.asarray(np.mean(diff * diff)), "mse", (a, b), backward)

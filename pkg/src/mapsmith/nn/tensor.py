"""Float32 tensors with tape-based reverse-mode differentiation.

Every operation that can sit on the differentiation path is a primitive
here with a hand-written backward rule; there is no general graph
compiler.  A Tensor produced by an op remembers its parents and a
closure that scatters the incoming gradient back to them.  Calling
``backward()`` on a scalar walks the tape in reverse topological order.

Gradients are only materialized along paths that reach a tensor marked
``requires_grad``; constants (inputs, targets) stay grad-free.  All data
is float32 and no op mutates its inputs, so forward results can be
reused across backward calls.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise DataError("backward() starts from a scalar loss")
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
            for parent in node._parents:
                if parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def _result(data, parents, backward) -> Tensor:
    """Wrap an op result; the tape only grows along grad-requiring paths."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.astype(np.float32, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _result(data, (a, b), backward)


def sub(a, b) -> Tensor:
    return add(a, mul(b, -1.0))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DataError(f"matmul wants 2-d operands, got {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _result(data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.data.shape))

    return _result(data, (a,), backward)


def transpose2d(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DataError(f"transpose2d wants a 2-d tensor, got {a.data.shape}")
    data = np.ascontiguousarray(a.data.T)

    def backward(g):
        _accum(a, g.T)

    return _result(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        _accum(a, g * data)

    return _result(data, (a,), backward)


def l2_normalize(a: Tensor, axis: int = 1, eps: float = 1e-8) -> Tensor:
    norm = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True)) + eps
    data = (a.data / norm).astype(np.float32)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, (g - data * dot) / norm)

    return _result(data, (a,), backward)


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _result(data, tensors, backward)


def mean(a: Tensor) -> Tensor:
    data = a.data.mean(dtype=np.float32)
    n = a.data.size

    def backward(g):
        _accum(a, np.full_like(a.data, g / n))

    return _result(data, (a,), backward)


def sum_axis(a: Tensor, axis: int, keepdims: bool = True) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float32)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape))

    return _result(data, (a,), backward)


def silu(a: Tensor) -> Tensor:
    sig = 1.0 / (1.0 + np.exp(-a.data))
    data = a.data * sig

    def backward(g):
        _accum(a, g * sig * (1.0 + a.data * (1.0 - sig)))

    return _result(data, (a,), backward)


def softmax(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, y * (g - dot))

    return _result(y, (a,), backward)


def _windows(xp: np.ndarray, k: int):
    """(B, I, H, W, k, k) sliding view over padded NCHW input."""
    view = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    return view


def conv2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Stride-1 same-size convolution, NCHW; kernel 3 (pad 1) or 1 (pad 0)."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise DataError(f"conv2d wants NCHW input and OIKK kernel, got {x.data.shape}, {w.data.shape}")
    batch, in_ch, height, width = x.data.shape
    out_ch, k_in, k, k2 = w.data.shape
    if k_in != in_ch or k != k2 or k not in (1, 3):
        raise DataError(f"kernel {w.data.shape} incompatible with input {x.data.shape}")
    pad = k // 2
    if pad:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = x.data
    cols = _windows(xp, k).transpose(0, 2, 3, 1, 4, 5).reshape(batch * height * width, in_ch * k * k)
    w_mat = w.data.reshape(out_ch, in_ch * k * k)
    out = (cols @ w_mat.T).reshape(batch, height, width, out_ch).transpose(0, 3, 1, 2)
    out = out + b.data[None, :, None, None]

    def backward(g):
        g_mat = g.transpose(0, 2, 3, 1).reshape(batch * height * width, out_ch)
        _accum(b, g.sum(axis=(0, 2, 3)))
        _accum(w, (g_mat.T @ cols).reshape(w.data.shape))
        if x.requires_grad:
            dcols = (g_mat @ w_mat).reshape(batch, height, width, in_ch, k, k)
            dxp = np.zeros_like(xp)
            for ki in range(k):
                for kj in range(k):
                    dxp[:, :, ki : ki + height, kj : kj + width] += dcols[
                        :, :, :, :, ki, kj
                    ].transpose(0, 3, 1, 2)
            _accum(x, dxp[:, :, pad : pad + height, pad : pad + width] if pad else dxp)

    return _result(out, (x, w, b), backward)


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, groups: int = 4, eps: float = 1e-5) -> Tensor:
    batch, channels, height, width = x.data.shape
    if channels % groups:
        raise DataError(f"{channels} channels not divisible into {groups} groups")
    form = (batch, groups, channels // groups, height, width)
    xg = x.data.reshape(form)
    mu = xg.mean(axis=(2, 3, 4), keepdims=True)
    var = xg.var(axis=(2, 3, 4), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mu) * inv
    flat_hat = xhat.reshape(x.data.shape)
    out = flat_hat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g):
        _accum(gamma, (g * flat_hat).sum(axis=(0, 2, 3)))
        _accum(beta, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dhat = (g * gamma.data[None, :, None, None]).reshape(form)
            m1 = dhat.mean(axis=(2, 3, 4), keepdims=True)
            m2 = (dhat * xhat).mean(axis=(2, 3, 4), keepdims=True)
            dx = inv * (dhat - m1 - xhat * m2)
            _accum(x, dx.reshape(x.data.shape))

    return _result(out, (x, gamma, beta), backward)


def upsample_nearest2(x: Tensor) -> Tensor:
    data = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        batch, channels, height2, width2 = g.shape
        _accum(x, g.reshape(batch, channels, height2 // 2, 2, width2 // 2, 2).sum(axis=(3, 5)))

    return _result(data, (x,), backward)


def avgpool2(x: Tensor) -> Tensor:
    batch, channels, height, width = x.data.shape
    if height % 2 or width % 2:
        raise DataError(f"avgpool2 needs even spatial dims, got {x.data.shape}")
    data = x.data.reshape(batch, channels, height // 2, 2, width // 2, 2).mean(axis=(3, 5))

    def backward(g):
        _accum(x, np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25)

    return _result(data, (x,), backward)


def mse_loss(pred: Tensor, target) -> Tensor:
    target = _as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise DataError(f"mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    data = np.float32((diff * diff).mean())
    n = pred.data.size

    def backward(g):
        _accum(pred, g * 2.0 * diff / n)
        _accum(target, g * -2.0 * diff / n)

    return _result(data, (pred, target), backward)


def cross_entropy_loss(logits: Tensor, target_probs, axis: int = -1) -> Tensor:
    """Mean over cells of -sum target * log softmax(logits) along axis."""
    target = _as_tensor(target_probs)
    if logits.data.shape != target.data.shape:
        raise DataError(
            f"cross_entropy shape mismatch: {logits.data.shape} vs {target.data.shape}"
        )
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    log_probs = shifted - log_z
    cells = logits.data.size // logits.data.shape[axis]
    data = np.float32(-(target.data * log_probs).sum() / cells)
    probs = np.exp(log_probs)

    def backward(g):
        total = target.data.sum(axis=axis, keepdims=True)
        _accum(logits, g * (probs * total - target.data) / cells)

    return _result(data, (logits, target), backward)

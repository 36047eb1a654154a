"""Tape-based reverse-mode autodiff over numpy arrays.

Only the operations the recognizer needs, each with a hand-written
backward that the test suite checks against central finite differences.
Heavy ops (convolution via im2col, pooling, batch norm, full-sequence
LSTM) are fused so a training step stays a short tape of large numpy
calls rather than thousands of scalar nodes.
"""

from __future__ import annotations

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (inference paths)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor{self.data.shape}" + (f" '{self.name}'" if self.name else "")

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in reversed(_toposort(self)):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g.astype(parent.data.dtype, copy=False)
                else:
                    parent.grad = parent.grad + g

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _toposort(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _node(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# --- elementwise and linear algebra ----------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def scale(a, s: float):
    a = as_tensor(a)
    return _node(a.data * s, (a,), lambda g: (g * s,))


def matmul(a, b):
    """np.matmul with backward; supports batched a against stacked or 2-D b."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        bt = np.swapaxes(b.data, -1, -2)
        at = np.swapaxes(a.data, -1, -2)
        da = _unbroadcast(np.matmul(g, bt), a.data.shape)
        db = _unbroadcast(np.matmul(at, g), b.data.shape)
        return da, db

    return _node(np.matmul(a.data, b.data), (a, b), backward)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def take_step(a, index: int):
    """Select one step along axis 1 of a (B, T, ...) tensor."""
    a = as_tensor(a)
    idx = index % a.data.shape[1]

    def backward(g):
        out = np.zeros_like(a.data)
        out[:, idx] = g
        return (out,)

    return _node(a.data[:, idx], (a,), backward)


def sum_(a):
    a = as_tensor(a)
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.data.shape).copy(),))


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _node(out, (a,), backward)


def cross_entropy(logits, targets, weights):
    """Weighted sum of -log softmax(logits)[target] over rows.

    logits (N, V); targets int (N,); weights float (N,) already carry the
    padding mask and any 1/batch scaling.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=logits.data.dtype)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(targets)), targets]
    loss = np.asarray((weights * (log_z - picked)).sum())

    def backward(g):
        soft = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        soft[np.arange(len(targets)), targets] -= 1.0
        return (g * weights[:, None] * soft,)

    return _node(loss, (logits,), backward)


def embedding(table, ids):
    """Row gather from an embedding table; ids is a fixed int array."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids, g)
        return (out,)

    return _node(table.data[ids], (table,), backward)


# --- CNN ops ----------------------------------------------------------------


def _im2col(x, kh, kw):
    """(B, C, H, W) -> (B*H*W, C*kh*kw) patches with same-padding."""
    b, c, h, w = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    # (B, C, H, W, kh, kw) -> (B, H, W, C, kh, kw)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * kh * kw)
    return np.ascontiguousarray(cols)


def conv2d(x, w):
    """Same-padded stride-1 2-D convolution via im2col + matmul.

    x (B, C, H, W), w (O, C, kh, kw). No bias: the layer is always
    followed by batch norm, which would cancel one anyway.
    """
    x, w = as_tensor(x), as_tensor(w)
    bs, c, h, wd = x.data.shape
    o, _, kh, kw = w.data.shape
    cols = _im2col(x.data, kh, kw)
    w_flat = w.data.reshape(o, -1)
    out = (cols @ w_flat.T).reshape(bs, h, wd, o).transpose(0, 3, 1, 2)

    def backward(g):
        g_flat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, o)
        dw = (g_flat.T @ cols).reshape(w.data.shape)
        # dx: correlate the output gradient with the spatially flipped,
        # channel-swapped kernel (same padding, stride 1).
        w_rot = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        g_cols = _im2col(np.ascontiguousarray(g), kh, kw)
        dx = (g_cols @ w_rot.reshape(c, -1).T).reshape(bs, h, wd, c).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(dx), dw

    return _node(np.ascontiguousarray(out), (x, w), backward)


def maxpool2(x):
    """2x2 stride-2 max pooling; odd trailing rows/columns are dropped."""
    x = as_tensor(x)
    b, c, h, w = x.data.shape
    hh, ww = h // 2, w // 2
    cropped = x.data[:, :, : hh * 2, : ww * 2]
    tiles = cropped.reshape(b, c, hh, 2, ww, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, hh, ww, 4)
    idx = tiles.argmax(axis=-1)
    out = np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        dtiles = np.zeros((b, c, hh, ww, 4), dtype=g.dtype)
        np.put_along_axis(dtiles, idx[..., None], g[..., None], axis=-1)
        dx = np.zeros_like(x.data)
        dx[:, :, : hh * 2, : ww * 2] = (
            dtiles.reshape(b, c, hh, ww, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, hh * 2, ww * 2)
        )
        return (dx,)

    return _node(np.ascontiguousarray(out), (x,), backward)


class BatchNormState:
    """Running statistics owned by a layer, updated during training."""

    def __init__(self, channels, dtype=np.float64):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)


def batchnorm2d(x, gamma, beta, state: BatchNormState, training: bool,
                momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel batch normalization over (B, H, W) for (B, C, H, W) input."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = (0, 2, 3)
    gb = gamma.data[None, :, None, None]
    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        state.mean = (1.0 - momentum) * state.mean + momentum * mean
        state.var = (1.0 - momentum) * state.var + momentum * var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        out = gb * xhat + beta.data[None, :, None, None]
        n = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]

        def backward(g):
            dgamma = (g * xhat).sum(axis=axes)
            dbeta = g.sum(axis=axes)
            dxhat = g * gb
            s1 = dxhat.sum(axis=axes)[None, :, None, None]
            s2 = (dxhat * xhat).sum(axis=axes)[None, :, None, None]
            dx = (inv_std[None, :, None, None] / n) * (n * dxhat - s1 - xhat * s2)
            return dx, dgamma, dbeta

        return _node(out, (x, gamma, beta), backward)

    inv_std = 1.0 / np.sqrt(state.var + eps)
    scale_c = (gamma.data * inv_std)[None, :, None, None]
    out = scale_c * (x.data - state.mean[None, :, None, None]) + beta.data[None, :, None, None]
    xhat = (x.data - state.mean[None, :, None, None]) * inv_std[None, :, None, None]

    def backward_eval(g):
        return (g * scale_c, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3)))

    return _node(out, (x, gamma, beta), backward_eval)


# --- LSTM -------------------------------------------------------------------


def _lstm_gates(z, h_dim):
    i = 1.0 / (1.0 + np.exp(-z[:, :h_dim]))
    f = 1.0 / (1.0 + np.exp(-z[:, h_dim : 2 * h_dim]))
    g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
    o = 1.0 / (1.0 + np.exp(-z[:, 3 * h_dim :]))
    return i, f, g, o


def lstm_cell(x, h, c, wx, wh, b):
    """One LSTM step; returns (h', c') as separate tensors.

    Gate layout along the 4H axis is [input, forget, cell, output].
    Each returned tensor back-propagates its own head; gradients of
    shared parents accumulate.
    """
    x, h, c, wx, wh, b = map(as_tensor, (x, h, c, wx, wh, b))
    h_dim = h.data.shape[1]
    z = x.data @ wx.data + h.data @ wh.data + b.data
    i, f, g, o = _lstm_gates(z, h_dim)
    c_new = f * c.data + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def make_backward(head):
        def backward(grad):
            if head == "h":
                dc = grad * o * (1.0 - tc * tc)
                do = grad * tc
            else:
                dc = grad
                do = np.zeros_like(grad)
            di = dc * g
            df = dc * c.data
            dg = dc * i
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
                axis=1,
            )
            dx = dz @ wx.data.T
            dh = dz @ wh.data.T
            dc_prev = dc * f
            return dx, dh, dc_prev, x.data.T @ dz, h.data.T @ dz, dz.sum(axis=0)

        return backward

    parents = (x, h, c, wx, wh, b)
    return _node(h_new, parents, make_backward("h")), _node(c_new, parents, make_backward("c"))


def lstm_seq(x, wx, wh, b, mask):
    """Full-sequence LSTM with zero initial state and per-step masking.

    x (B, T, I), mask (B, T) with 1.0 on valid steps. Where the mask is
    0 the state is frozen, so outputs[:, -1] is each sequence's state at
    its own final valid step. Backward is hand-written BPTT.
    """
    x, wx, wh, b = map(as_tensor, (x, wx, wh, b))
    bs, steps, _ = x.data.shape
    h_dim = wh.data.shape[0]
    dtype = x.data.dtype

    hs = np.zeros((bs, steps, h_dim), dtype=dtype)
    cs = np.zeros((bs, steps, h_dim), dtype=dtype)
    gates = np.zeros((bs, steps, 4 * h_dim), dtype=dtype)
    h = np.zeros((bs, h_dim), dtype=dtype)
    c = np.zeros((bs, h_dim), dtype=dtype)
    for t in range(steps):
        z = x.data[:, t] @ wx.data + h @ wh.data + b.data
        i, f, g, o = _lstm_gates(z, h_dim)
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        m = mask[:, t : t + 1]
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
        hs[:, t] = h
        cs[:, t] = c

    def backward(gout):
        dx = np.zeros_like(x.data)
        dwx = np.zeros_like(wx.data)
        dwh = np.zeros_like(wh.data)
        db = np.zeros_like(b.data)
        dh_carry = np.zeros((bs, h_dim), dtype=dtype)
        dc_carry = np.zeros((bs, h_dim), dtype=dtype)
        for t in range(steps - 1, -1, -1):
            m = mask[:, t : t + 1]
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((bs, h_dim), dtype=dtype)
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((bs, h_dim), dtype=dtype)
            dh_total = gout[:, t] + dh_carry
            dc_total = dc_carry
            dh_new = m * dh_total
            dc_new = m * dc_total
            i = gates[:, t, :h_dim]
            f = gates[:, t, h_dim : 2 * h_dim]
            g = gates[:, t, 2 * h_dim : 3 * h_dim]
            o = gates[:, t, 3 * h_dim :]
            c_t_raw = f * c_prev + i * g
            tc = np.tanh(c_t_raw)
            dc = dc_new + dh_new * o * (1.0 - tc * tc)
            do = dh_new * tc
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
                axis=1,
            )
            dx[:, t] = dz @ wx.data.T
            dwx += x.data[:, t].T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dh_carry = (1.0 - m) * dh_total + dz @ wh.data.T
            dc_carry = (1.0 - m) * dc_total + dc * f
        return dx, dwx, dwh, db

    return _node(hs, (x, wx, wh, b), backward)

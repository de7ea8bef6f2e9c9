"""Small reverse-mode autodiff engine on top of numpy (float64 throughout).

Every op builds a node holding its parents and a closure mapping the output
gradient to one gradient per parent.  ``backward`` walks the graph in reverse
topological order and accumulates into the ``grad`` buffers of trainable
leaves only; interior gradients live in a scratch dict for the duration of
the call.
"""

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def backward(self):
        backward(self)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    """Create an op output; the graph edge is only recorded if it is needed."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    ndiff = g.ndim - len(shape)
    if ndiff > 0:
        g = g.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- elementwise


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def relu(x):
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x):
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),))


def sum_all(x):
    shape = x.shape
    return _make(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


# ---------------------------------------------------------------- shape ops


def reshape(x, shape):
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x, axes=None):
    if axes is None:
        axes = tuple(reversed(range(x.data.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def concat(xs, axis=-1):
    """Concatenate along ``axis`` (the feature axis by default)."""
    xs = [_wrap(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), bw)


def gather_rows(table, idx):
    """``table[idx]``; the backward pass scatter-adds into the table."""
    idx = np.asarray(idx, dtype=np.int64)
    shape = table.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _make(table.data[idx], (table,), bw)


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(ad @ bd, (a, b), bw)


def spmm(adj, x):
    """Constant sparse matrix times a dense tensor."""
    if adj.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm shape mismatch: {adj.shape} x {x.shape}")
    adj_t = adj.T.tocsr()
    return _make(np.asarray(adj @ x.data), (x,), lambda g: (np.asarray(adj_t @ g),))


def conv1d_valid(x, w, b):
    """Single-channel valid 1-D convolution: ``out[i] = sum(x[i:i+k] * w) + b``.

    x is [L, d], w is [k, d], b is a scalar tensor.  No activation.
    """
    b = _wrap(b)
    L, d = x.shape
    k = w.shape[0]
    if w.shape[1] != d:
        raise ShapeError(f"kernel width dim {w.shape[1]} != input dim {d}")
    if L < k:
        raise ShapeError(f"input length {L} shorter than kernel width {k}")
    win = np.lib.stride_tricks.sliding_window_view(x.data, (k, d))[:, 0]  # [L-k+1, k, d]
    wd = w.data
    out = np.einsum("ikd,kd->i", win, wd) + b.data

    def bw(g):
        gx = np.zeros((L, d))
        for j in range(k):
            gx[j:j + L - k + 1] += g[:, None] * wd[j]
        gw = np.einsum("i,ikd->kd", g, win)
        return gx, gw, np.asarray(g.sum()).reshape(b.shape)

    return _make(out, (x, w, b), bw)


# ---------------------------------------------------------------- reductions


def softmax_rows(x, mask=None):
    """Softmax along the last axis with max-subtraction.

    ``mask`` (boolean, broadcastable) marks admissible entries; the others get
    probability exactly zero.  Every row needs at least one admissible entry.
    """
    z = x.data if mask is None else np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _make(y, (x,), bw)


def max_over_time(x):
    """Max of a 1-D tensor; the first maximal index receives the gradient."""
    if x.data.size == 0:
        raise ShapeError("max_over_time of an empty tensor")
    i = int(np.argmax(x.data))
    n = x.shape[0]

    def bw(g):
        out = np.zeros(n)
        out[i] = g
        return (out,)

    return _make(np.asarray(x.data[i]), (x,), bw)


def segment_max(x, starts):
    """Column-wise max over contiguous row blocks beginning at ``starts``.

    Blocks must be non-empty.  Ties route the gradient to the first row.
    """
    starts = np.asarray(starts, dtype=np.int64)
    n = x.shape[0]
    out = np.maximum.reduceat(x.data, starts, axis=0)
    lengths = np.diff(np.append(starts, n))
    seg = np.repeat(np.arange(len(starts)), lengths)
    rows = np.arange(n)[:, None]
    cand = np.where(x.data == out[seg], rows, n)
    arg = np.minimum.reduceat(cand, starts, axis=0)  # [S, C]
    cols = np.arange(x.shape[1])

    def bw(g):
        gx = np.zeros(x.shape)
        gx[arg, cols[None, :]] = g
        return (gx,)

    return _make(out, (x,), bw)


def mean_rows(x):
    n = x.shape[0]
    return _make(x.data.mean(axis=0), (x,), lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def segment_mean(x, segments, num_segments):
    """Per-segment mean of rows; empty segments give a zero row."""
    segments = np.asarray(segments, dtype=np.int64)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    out = np.zeros((num_segments, x.shape[1]))
    np.add.at(out, segments, x.data)
    out *= inv[:, None]

    def bw(g):
        return (g[segments] * inv[segments, None],)

    return _make(out, (x,), bw)


def cross_entropy(probs, labels, weights=None):
    """Mean negative log-likelihood of ``labels`` under row-stochastic ``probs``.

    log is clamped at log(1e-12).  Optional per-class ``weights`` scale each
    sample's term (the normaliser stays the batch size).
    """
    labels = np.asarray(labels, dtype=np.int64)
    B, C = probs.shape
    if labels.shape != (B,):
        raise ShapeError(f"expected {B} labels, got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ShapeError(f"label outside [0, {C})")
    rows = np.abs(probs.data.sum(axis=1) - 1.0)
    if rows.size and rows.max() > 1e-6:
        raise ShapeError("probability rows must sum to 1")
    w = np.ones(B) if weights is None else np.asarray(weights, dtype=np.float64)[labels]
    p = probs.data[np.arange(B), labels]
    clamped = p < 1e-12
    loss = -(w * np.log(np.where(clamped, 1e-12, p))).sum() / B

    def bw(g):
        gp = np.zeros((B, C))
        gp[np.arange(B), labels] = np.where(clamped, 0.0, -w / (B * np.where(clamped, 1.0, p)))
        return (gp * g,)

    return _make(np.asarray(loss), (probs,), bw)


# ---------------------------------------------------------------- backward


def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every trainable leaf reachable from ``loss``."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if not p.requires_grad or pg is None:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------- params & optimizer


def xavier(rng, fan_in, fan_out, shape=None):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class ParamGroup(dict):
    """Ordered name -> trainable Tensor map."""

    def add(self, name, data):
        if name in self:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self[name] = t
        return t

    def zero_grad(self):
        for t in self.values():
            t.zero_grad()

    def set_trainable(self, flag):
        for t in self.values():
            t.requires_grad = flag
            if not flag:
                t.grad = None


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """One bias-corrected Adam update over every trainable tensor; zeroes grads after."""
    live = [(n, p) for n, p in params.items() if p.requires_grad]
    for name, p in live:
        if p.grad is None:
            raise ValueError(f"missing gradient for {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in live:
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = np.zeros_like(p.data)

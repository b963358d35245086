"""Reverse-mode automatic differentiation on float64 numpy arrays.

Define-by-run: every op returns a Tensor holding its inputs and a closure
that maps the upstream gradient to per-input gradients.  backward() on a
scalar loss walks the graph in reverse topological order and accumulates
into .grad, so repeated backward calls without zero_grad add up.

The op set is what message-passing networks need: broadcast arithmetic,
matmul, relu/abs/sqrt, concatenation, row gather and segment reductions
(sum/mean/max/min over a segment-id vector).  Max/min route gradients to
the first argmax row of each segment; empty segments produce zeros and
receive nothing.
"""
from __future__ import annotations

import numpy as np


class NonScalarLoss(ValueError):
    """backward() starts from a scalar."""


class SegmentOutOfRange(ValueError):
    """Segment ids must lie in [0, n_segments)."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward_fn) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs,
                  _parents=tuple(parents) if needs else (),
                  _backward=backward_fn if needs else None)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape),
                            _unbroadcast(g, b.data.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape),
                            _unbroadcast(-g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.data.shape),
                            _unbroadcast(-g * a.data / (b.data * b.data),
                                         b.data.shape)))


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,),
                 lambda g: (g * mask,))


def absolute(a) -> Tensor:
    a = _as_tensor(a)
    return _make(np.abs(a.data), (a,),
                 lambda g: (g * np.sign(a.data),))


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    root = np.sqrt(a.data)
    return _make(root, (a,),
                 lambda g: (g * 0.5 / root,))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.data.shape).copy(),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tensors, backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data.reshape(shape), (a,),
                 lambda g: (g.reshape(a.data.shape),))


def gather_rows(a, index) -> Tensor:
    """Row lookup a[index]; gradients scatter-add back."""
    a = _as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.data[idx], (a,), backward)


def detach(a) -> Tensor:
    """Stop-gradient boundary: same values, no history."""
    return Tensor(_as_tensor(a).data)


def segment_reduce(a, segment_ids, n_segments: int, mode: str = "sum") -> Tensor:
    """Reduce rows of a [N, D] tensor into [n_segments, D] by segment id.

    Modes: sum, mean, max, min.  Empty segments yield zeros.  Ties in
    max/min go to the first row (original order).  Ids may be unsorted.
    """
    a = _as_tensor(a)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if a.data.ndim != 2 or ids.shape != (a.data.shape[0],):
        raise ValueError("segment_reduce expects [N, D] values and [N] ids")
    if ids.size and (ids.min() < 0 or ids.max() >= n_segments):
        raise SegmentOutOfRange(
            f"ids outside [0, {n_segments})")
    if mode not in ("sum", "mean", "max", "min"):
        raise ValueError(f"unknown mode {mode!r}")

    n, d = a.data.shape
    if n and np.any(np.diff(ids) < 0):
        order = np.argsort(ids, kind="stable")
    else:
        order = None
    x = a.data if order is None else a.data[order]
    sids = ids if order is None else ids[order]
    starts = np.searchsorted(sids, np.arange(n_segments), side="left")
    ends = np.searchsorted(sids, np.arange(n_segments), side="right")
    counts = (ends - starts).astype(np.float64)

    if mode in ("sum", "mean"):
        csum = np.zeros((n + 1, d))
        np.cumsum(x, axis=0, out=csum[1:])
        out = csum[ends] - csum[starts]
        if mode == "mean":
            out /= np.maximum(counts, 1.0)[:, None]

        def backward(g):
            scale = g if mode == "sum" else g / np.maximum(counts, 1.0)[:, None]
            gx = scale[ids]
            return (gx,)

        return _make(out, (a,), backward)

    cols = np.arange(d)
    out = np.zeros((n_segments, d))
    arg_rows = np.full((n_segments, d), -1, dtype=np.int64)
    if n:
        # reduceat over runs of equal sorted ids; empty segments never get
        # a block so they keep the zero / -1 defaults
        block_starts = np.concatenate([[0], np.flatnonzero(np.diff(sids)) + 1])
        uids = sids[block_starts]
        ufunc = np.maximum if mode == "max" else np.minimum
        out[uids] = ufunc.reduceat(x, block_starts, axis=0)
        hit = x == out[sids]
        cand = np.where(hit, np.arange(n)[:, None], n)
        arg_rows[uids] = np.minimum.reduceat(cand, block_starts, axis=0)
        if order is not None:
            mapped = order[np.clip(arg_rows, 0, n - 1)]
            arg_rows = np.where(arg_rows >= 0, mapped, -1)

    def backward(g):
        gx = np.zeros_like(a.data)
        filled = arg_rows >= 0
        np.add.at(gx, (arg_rows[filled], np.broadcast_to(cols, arg_rows.shape)[filled]),
                  g[filled])
        return (gx,)

    return _make(out, (a,), backward)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad over the whole graph."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.data.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))

    # per-call flow buffer so repeated backward calls each contribute one
    # fresh pass instead of re-propagating already-accumulated gradients
    flow: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g_out = flow.get(id(node))
        if g_out is None:
            continue
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad = node.grad + g_out
        if node._backward is None:
            continue
        for parent, g in zip(node._parents, node._backward(g_out)):
            if not parent.requires_grad:
                continue
            prev = flow.get(id(parent))
            flow[id(parent)] = g if prev is None else prev + g


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


def clip_global_norm(params, max_norm: float = 5.0) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm."""
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float((g * g).sum())
    norm = total ** 0.5
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """Cosine decay from lr_max at step 0 to lr_min at total_steps."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    frac = min(max(step, 0), total_steps) / total_steps
    return float(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * frac)))


class Adam:
    """Adam over a name -> Tensor parameter dict; skips absent gradients."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        if lr is None:
            lr = self.lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * (p.grad * p.grad)
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t,
                "m": {k: v.copy() for k, v in self.m.items()},
                "v": {k: v.copy() for k, v in self.v.items()}}

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for k in self.m:
            self.m[k] = np.array(state["m"][k], dtype=np.float64)
            self.v[k] = np.array(state["v"][k], dtype=np.float64)


def gradcheck(build_loss, wrt: dict[str, Tensor], h: float = 1e-6) -> float:
    """Central finite differences against backward(); max mixed error.

    build_loss rebuilds the graph from the tensors in wrt on every call.
    The returned error is |analytic - numeric| / max(1, |analytic|, |numeric|)
    maximised over every element of every tensor.
    """
    for t in wrt.values():
        t.grad = None
    loss = build_loss()
    backward(loss)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for k, t in wrt.items()}

    worst = 0.0
    for name, t in wrt.items():
        flat = t.data.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = float(build_loss().data)
            flat[j] = orig - h
            down = float(build_loss().data)
            flat[j] = orig
            numeric = (up - down) / (2 * h)
            a = analytic[name].ravel()[j]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst

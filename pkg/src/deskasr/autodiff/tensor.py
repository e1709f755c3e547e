"""Tape-based reverse-mode automatic differentiation over dense float64 arrays.

The design is deliberately small and strict:

* all data is 64-bit, row-major numpy; results of every forward op are
  checked finite (NaN/Inf raises immediately rather than poisoning training),
* binary ops require equal shapes or a size-1 operand; any other broadcast
  must be spelled out with an explicit op such as :func:`add_row`,
* a :class:`Tape` records nodes in execution order, so parents always precede
  children and backward is a single reverse index sweep with a fixed,
  reproducible accumulation order,
* one tape per forward pass; tensors from two different live tapes cannot be
  combined.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from deskasr.errors import ContractError, DomainError, ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "softmax",
    "log_softmax",
    "masked_softmax",
    "sum_all",
    "mean_all",
    "concat",
    "row",
    "cols",
    "get",
    "add_row",
    "reshape",
    "lstm_cell",
]

# pullback: gradient of the output -> gradient contribution for one parent
_Pullback = Callable[[np.ndarray], np.ndarray]


class Tensor:
    """A dense float64 array, optionally registered on a gradient tape."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape: "Tape | None" = None, node: int | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.size == 0:
            raise ShapeError("tensors must be non-empty")
        self.data = arr
        self.tape = tape
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = "" if self.tape is None else f", node={self.node}"
        return f"Tensor(shape={self.shape}{tag})"

    # arithmetic sugar; scalars auto-wrap as constants
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return neg(self)


class _Node:
    __slots__ = ("op", "parents", "pullbacks")

    def __init__(self, op: str, parents: tuple[int, ...], pullbacks: tuple[_Pullback, ...]):
        self.op = op
        self.parents = parents
        self.pullbacks = pullbacks


class Tape:
    """Append-only record of one forward pass.

    Nodes are appended as ops execute, so every node's parents have smaller
    indices; :meth:`backward` visits nodes in strictly decreasing index order.
    A tape accepts exactly one backward sweep.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._grads: list[np.ndarray | None] | None = None
        self._shapes: list[tuple[int, ...]] = []

    def leaf(self, data) -> Tensor:
        """Register a watched leaf (typically a model parameter)."""
        t = Tensor(data)
        t.tape = self
        t.node = self._append(_Node("leaf", (), ()), t.data.shape)
        return t

    def _append(self, node: _Node, shape: tuple[int, ...]) -> int:
        if self._grads is not None:
            raise ContractError("tape already consumed by backward(); build a new tape")
        self.nodes.append(node)
        self._shapes.append(shape)
        return len(self.nodes) - 1

    def backward(self, loss: Tensor) -> None:
        """Accumulate gradients of a scalar loss into every reachable node."""
        if self._grads is not None:
            raise ContractError("backward() already ran on this tape")
        if loss.tape is not self or loss.node is None:
            raise ContractError("loss tensor is not on this tape")
        if loss.data.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.node] = np.ones_like(loss.data)
        for k in range(loss.node, -1, -1):
            g = grads[k]
            if g is None:
                continue
            node = self.nodes[k]
            for pid, pull in zip(node.parents, node.pullbacks):
                contrib = pull(g)
                if grads[pid] is None:
                    grads[pid] = contrib
                else:
                    grads[pid] = grads[pid] + contrib
        self._grads = grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the loss w.r.t. ``t`` (zeros if the loss ignores it)."""
        if self._grads is None:
            raise ContractError("call backward() before grad()")
        if t.tape is not self or t.node is None:
            raise ContractError("tensor is not on this tape")
        g = self._grads[t.node]
        if g is None:
            return np.zeros(self._shapes[t.node])
        return g


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ContractError("operands live on different tapes")
    return tape


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite values produced by op '{op}'")


def _make(op: str, data: np.ndarray, parents: Sequence[tuple[Tensor, _Pullback]]) -> Tensor:
    _check_finite(data, op)
    tape = _tape_of(*(t for t, _ in parents))
    out = Tensor(data)
    if tape is not None:
        tracked = [(t.node, pull) for t, pull in parents if t.tape is tape]
        node = _Node(op, tuple(p for p, _ in tracked), tuple(f for _, f in tracked))
        out.tape = tape
        out.node = tape._append(node, data.shape)
    return out


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ (reshape explicitly)")


def _reduce_to(shape: tuple[int, ...]) -> _Pullback:
    # collapse a broadcast gradient back onto a size-1 operand
    return lambda g: np.sum(g).reshape(shape) * np.ones(shape)


def _grad_for(t: Tensor, other: Tensor, base: _Pullback) -> _Pullback:
    if t.size == 1 and other.size != 1:
        return lambda g: np.sum(base(g)).reshape(t.shape)
    return base


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    data = a.data + b.data
    return _make("add", data, [
        (a, _grad_for(a, b, lambda g: g)),
        (b, _grad_for(b, a, lambda g: g)),
    ])


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    data = a.data - b.data
    return _make("sub", data, [
        (a, _grad_for(a, b, lambda g: g)),
        (b, _grad_for(b, a, lambda g: -g)),
    ])


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    data = a.data * b.data
    ad, bd = a.data, b.data
    return _make("mul", data, [
        (a, _grad_for(a, b, lambda g: g * bd)),
        (b, _grad_for(b, a, lambda g: g * ad)),
    ])


def neg(a: Tensor) -> Tensor:
    return _make("neg", -a.data, [(a, lambda g: -g)])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data
    ad, bd = a.data, b.data
    return _make("matmul", data, [
        (a, lambda g: g @ bd.T),
        (b, lambda g: ad.T @ g),
    ])


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make("tanh", y, [(a, lambda g: g * (1.0 - y * y))])


def sigmoid(a: Tensor) -> Tensor:
    # split by sign to avoid exp overflow
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make("sigmoid", y, [(a, lambda g: g * y * (1.0 - y))])


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(a.data)
    return _make("exp", y, [(a, lambda g: g * y)])


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DomainError("log of non-positive value")
    x = a.data
    return _make("log", np.log(x), [(a, lambda g: g / x)])


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    _check_axis(a, axis)
    z = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def pull(g: np.ndarray) -> np.ndarray:
        return y * (g - np.sum(g * y, axis=axis, keepdims=True))

    return _make("softmax", y, [(a, pull)])


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    _check_axis(a, axis)
    z = a.data - np.max(a.data, axis=axis, keepdims=True)
    y = z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))

    def pull(g: np.ndarray) -> np.ndarray:
        return g - np.exp(y) * np.sum(g, axis=axis, keepdims=True)

    return _make("log_softmax", y, [(a, pull)])


def masked_softmax(e: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over a 1-D energy vector; masked positions get exactly 0."""
    if e.data.ndim != 1:
        raise ShapeError(f"masked_softmax expects a 1-D tensor, got {e.shape}")
    if mask is None:
        return softmax(e, axis=0)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != e.shape:
        raise ShapeError(f"mask shape {mask.shape} != energies shape {e.shape}")
    if not mask.any():
        raise ContractError("masked_softmax: every position is masked")
    z = np.where(mask, e.data - np.max(e.data[mask]), -np.inf)
    w = np.exp(z)
    y = w / np.sum(w)

    def pull(g: np.ndarray) -> np.ndarray:
        return y * (g - np.sum(g * y))

    return _make("masked_softmax", y, [(e, pull)])


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _make("sum", np.asarray(np.sum(a.data)), [
        (a, lambda g: np.broadcast_to(g, shape).copy() if g.shape != shape else g)
    ])


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    shape = a.shape
    return _make("mean", np.asarray(np.mean(a.data)), [
        (a, lambda g: np.broadcast_to(g / n, shape).copy())
    ])


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat of empty sequence")
    _check_axis(tensors[0], axis)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    parents = []
    offset = 0
    for t in tensors:
        width = t.shape[axis]
        lo = offset

        def pull(g: np.ndarray, lo=lo, width=width) -> np.ndarray:
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, lo + width)
            return g[tuple(sl)]

        parents.append((t, pull))
        offset += width
    return _make("concat", data, parents)


def row(m: Tensor, i: int) -> Tensor:
    """Row ``i`` of a matrix as a 1 x H tensor (used for embedding lookup)."""
    if m.data.ndim != 2:
        raise ShapeError(f"row expects a 2-D tensor, got {m.shape}")
    if not 0 <= i < m.shape[0]:
        raise ShapeError(f"row index {i} out of range for shape {m.shape}")
    shape = m.shape

    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros(shape)
        out[i : i + 1, :] = g
        return out

    return _make("row", m.data[i : i + 1, :].copy(), [(m, pull)])


def cols(m: Tensor, start: int, stop: int) -> Tensor:
    """Column slice of a matrix (used to split fused LSTM gate blocks)."""
    if m.data.ndim != 2:
        raise ShapeError(f"cols expects a 2-D tensor, got {m.shape}")
    if not 0 <= start < stop <= m.shape[1]:
        raise ShapeError(f"cols [{start}:{stop}] out of range for shape {m.shape}")
    shape = m.shape

    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros(shape)
        out[:, start:stop] = g
        return out

    return _make("cols", m.data[:, start:stop].copy(), [(m, pull)])


def get(t: Tensor, index: tuple[int, ...]) -> Tensor:
    """A single element as a scalar tensor."""
    idx = tuple(index)
    if len(idx) != t.data.ndim:
        raise ShapeError(f"index {idx} does not address shape {t.shape}")
    shape = t.shape

    def pull(g: np.ndarray) -> np.ndarray:
        out = np.zeros(shape)
        out[idx] = g
        return out

    return _make("get", np.asarray(t.data[idx]), [(t, pull)])


def add_row(m: Tensor, r: Tensor) -> Tensor:
    """Explicit row broadcast: add a 1 x H vector to every row of T x H."""
    if m.data.ndim != 2 or r.shape != (1, m.shape[1]):
        raise ShapeError(f"add_row expects (T,H) and (1,H), got {m.shape} and {r.shape}")
    data = m.data + r.data
    return _make("add_row", data, [
        (m, lambda g: g),
        (r, lambda g: np.sum(g, axis=0, keepdims=True)),
    ])


def reshape(t: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = t.shape
    data = t.data.reshape(shape)
    return _make("reshape", data, [(t, lambda g: g.reshape(old))])


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """Fused LSTM cell update returning [h' | c'] as one 1 x 2H row.

    One tape node instead of a dozen keeps recurrent unrolls cheap; the
    pullback implements the standard gate derivatives. Gate order in the
    fused projections is input, forget, cell, output.
    """
    units = h.shape[1]
    if x.data.ndim != 2 or h.shape != (1, units) or c.shape != (1, units):
        raise ShapeError(f"lstm_cell expects row vectors, got x={x.shape} h={h.shape} c={c.shape}")
    if wx.shape != (x.shape[1], 4 * units) or wh.shape != (units, 4 * units) \
            or b.shape != (1, 4 * units):
        raise ShapeError("lstm_cell parameter shapes inconsistent with state size")
    z = x.data @ wx.data + h.data @ wh.data + b.data
    zi, zf, zg, zo = (z[:, k * units:(k + 1) * units] for k in range(4))
    with np.errstate(over="ignore"):
        gi = 1.0 / (1.0 + np.exp(-zi))
        gf = 1.0 / (1.0 + np.exp(-zf))
        gg = np.tanh(zg)
        go = 1.0 / (1.0 + np.exp(-zo))
    c_new = gf * c.data + gi * gg
    tc = np.tanh(c_new)
    h_new = go * tc
    out = np.concatenate([h_new, c_new], axis=1)

    xd, hd, cd = x.data, h.data, c.data
    wxd, whd = wx.data, wh.data
    saved: dict = {}  # a tape runs backward once, so one grad per node

    def _dz(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if "dz" not in saved:
            gh, gc = g[:, :units], g[:, units:]
            dc = gc + gh * go * (1.0 - tc * tc)
            dzo = gh * tc * go * (1.0 - go)
            dzf = dc * cd * gf * (1.0 - gf)
            dzi = dc * gg * gi * (1.0 - gi)
            dzg = dc * gi * (1.0 - gg * gg)
            saved["dz"] = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
            saved["dc"] = dc
        return saved["dz"], saved["dc"]

    return _make("lstm_cell", out, [
        (x, lambda g: _dz(g)[0] @ wxd.T),
        (h, lambda g: _dz(g)[0] @ whd.T),
        (c, lambda g: _dz(g)[1] * gf),
        (wx, lambda g: xd.T @ _dz(g)[0]),
        (wh, lambda g: hd.T @ _dz(g)[0]),
        (b, lambda g: _dz(g)[0]),
    ])


def _check_axis(t: Tensor, axis: int) -> None:
    nd = t.data.ndim
    if not -nd <= axis < nd:
        raise ShapeError(f"axis {axis} invalid for shape {t.shape}")

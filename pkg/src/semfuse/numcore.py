"""Dense float64 tensors with reverse-mode differentiation.

Only the operations the model graph needs are provided. Heavy recurrent and
windowed ops (GRU scan, valid 1-D convolution, ReLU + max-pool) are single
graph nodes with hand-written backward passes; everything else is a thin
numpy wrapper.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import LabelIndexError, PreconditionError, ShapeError

_GRAD_ENABLED = True
_BRANCH_TRACE: list | None = None


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording a graph."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def record_branches():
    """Collect the discrete decisions (argmax, sign) taken by piecewise ops.

    Two forward passes that yield the same record went through the same
    smooth piece of the function.
    """
    global _BRANCH_TRACE
    prev, _BRANCH_TRACE = _BRANCH_TRACE, []
    try:
        yield _BRANCH_TRACE
    finally:
        _BRANCH_TRACE = prev


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; identical seed gives an identical stream everywhere."""
    return np.random.Generator(np.random.PCG64(seed))


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.ascontiguousarray(np.array(data, dtype=np.float64))
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def values(self) -> list[float]:
        """Row-major flat values."""
        return self.data.reshape(-1).tolist()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise PreconditionError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        self.grad = grad if self.grad is None else self.grad + grad
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = _as_tensor(other)
        a, b = self, other
        return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    __radd__ = __add__

    def __neg__(self):
        return _make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        a, b = self, other
        return _make(
            a.data * b.data,
            (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other.pow(-1.0)
        return self * (1.0 / other)

    def pow(self, exponent: float):
        x = self.data
        return _make(x**exponent, (self,), lambda g: (g * exponent * x ** (exponent - 1),))

    def __pow__(self, exponent: float):
        return self.pow(exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        x = self
        out = x.data[index]

        def back(g):
            full = np.zeros_like(x.data)
            np.add.at(full, index, g)
            return (full,)

        return _make(out, (x,), back)

    # shape ----------------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.shape
        return _make(self.data.reshape(shape), (self,), lambda g: (g.reshape(orig),))

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = np.argsort(axes)
        return _make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),))

    @property
    def T(self):
        return self.transpose()

    # reductions and pointwise -------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return _make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def exp(self):
        out = np.exp(self.data)
        return _make(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self.data
        return _make(np.log(x), (self,), lambda g: (g / x,))

    def tanh(self):
        out = np.tanh(self.data)
        return _make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return _make(out, (self,), lambda g: (g * out * (1.0 - out),))


def _raise_item(t: Tensor):
    raise PreconditionError(f"item() needs a single-element tensor, got shape {t.shape}")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = np.ascontiguousarray(data)
    out.grad = None
    out.name = None
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents

        def run(g):
            for parent, pg in zip(parents, backward(g)):
                if parent.requires_grad and pg is not None:
                    parent.grad = pg if parent.grad is None else parent.grad + pg

        out._backward = run
    else:
        out._parents = ()
        out._backward = None
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), back)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from exc
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + 1 + axis, 1)
        expanded.append(t.reshape(tuple(shape)))
    return concat(expanded, axis=axis)


def pad_rows(x: Tensor, length: int) -> Tensor:
    """Zero-pad ``x`` along its first axis up to ``length`` rows."""
    extra = length - x.shape[0]
    if extra <= 0:
        return x
    return concat([x, Tensor(np.zeros((extra,) + x.shape[1:]))], axis=0)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def linear(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``."""
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError(f"linear: x{x.shape} @ W{W.shape} + b{b.shape} is not defined")
    a_dim, b_dim = W.shape

    def back(g):
        gx = g @ W.data.T
        gW = x.data.reshape(-1, a_dim).T @ g.reshape(-1, b_dim)
        gb = g.reshape(-1, b_dim).sum(axis=0)
        return gx, gW, gb

    return _make(x.data @ W.data + b.data, (x, W, b), back)


def conv1d_valid(seq: Tensor, W: Tensor, b: Tensor, k: int) -> Tensor:
    """Stride-1 valid convolution; window ``i`` is ``seq[i:i+k]`` flattened."""
    if seq.ndim != 2:
        raise ShapeError(f"conv1d_valid: expected a 2-D sequence, got {seq.shape}")
    l, a = seq.shape
    if k < 1 or l < k:
        raise PreconditionError(f"conv1d_valid: sequence length {l} shorter than window {k}")
    if W.shape[0] != k * a or b.shape != (W.shape[1],):
        raise ShapeError(f"conv1d_valid: W{W.shape}, b{b.shape} do not fit window {k} x width {a}")
    windows = np.lib.stride_tricks.sliding_window_view(seq.data, (k, a))[:, 0]
    unfolded = windows.reshape(l - k + 1, k * a)

    def back(g):
        gu = (g @ W.data.T).reshape(l - k + 1, k, a)
        gseq = np.zeros_like(seq.data)
        for offset in range(k):
            gseq[offset : offset + l - k + 1] += gu[:, offset]
        return gseq, unfolded.T @ g, g.sum(axis=0)

    return _make(unfolded @ W.data + b.data, (seq, W, b), back)


def relu_maxpool(seq: Tensor, valid=None) -> Tensor:
    """``max(0, max_i seq[..., i, :])`` over the position axis (second to last).

    ``valid`` (bool, shape ``seq.shape[:-1]``) excludes positions from the
    pool. Backward routes the gradient to the first arg-max position of each
    column, and nowhere when the column maximum is not positive.
    """
    if seq.ndim < 2 or seq.shape[-2] < 1:
        raise PreconditionError(f"relu_maxpool: need at least one row, got shape {seq.shape}")
    x = seq.data
    if valid is not None:
        x = np.where(np.asarray(valid, dtype=bool)[..., None], x, -np.inf)
    arg = x.argmax(axis=-2)
    peak = np.take_along_axis(x, arg[..., None, :], axis=-2)[..., 0, :]
    active = peak > 0.0
    if _BRANCH_TRACE is not None:
        _BRANCH_TRACE.append(("relu_maxpool", arg.tobytes(), active.tobytes()))

    def back(g):
        gseq = np.zeros_like(x)
        np.put_along_axis(gseq, arg[..., None, :], np.where(active, g, 0.0)[..., None, :], axis=-2)
        return (gseq,)

    return _make(np.where(active, peak, 0.0), (seq,), back)


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0.0
    if _BRANCH_TRACE is not None:
        _BRANCH_TRACE.append(("relu", pos.tobytes()))
    return _make(np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,))


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table``; backward scatter-adds into those rows."""
    ids = np.asarray(ids, dtype=np.int64)
    vocab = table.shape[0]
    bad = ids[(ids < 0) | (ids >= vocab)]
    if bad.size:
        raise LabelIndexError(f"embedding_lookup: id {int(bad[0])} outside table of size V={vocab}")

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(table.data[ids], (table,), back)


def gelu(x: Tensor) -> Tensor:
    v = x.data
    cdf = 0.5 * (1.0 + erf(v / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi)
    return _make(v * cdf, (x,), lambda g: (g * (cdf + v * pdf),))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    v = x.data
    mu = v.mean(axis=-1, keepdims=True)
    centered = v - mu
    rstd = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * rstd
    width = v.shape[-1]

    def back(g):
        dxhat = g * gamma.data
        gx = rstd * (
            dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, (g * xhat).reshape(-1, width).sum(0), g.reshape(-1, width).sum(0)

    return _make(xhat * gamma.data + beta.data, (x, gamma, beta), back)


def masked_softmax(x: Tensor, mask=None, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; positions where ``mask`` is False get weight 0."""
    v = x.data
    if mask is not None:
        v = np.where(mask, v, -np.inf)
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _make(p, (x,), back)


def log_softmax(x: Tensor, mask=None) -> Tensor:
    v = x.data
    if mask is not None:
        v = np.where(mask, v, -np.inf)
    shifted = v - v.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - logz
    p = np.exp(out)

    def back(g):
        g = np.where(np.isfinite(out), g, 0.0)
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _make(out, (x,), back)


# ---------------------------------------------------------------------------
# recurrent
# ---------------------------------------------------------------------------


@dataclass
class GRUParams:
    """One GRU direction. Gate blocks along the last axis are (reset, update, candidate)."""

    W_x: Tensor  # [d_in, 3h]
    W_h: Tensor  # [h, 3h]
    b_x: Tensor  # [3h]
    b_h: Tensor  # [3h]

    @property
    def hidden(self) -> int:
        return self.W_h.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.W_x, self.W_h, self.b_x, self.b_h]


@dataclass
class BiGRUParams:
    forward: GRUParams
    backward: GRUParams

    def tensors(self) -> list[Tensor]:
        return self.forward.tensors() + self.backward.tensors()


def gru_scan(x: Tensor, p: GRUParams, reverse: bool = False) -> Tensor:
    """Run one GRU direction over ``x`` of shape [n, d_in] or [batch, n, d_in].

    r = sig(x Wx_r + bx_r + h Wh_r + bh_r)
    z = sig(x Wx_z + bx_z + h Wh_z + bh_z)
    c = tanh(x Wx_c + bx_c + r * (h Wh_c + bh_c))
    h' = (1 - z) * c + z * h
    """
    squeeze = x.ndim == 2
    xs = x.data[None] if squeeze else x.data
    batch, n, d_in = xs.shape
    H = p.hidden
    if n < 1:
        raise PreconditionError("gru_scan: empty sequence")
    if p.W_x.shape != (d_in, 3 * H) or p.W_h.shape != (H, 3 * H):
        raise ShapeError(f"gru_scan: W_x{p.W_x.shape}, W_h{p.W_h.shape} do not fit input width {d_in}")
    Wx, Wh, bx, bh = p.W_x.data, p.W_h.data, p.b_x.data, p.b_h.data
    gi = xs @ Wx + bx
    steps = range(n - 1, -1, -1) if reverse else range(n)
    out = np.zeros((batch, n, H))
    cache = []
    h = np.zeros((batch, H))
    for t in steps:
        gh = h @ Wh + bh
        r = _sigmoid(gi[:, t, :H] + gh[:, :H])
        z = _sigmoid(gi[:, t, H : 2 * H] + gh[:, H : 2 * H])
        c = np.tanh(gi[:, t, 2 * H :] + r * gh[:, 2 * H :])
        h_new = (1.0 - z) * c + z * h
        cache.append((t, h, r, z, c, gh[:, 2 * H :]))
        out[:, t] = h_new
        h = h_new

    def back(g):
        g = g[None] if squeeze else g
        dgi = np.zeros_like(gi)
        dWh = np.zeros_like(Wh)
        dbh = np.zeros_like(bh)
        carry = np.zeros((batch, H))
        for t, h_prev, r, z, c, ghc in reversed(cache):
            dh = g[:, t] + carry
            dc = dh * (1.0 - z)
            dz = dh * (h_prev - c)
            da_c = dc * (1.0 - c * c)
            da_r = da_c * ghc * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            dgi[:, t] = np.concatenate([da_r, da_z, da_c], axis=1)
            dgh = np.concatenate([da_r, da_z, da_c * r], axis=1)
            dWh += h_prev.T @ dgh
            dbh += dgh.sum(axis=0)
            carry = dh * z + dgh @ Wh.T
        dx = dgi @ Wx.T
        dWx = xs.reshape(-1, d_in).T @ dgi.reshape(-1, 3 * H)
        dbx = dgi.reshape(-1, 3 * H).sum(axis=0)
        return (dx[0] if squeeze else dx), dWx, dWh, dbx, dbh

    return _make(out[0] if squeeze else out, (x, p.W_x, p.W_h, p.b_x, p.b_h), back)


def bigru_forward(seq: Tensor, params: BiGRUParams) -> Tensor:
    """Per-position concatenation of left-to-right and right-to-left hidden states."""
    return concat([gru_scan(seq, params.forward), gru_scan(seq, params.backward, reverse=True)], axis=-1)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under row-wise softmax."""
    if logits.ndim == 1:
        logits = logits.reshape(1, -1)
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    rows, classes = logits.shape
    if targets.shape != (rows,):
        raise ShapeError(f"cross_entropy: {rows} rows of logits but targets of shape {targets.shape}")
    bad = targets[(targets < 0) | (targets >= classes)]
    if bad.size:
        raise LabelIndexError(f"cross_entropy: target {int(bad[0])} outside [0, {classes})")
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), (rows, classes))
        if not mask[np.arange(rows), targets].all():
            raise LabelIndexError("cross_entropy: target falls on a masked position")
    logp = log_softmax(logits, mask)
    picked = logp[np.arange(rows), targets]
    return -picked.mean()


def mse_loss(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    diff = pred - Tensor(target)
    return (diff * diff).mean()


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, int], name: str | None = None) -> Tensor:
    bound = math.sqrt(6.0 / (shape[0] + shape[1]))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def uniform_embedding(rng: np.random.Generator, shape: tuple[int, int], name: str | None = None) -> Tensor:
    return Tensor(rng.uniform(-0.05, 0.05, size=shape), requires_grad=True, name=name)


def zeros(shape, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def ones(shape, name: str | None = None) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True, name=name)


def init_gru(rng: np.random.Generator, d_in: int, hidden: int, prefix: str = "gru") -> GRUParams:
    return GRUParams(
        W_x=xavier_uniform(rng, (d_in, 3 * hidden), f"{prefix}.W_x"),
        W_h=xavier_uniform(rng, (hidden, 3 * hidden), f"{prefix}.W_h"),
        b_x=zeros((3 * hidden,), f"{prefix}.b_x"),
        b_h=zeros((3 * hidden,), f"{prefix}.b_h"),
    )


def init_bigru(rng: np.random.Generator, d_in: int, hidden: int, prefix: str = "bigru") -> BiGRUParams:
    return BiGRUParams(init_gru(rng, d_in, hidden, f"{prefix}.fwd"), init_gru(rng, d_in, hidden, f"{prefix}.bwd"))


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------


class Adam:
    """Adam with decoupled weight decay on matrices (biases and norms exempt)."""

    def __init__(
        self,
        params: Iterable[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay and p.data.ndim >= 2:
                update = update + self.weight_decay * p.data
            p.data -= lr * update


def warmup_linear(step: int, total_steps: int, warmup_fraction: float) -> float:
    """Learning-rate multiplier: linear ramp to 1, then linear decay to 0."""
    warmup = max(1, int(round(warmup_fraction * total_steps))) if warmup_fraction > 0 else 0
    if step < warmup:
        return (step + 1) / warmup
    remaining = max(1, total_steps - warmup)
    return max(0.0, (total_steps - step) / remaining)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


_RESOLUTION_ULPS = 8


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped: int  # perturbation crossed a kink or tie
    unresolved: int = 0  # both gradients below the finite-difference resolution
    worst: str = ""


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    samples_per_param: int = 8,
    seed: int = 0,
) -> GradCheckReport:
    """Compare reverse-mode gradients with central differences.

    ``fn`` rebuilds the scalar output from the current parameter values. A
    sampled coordinate is skipped when either perturbed pass takes a
    different branch of a piecewise op (ReLU sign, max-pool arg-max) than the
    unperturbed pass. It is counted as unresolved when the output change and
    the change the analytic gradient predicts are both within a few ulps of
    the output, where the central difference carries no information.
    """
    for p in params:
        p.grad = None
    with record_branches() as base_trace:
        out = fn()
    if out.data.size != 1:
        raise PreconditionError(f"grad_check: output must be scalar, got shape {out.shape}")
    base_trace = list(base_trace)
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = make_rng(seed)
    worst, worst_where, checked, skipped, unresolved = 0.0, "", 0, 0, 0
    for pi, (p, ana) in enumerate(zip(params, analytic)):
        flat = p.data.reshape(-1)
        count = min(samples_per_param, flat.size)
        for i in rng.choice(flat.size, size=count, replace=False):
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                with record_branches() as t_plus:
                    f_plus = fn().item()
                flat[i] = orig - eps
                with record_branches() as t_minus:
                    f_minus = fn().item()
                flat[i] = orig
            if t_plus != base_trace or t_minus != base_trace:
                skipped += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = ana.reshape(-1)[i]
            resolution = _RESOLUTION_ULPS * np.spacing(max(abs(f_plus), abs(f_minus)))
            if abs(f_plus - f_minus) <= resolution and abs(a) * 2.0 * eps <= resolution:
                unresolved += 1
                continue
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            checked += 1
            if err > worst:
                worst = err
                worst_where = f"{p.name or f'param{pi}'}[{int(i)}]: analytic={a:.6g} numeric={numeric:.6g}"
    for p in params:
        p.grad = None
    return GradCheckReport(float(worst), checked, skipped, unresolved, worst_where)

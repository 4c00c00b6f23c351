"""Reverse-mode autodiff over flat float32 numpy buffers.

A Tensor wraps a C-contiguous float32 ndarray plus an optional gradient
buffer of the same shape.  Differentiable operations record their parents
and a closure that maps the output gradient to parent gradient increments;
`backward` replays those closures in reverse topological order, so a
tensor used k times accumulates k contributions.  Graphs are rebuilt every
step; nothing here mutates a tensor after creation except optimizer steps
and grad accumulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .rng import Stream

_debug_checks = False
_wide = False


def set_debug_checks(enabled: bool) -> None:
    """When enabled, every op raises FloatingPointError on non-finite output."""
    global _debug_checks
    _debug_checks = enabled


class wide_float:
    """Context manager under which new tensors hold float64.

    Training and inference run in float32; finite-difference gradient
    checking needs the extra precision so the comparison measures the
    gradient formulas rather than f32 rounding of the forward pass.
    """

    def __enter__(self):
        global _wide
        self._prev = _wide
        _wide = True
        return self

    def __exit__(self, *exc):
        global _wide
        _wide = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64 if _wide else np.float32)
        # note: np.ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = arr if arr.flags["C_CONTIGUOUS"] else np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError("item() on non-scalar tensor")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; constants are wrapped on the fly
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

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def _node(data: np.ndarray, parents, backward, op: str) -> Tensor:
    out = Tensor(data)
    if _debug_checks and not np.all(np.isfinite(out.data)):
        raise FloatingPointError(f"non-finite values produced by op '{op}'")
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


# ---------------------------------------------------------------------------
# construction

def _check_shape(shape) -> tuple:
    shape = tuple(int(d) for d in shape)
    if any(d < 1 for d in shape):
        raise ShapeError(f"all dims must be >= 1, got {shape}")
    return shape


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(_check_shape(shape), dtype=np.float32), requires_grad)


def constant(shape, value: float, requires_grad: bool = False) -> Tensor:
    return Tensor(np.full(_check_shape(shape), value, dtype=np.float32), requires_grad)


def seeded_normal(shape, seed: int, stddev: float, requires_grad: bool = False) -> Tensor:
    """Normal(0, stddev) buffer drawn from the SplitMix64 stream keyed by seed."""
    shape = _check_shape(shape)
    n = int(np.prod(shape))
    buf = Stream(seed).normal(n, stddev).astype(np.float32).reshape(shape)
    return Tensor(buf, requires_grad)


# ---------------------------------------------------------------------------
# broadcasting helpers

def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, d in enumerate(shape):
        if d == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _node(out_data, (a, b), bw, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _node(out_data, (a, b), bw, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(out_data, (a, b), bw, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(out_data, (a, b), bw, "div")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = a.data * np.float32(c)

    def bw(g):
        a._accumulate(g * np.float32(c))

    return _node(out_data, (a,), bw, "scale")


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bw(g):
        a._accumulate(g * (a.data > 0))

    return _node(out_data, (a,), bw, "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out_data = np.where(a.data > 0, a.data, np.float32(slope) * a.data)

    def bw(g):
        a._accumulate(g * np.where(a.data > 0, np.float32(1.0), np.float32(slope)))

    return _node(out_data, (a,), bw, "leaky_relu")


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximation GELU: 0.5x(1 + tanh(c(x + ax^3)))."""
    x = a.data
    u = np.float32(_GELU_C) * (x + np.float32(_GELU_A) * x * x * x)
    t = np.tanh(u)
    out_data = np.float32(0.5) * x * (1.0 + t)

    def bw(g):
        du = np.float32(_GELU_C) * (1.0 + 3.0 * np.float32(_GELU_A) * x * x)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
        a._accumulate(g * d)

    return _node(out_data, (a,), bw, "gelu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    e = np.exp(-np.abs(x))
    out_data = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def bw(g):
        a._accumulate(g * out_data * (1.0 - out_data))

    return _node(out_data, (a,), bw, "sigmoid")


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def bw(g):
        a._accumulate(g / a.data)

    return _node(out_data, (a,), bw, "log")


def absolute(a: Tensor) -> Tensor:
    out_data = np.abs(a.data)

    def bw(g):
        # subgradient 0 at x = 0
        a._accumulate(g * np.sign(a.data))

    return _node(out_data, (a,), bw, "abs")


def square(a: Tensor) -> Tensor:
    out_data = a.data * a.data

    def bw(g):
        a._accumulate(g * 2.0 * a.data)

    return _node(out_data, (a,), bw, "square")


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def bw(g):
        a._accumulate(g / (2.0 * out_data))

    return _node(out_data, (a,), bw, "sqrt")


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bw(g):
        a._accumulate(g * out_data)

    return _node(out_data, (a,), bw, "exp")


def clamp_min(a: Tensor, lo: float) -> Tensor:
    """max(x, lo); gradient passes only where x > lo."""
    out_data = np.maximum(a.data, np.float32(lo))

    def bw(g):
        a._accumulate(g * (a.data > lo))

    return _node(out_data, (a,), bw, "clamp_min")


# ---------------------------------------------------------------------------
# reductions

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    out_data = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _node(out_data, (a,), bw, "sum")


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    out_data = a.data.mean(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        a._accumulate(np.broadcast_to(g, a.shape) / count)

    return _node(out_data, (a,), bw, "mean")


# ---------------------------------------------------------------------------
# matmul / softmax / normalization

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must have rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} x {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bw(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.shape))

    return _node(out_data, (a, b), bw, "matmul")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    ax = axis % a.ndim
    shifted = a.data - a.data.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=ax, keepdims=True)

    def bw(g):
        dot = (g * out_data).sum(axis=ax, keepdims=True)
        a._accumulate(out_data * (g - dot))

    return _node(out_data, (a,), bw, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last dim to zero mean / unit variance, then affine."""
    if x.shape[-1] != gamma.shape[-1] or x.shape[-1] != beta.shape[-1]:
        raise ShapeError("layer_norm affine params must match the last dim")
    mu = tmean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = tmean(square(xc), axis=-1, keepdims=True)
    inv = div(_wrap(1.0), sqrt(add(var, _wrap(eps))))
    return add(mul(mul(xc, inv), gamma), beta)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial dims of NCHW."""
    if x.ndim != 4:
        raise ShapeError("instance_norm expects NCHW input")
    mu = tmean(x, axis=(2, 3), keepdims=True)
    xc = sub(x, mu)
    var = tmean(square(xc), axis=(2, 3), keepdims=True)
    inv = div(_wrap(1.0), sqrt(add(var, _wrap(eps))))
    g = reshape(gamma, (1, -1, 1, 1))
    b = reshape(beta, (1, -1, 1, 1))
    return add(mul(mul(xc, inv), g), b)


# ---------------------------------------------------------------------------
# data movement

def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g):
        a._accumulate(g.reshape(a.shape))

    return _node(out_data, (a,), bw, "reshape")


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out_data = np.ascontiguousarray(a.data.transpose(axes))

    def bw(g):
        a._accumulate(np.ascontiguousarray(g.transpose(inv)))

    return _node(out_data, (a,), bw, "permute")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    ax = axis % a.ndim
    if start < 0 or start + length > a.shape[ax]:
        raise ShapeError(f"narrow [{start}:{start + length}] outside axis of size {a.shape[ax]}")
    sl = [slice(None)] * a.ndim
    sl[ax] = slice(start, start + length)
    sl = tuple(sl)
    out_data = np.ascontiguousarray(a.data[sl])

    def bw(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[sl] += g

    return _node(out_data, (a,), bw, "narrow")


def split(a: Tensor, axis: int, parts) -> list[Tensor]:
    ax = axis % a.ndim
    if sum(parts) != a.shape[ax]:
        raise ShapeError(f"split parts {parts} do not sum to axis length {a.shape[ax]}")
    outs, off = [], 0
    for p in parts:
        outs.append(narrow(a, ax, off, p))
        off += p
    return outs


def concat(tensors, axis: int) -> Tensor:
    ax = axis % tensors[0].ndim
    sizes = [t.shape[ax] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=ax)
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, o, s in zip(tensors, offsets, sizes):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(o, o + s)
                t._accumulate(np.ascontiguousarray(g[tuple(sl)]))

    return _node(out_data, tuple(tensors), bw, "concat")


def upsample_nearest2x(a: Tensor) -> Tensor:
    if a.ndim != 4:
        raise ShapeError("upsample_nearest2x expects NCHW input")
    out_data = a.data.repeat(2, axis=2).repeat(2, axis=3)

    def bw(g):
        n, c, h2, w2 = g.shape
        a._accumulate(g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)))

    return _node(out_data, (a,), bw, "upsample_nearest2x")


# ---------------------------------------------------------------------------
# convolution

def _conv_out(side: int, k: int, stride: int, pad: int) -> int:
    out = (side + 2 * pad - k) // stride + 1
    if out < 1:
        raise ShapeError(f"conv output dim {out} < 1 (side={side}, k={k}, s={stride}, p={pad})")
    return out


def _pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _conv_fwd(x, w, stride, pad, depthwise=False):
    n, c, h, wd = x.shape
    o, cg, kh, kw = w.shape
    ho, wo = _conv_out(h, kh, stride, pad), _conv_out(wd, kw, stride, pad)
    xp = _pad_hw(x, pad)
    if depthwise:
        out = np.zeros((n, o, ho, wo), dtype=x.dtype)
        for ki in range(kh):
            for kj in range(kw):
                v = xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
                out += v * w[:, 0, ki, kj][None, :, None, None]
        return out
    acc = np.zeros((n, ho, wo, o), dtype=x.dtype)
    for ki in range(kh):
        for kj in range(kw):
            v = xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
            acc += np.tensordot(v, w[:, :, ki, kj], axes=([1], [1]))
    return np.ascontiguousarray(acc.transpose(0, 3, 1, 2))


def _conv_dx(gy, w, stride, pad, x_hw, depthwise=False):
    n, o, ho, wo = gy.shape
    _, cg, kh, kw = w.shape
    h, wd = x_hw
    c = o if depthwise else cg
    gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=gy.dtype)
    for ki in range(kh):
        for kj in range(kw):
            sl = (slice(None), slice(None),
                  slice(ki, ki + stride * ho, stride), slice(kj, kj + stride * wo, stride))
            if depthwise:
                gxp[sl] += gy * w[:, 0, ki, kj][None, :, None, None]
            else:
                gxp[sl] += np.tensordot(gy, w[:, :, ki, kj], axes=([1], [0])).transpose(0, 3, 1, 2)
    if pad == 0:
        return gxp
    return np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wd])


def _conv_dw(x, gy, stride, pad, w_shape, depthwise=False):
    o, cg, kh, kw = w_shape
    n, c, h, wd = x.shape
    _, _, ho, wo = gy.shape
    xp = _pad_hw(x, pad)
    gw = np.zeros(w_shape, dtype=x.dtype)
    for ki in range(kh):
        for kj in range(kw):
            v = xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
            if depthwise:
                gw[:, 0, ki, kj] = (gy * v).sum(axis=(0, 2, 3))
            else:
                gw[:, :, ki, kj] = np.tensordot(gy, v, axes=([0, 2, 3], [0, 2, 3]))
    return gw


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation over NCHW with grouped channels.

    Output side is floor((side + 2*padding - k)/stride) + 1.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d expects NCHW input and OIHW weights")
    n, c, h, wd = x.shape
    o, cg, kh, kw = w.shape
    if c % groups != 0 or o % groups != 0:
        raise ShapeError(f"channels {c}->{o} not divisible by groups={groups}")
    if cg != c // groups:
        raise ShapeError(f"weight in-channels {cg} != {c}//{groups}")
    if bias is not None and bias.shape != (o,):
        raise ShapeError(f"bias shape {bias.shape} != ({o},)")

    depthwise = groups == c and o == c and cg == 1
    if groups == 1 or depthwise:
        out_data = _conv_fwd(x.data, w.data, stride, padding, depthwise)
    else:
        og = o // groups
        outs = [
            _conv_fwd(x.data[:, gi * cg:(gi + 1) * cg], w.data[gi * og:(gi + 1) * og],
                      stride, padding)
            for gi in range(groups)
        ]
        out_data = np.concatenate(outs, axis=1)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]

    parents = (x, w) if bias is None else (x, w, bias)

    def bw(g):
        if groups == 1 or depthwise:
            if x.requires_grad:
                x._accumulate(_conv_dx(g, w.data, stride, padding, (h, wd), depthwise))
            if w.requires_grad:
                w._accumulate(_conv_dw(x.data, g, stride, padding, w.shape, depthwise))
        else:
            og = o // groups
            gx_parts, gw_parts = [], []
            for gi in range(groups):
                gyg = g[:, gi * og:(gi + 1) * og]
                xg = x.data[:, gi * cg:(gi + 1) * cg]
                wg = w.data[gi * og:(gi + 1) * og]
                if x.requires_grad:
                    gx_parts.append(_conv_dx(gyg, wg, stride, padding, (h, wd)))
                if w.requires_grad:
                    gw_parts.append(_conv_dw(xg, gyg, stride, padding, wg.shape))
            if x.requires_grad:
                x._accumulate(np.concatenate(gx_parts, axis=1))
            if w.requires_grad:
                w._accumulate(np.concatenate(gw_parts, axis=0))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)))

    return _node(out_data, parents, bw, "conv2d")


def conv2d_input_vjp(gy: Tensor, w: Tensor, stride: int, padding: int, x_hw) -> Tensor:
    """Gradient of conv2d w.r.t. its input, as a differentiable node.

    Linear in both arguments; used to express discriminator input gradients
    inside the graph so the gradient penalty can itself be differentiated.
    Only groups=1 convolutions are supported.
    """
    out_data = _conv_dx(gy.data, w.data, stride, padding, x_hw)

    def bw(g):
        if gy.requires_grad:
            gy._accumulate(_conv_fwd(g, w.data, stride, padding))
        if w.requires_grad:
            w._accumulate(_conv_dw(g, gy.data, stride, padding, w.shape))

    return _node(out_data, (gy, w), bw, "conv2d_input_vjp")


# ---------------------------------------------------------------------------
# backward

def backward(loss: Tensor) -> None:
    """Populate grads of everything reachable from a scalar loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss is not connected to any requires_grad tensor")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class OptimState:
    """Adam moment buffers keyed like the parameter dict, plus a step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict[str, Tensor], state: OptimState, lr: float = 1e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update; params with no grad are skipped."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        if p.grad is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        g = p.grad
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


# ---------------------------------------------------------------------------
# parameter registry

class ParamStore:
    """Named, ordered tensor registry; init draws derive from (seed, name)."""

    def __init__(self, seed: int):
        self.seed = seed
        self.tensors: dict[str, Tensor] = {}

    def _register(self, name: str, t: Tensor) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        t.requires_grad = True
        self.tensors[name] = t
        return t

    def normal(self, name: str, shape, stddev: float) -> Tensor:
        from .rng import derive_key
        return self._register(name, seeded_normal(shape, derive_key(self.seed, name), stddev))

    def zeros(self, name: str, shape) -> Tensor:
        return self._register(name, zeros(shape))

    def ones(self, name: str, shape) -> Tensor:
        return self._register(name, constant(shape, 1.0))


def count_parameters(params: dict[str, Tensor]) -> int:
    return sum(int(p.data.size) for p in params.values())

"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tape` records primitive operations in creation order; ``backward``
sweeps the tape once in reverse.  Primitives accept any mix of ``Tensor``
and plain ndarray operands; ndarrays act as constants, so evaluating a
network on raw arrays (no active tape) is an allocation-free fast path.

:class:`Parameter` carries a per-entry boolean trainability mask.  Entries
with ``mask=False`` are zero at initialization, their gradients are zeroed
by a hook before any optimizer sees them, and their values are reset to
exactly 0.0 after every Adam step.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible for a primitive."""


class GradientError(RuntimeError):
    """Backward-pass misuse or a non-finite gradient."""


_ACTIVE: "Tape | None" = None


class Tensor:
    """A float64 array on the tape."""

    __slots__ = ("value", "grad", "_bw", "_hook")

    def __init__(self, value, bw=None, hook=None):
        self.value = value
        self.grad = None
        self._bw = bw
        self._hook = hook

    @property
    def shape(self):
        return self.value.shape

    def detach(self) -> np.ndarray:
        """Value as a constant; gradient flow stops here."""
        return self.value

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


class Tape:
    """Ordered record of primitives; reverse sweep visits each node once."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._watched: dict[int, tuple] = {}

    def __enter__(self):
        global _ACTIVE
        self._prev = _ACTIVE
        _ACTIVE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE
        _ACTIVE = self._prev
        return False

    def leaf(self, value, mask=None) -> Tensor:
        """New input leaf. ``mask`` (bool array) gates gradients if given."""
        t = Tensor(np.asarray(value, dtype=np.float64), hook=mask)
        self.nodes.append(t)
        return t

    def watch(self, param: "Parameter") -> Tensor:
        """Leaf sharing ``param``'s value buffer, memoized per tape."""
        entry = self._watched.get(id(param))
        if entry is not None:
            return entry[1]
        t = Tensor(param.value, hook=param.mask)
        self.nodes.append(t)
        self._watched[id(param)] = (param, t)
        return t

    def parameter_grads(self) -> dict:
        """Gradients of every watched Parameter (zeros if unreached)."""
        out = {}
        for param, t in self._watched.values():
            out[param] = t.grad if t.grad is not None else np.zeros_like(param.value)
        return out


def active_tape() -> "Tape | None":
    return _ACTIVE


def _val(x):
    return x.value if type(x) is Tensor else x


def _record(value, bw) -> Tensor:
    if _ACTIVE is None:
        raise GradientError("tensor operation outside an active Tape")
    out = Tensor(value, bw=bw)
    _ACTIVE.nodes.append(out)
    return out


def _acc(t: Tensor, g):
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _sum_to(g, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, s) in enumerate(zip(g.shape, shape)):
        if s == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _broadcast_fail(name, a, b):
    raise ShapeError(f"{name}: shapes {np.shape(a)} and {np.shape(b)} do not broadcast") from None


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a, b):
    av, bv = _val(a), _val(b)
    if np.ndim(av) < 2 or np.ndim(bv) < 2:
        raise ShapeError(f"matmul: operands must be >=2-D, got {np.shape(av)} @ {np.shape(bv)}")
    if av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {av.shape} @ {bv.shape}")
    out = av @ bv
    if type(a) is not Tensor and type(b) is not Tensor:
        return out

    def bw(g):
        if type(a) is Tensor:
            _acc(a, _sum_to(g @ np.swapaxes(bv, -1, -2), av.shape))
        if type(b) is Tensor:
            _acc(b, _sum_to(np.swapaxes(av, -1, -2) @ g, bv.shape))

    return _record(out, bw)


def add(a, b):
    av, bv = _val(a), _val(b)
    try:
        out = av + bv
    except ValueError:
        _broadcast_fail("add", av, bv)
    if type(a) is not Tensor and type(b) is not Tensor:
        return out

    def bw(g):
        if type(a) is Tensor:
            _acc(a, _sum_to(g, np.shape(av)))
        if type(b) is Tensor:
            _acc(b, _sum_to(g, np.shape(bv)))

    return _record(out, bw)


def scale(a, s: float):
    av = _val(a)
    out = av * s
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * s)

    return _record(out, bw)


def hadamard(a, b):
    av, bv = _val(a), _val(b)
    try:
        out = av * bv
    except ValueError:
        _broadcast_fail("hadamard", av, bv)
    if type(a) is not Tensor and type(b) is not Tensor:
        return out

    def bw(g):
        if type(a) is Tensor:
            _acc(a, _sum_to(g * bv, np.shape(av)))
        if type(b) is Tensor:
            _acc(b, _sum_to(g * av, np.shape(bv)))

    return _record(out, bw)


def relu(a):
    av = _val(a)
    out = np.maximum(av, 0.0)
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * (av > 0.0))

    return _record(out, bw)


def tanh(a):
    av = _val(a)
    out = np.tanh(av)
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * (1.0 - out * out))

    return _record(out, bw)


def sin(a):
    av = _val(a)
    out = np.sin(av)
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * np.cos(av))

    return _record(out, bw)


def power(a, p: float):
    av = _val(a)
    out = av ** p
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * (p * av ** (p - 1.0)))

    return _record(out, bw)


def exp(a):
    av = _val(a)
    out = np.exp(av)
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * out)

    return _record(out, bw)


def square(a):
    av = _val(a)
    out = av * av
    if type(a) is not Tensor:
        return out

    def bw(g):
        _acc(a, g * (2.0 * av))

    return _record(out, bw)


def tsum(a, axis=None, keepdims=False):
    av = _val(a)
    out = np.sum(av, axis=axis, keepdims=keepdims)
    if type(a) is not Tensor:
        return out

    def bw(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _acc(a, np.broadcast_to(gg, av.shape))

    return _record(out, bw)


def tmean(a, axis=None, keepdims=False):
    av = _val(a)
    out = np.mean(av, axis=axis, keepdims=keepdims)
    if type(a) is not Tensor:
        return out
    count = av.size if axis is None else av.shape[axis]

    def bw(g):
        gg = np.asarray(g) / count
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _acc(a, np.broadcast_to(gg, av.shape))

    return _record(out, bw)


def concat(parts, axis=0):
    vals = [_val(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    if not any(type(p) is Tensor for p in parts):
        return out
    sizes = [v.shape[axis] for v in vals]

    def bw(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if type(p) is Tensor:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(offset, offset + size)
                _acc(p, g[tuple(sl)])
            offset += size

    return _record(out, bw)


def slice_(a, index):
    """Basic indexing (ints, slices, None). Gradient scatters back."""
    av = _val(a)
    out = av[index]
    if type(a) is not Tensor:
        return out

    def bw(g):
        z = np.zeros_like(av)
        z[index] += g
        _acc(a, z)

    return _record(out, bw)


def sub(a, b):
    """Composition helper: a - b."""
    return add(a, scale(b, -1.0))


def backward(loss: Tensor) -> dict:
    """Reverse sweep from a scalar loss.

    Populates ``.grad`` on every reached tensor, applies mask hooks on
    leaves, and returns ``{Parameter: gradient}`` for all watched
    parameters of the active tape.
    """
    tape = _ACTIVE
    if tape is None:
        raise GradientError("backward called outside an active Tape")
    if type(loss) is not Tensor:
        raise GradientError("backward: loss is not a Tensor")
    if np.size(loss.value) != 1:
        raise GradientError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    loss.grad = np.ones_like(loss.value)
    for t in reversed(tape.nodes):
        g = t.grad
        if g is None:
            continue
        if t._bw is not None:
            t._bw(g)
        elif t._hook is not None:
            t.grad = g * t._hook
    return tape.parameter_grads()


# ---------------------------------------------------------------------------
# parameters and optimization
# ---------------------------------------------------------------------------

class Parameter:
    """Named float64 array with a trainability mask and Adam state."""

    __slots__ = ("name", "value", "mask", "m", "v", "step")

    def __init__(self, name: str, value, mask=None):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != self.value.shape:
                raise ShapeError(f"parameter '{name}': mask shape {mask.shape} != value shape {self.value.shape}")
            self.value[~mask] = 0.0
        self.mask = mask
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0

    @property
    def trainable_count(self) -> int:
        return int(self.mask.sum()) if self.mask is not None else self.value.size

    @property
    def frozen_count(self) -> int:
        return self.value.size - self.trainable_count

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape}, trainable={self.trainable_count})"


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(params, grads, lr: float):
    """One Adam update with bias correction.

    ``grads`` maps Parameter to gradient array; missing entries count as
    zero gradient.  Masked entries stay exactly 0.0 (their gradients are
    already zeroed by the backward hook; values are reset regardless).
    """
    for p in params:
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.value)
        elif not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter '{p.name}'")
        p.step += 1
        p.m = ADAM_BETA1 * p.m + (1.0 - ADAM_BETA1) * g
        p.v = ADAM_BETA2 * p.v + (1.0 - ADAM_BETA2) * (g * g)
        mhat = p.m / (1.0 - ADAM_BETA1 ** p.step)
        vhat = p.v / (1.0 - ADAM_BETA2 ** p.step)
        p.value -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
        if p.mask is not None:
            p.value[~p.mask] = 0.0


def lr_schedule(base: float, round_index: int, gamma: float, tau: int) -> float:
    """Step decay: base * gamma^floor(round_index / tau)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    return base * gamma ** (round_index // tau)


def xavier_init(shape, fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got ({fan_in}, {fan_out})")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)

"""Minimal reverse-mode differentiation over 2-D float64 arrays.

A :class:`GradTape` records every primitive applied to a watched value.
Values that never touch a watched input are ordinary constants, so running
the model without a tape costs nothing beyond the numpy arithmetic::

    tape = GradTape()
    w = tape.watch(np.ones((3, 2)))
    loss = total(matmul(constant(x), w))
    (dw,) = tape.gradient(loss, [w])

Only the primitives the model needs are provided. Each one returns a new
:class:`Var`; broadcasting is limited to a ``(1, w)`` row or a ``(1, 1)``
scalar on the right-hand operand of :func:`add` and :func:`mul`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .numeric import LAYER_NORM_EPS, NumericError


class Var:
    __slots__ = ("value", "tape")

    def __init__(self, value: np.ndarray, tape: GradTape | None = None):
        self.value = value
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        tracked = "tracked" if self.tape is not None else "const"
        return f"Var(shape={self.shape}, {tracked})"


class GradTape:
    """Records primitive operations for one backward pass. Not thread-safe."""

    def __init__(self) -> None:
        self._records: list[tuple[Var, tuple[Var, ...], Callable]] = []
        self._watched: set[int] = set()

    def watch(self, value) -> Var:
        v = Var(np.asarray(value, dtype=np.float64), self)
        self._watched.add(id(v))
        return v

    def _record(self, out: Var, inputs: tuple[Var, ...], vjp: Callable) -> None:
        self._records.append((out, inputs, vjp))

    def __len__(self) -> int:
        return len(self._records)

    def gradient(self, loss: Var, params: Sequence[Var]) -> list[np.ndarray]:
        """Gradients of a scalar ``loss`` with respect to each of ``params``.

        Parameters the loss does not depend on get a zero gradient.
        """
        if loss.tape is not self:
            raise NumericError("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise NumericError(f"loss must be a scalar, got shape {loss.shape}")
        for p in params:
            if id(p) not in self._watched:
                raise NumericError("gradient requested for a value that is not watched by this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for out, inputs, vjp in reversed(self._records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for inp, gi in zip(inputs, vjp(g)):
                if inp.tape is None or gi is None:
                    continue
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi
        result = []
        for p in params:
            g = grads.get(id(p))
            g = np.zeros_like(p.value) if g is None else g.reshape(p.shape)
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient")
            result.append(g)
        return result


def constant(value) -> Var:
    return Var(np.asarray(value, dtype=np.float64))


def _wrap(x) -> Var:
    return x if isinstance(x, Var) else constant(x)


def _emit(value: np.ndarray, inputs: tuple[Var, ...], vjp: Callable) -> Var:
    tape = None
    for inp in inputs:
        if inp.tape is not None:
            if tape is not None and inp.tape is not tape:
                raise NumericError("operands are recorded on different tapes")
            tape = inp.tape
    out = Var(value, tape)
    if tape is not None:
        tape._record(out, inputs, vjp)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    return g.sum(axis=axes, keepdims=True)


def matmul(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    if a.shape[1] != b.shape[0]:
        raise NumericError(f"cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return _emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    sa, sb = a.shape, b.shape
    return _emit(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def mul(a, b) -> Var:
    a, b = _wrap(a), _wrap(b)
    av, bv = a.value, b.value
    return _emit(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def scale(a, c: float) -> Var:
    a = _wrap(a)
    return _emit(a.value * c, (a,), lambda g: (g * c,))


def transpose(a) -> Var:
    a = _wrap(a)
    return _emit(a.value.T, (a,), lambda g: (g.T,))


def relu(a) -> Var:
    a = _wrap(a)
    mask = a.value > 0
    return _emit(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def softmax_rows(a) -> Var:
    a = _wrap(a)
    z = np.exp(a.value - a.value.max(axis=1, keepdims=True))
    y = z / z.sum(axis=1, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _emit(y, (a,), vjp)


def layer_norm_rows(x, gain, bias, eps: float = LAYER_NORM_EPS) -> Var:
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    xv = x.value
    width = xv.shape[1]
    if width < 2:
        raise NumericError("layer_norm_rows needs at least 2 columns")
    mu = xv.mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(((xv - mu) ** 2).mean(axis=1, keepdims=True) + eps)
    xhat = (xv - mu) * inv
    gv = gain.value

    def vjp(g):
        gx = g * gv
        dx = inv * (gx - gx.mean(axis=1, keepdims=True) - xhat * (gx * xhat).mean(axis=1, keepdims=True))
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return _emit(xhat * gv + bias.value, (x, gain, bias), vjp)


def concat_cols(parts: Sequence) -> Var:
    parts = [_wrap(p) for p in parts]
    edges = np.cumsum([0] + [p.shape[1] for p in parts])

    def vjp(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(edges[:-1], edges[1:]))

    return _emit(np.concatenate([p.value for p in parts], axis=1), tuple(parts), vjp)


def cols(a, start: int, stop: int) -> Var:
    a = _wrap(a)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _emit(a.value[:, start:stop].copy(), (a,), vjp)


def total(a) -> Var:
    a = _wrap(a)
    shape = a.shape
    return _emit(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g.item()),))


def nll_rows(probs, targets: np.ndarray, reduction: str = "mean", floor: float = 1e-12) -> Var:
    """Negative log-likelihood of row-stochastic ``probs`` at integer ``targets``.

    The log is taken of ``max(p, floor)``; clamped entries get no gradient.
    """
    probs = _wrap(probs)
    pv = probs.value
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (pv.shape[0],):
        raise NumericError(f"{pv.shape[0]} prediction rows but {targets.shape} targets")
    if reduction not in ("mean", "sum"):
        raise NumericError(f"unknown reduction {reduction!r}")
    rows = np.arange(pv.shape[0])
    picked = pv[rows, targets]
    clamped = np.maximum(picked, floor)
    denom = pv.shape[0] if reduction == "mean" else 1
    value = -np.log(clamped).sum() / denom

    def vjp(g):
        full = np.zeros_like(pv)
        full[rows, targets] = np.where(picked > floor, -1.0 / clamped, 0.0) / denom
        return (full * g.item(),)

    return _emit(np.array([[value]]), (probs,), vjp)


def softmax_nll(logits, targets: np.ndarray, reduction: str = "mean") -> Var:
    """Cross-entropy of ``softmax(logits)`` computed through log-softmax.

    The gradient is ``softmax(logits) - onehot`` even where the probability of
    the true class underflows.
    """
    logits = _wrap(logits)
    lv = logits.value
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (lv.shape[0],):
        raise NumericError(f"{lv.shape[0]} logit rows but {targets.shape} targets")
    if reduction not in ("mean", "sum"):
        raise NumericError(f"unknown reduction {reduction!r}")
    shifted = lv - lv.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    rows = np.arange(lv.shape[0])
    denom = lv.shape[0] if reduction == "mean" else 1
    value = -log_p[rows, targets].sum() / denom

    def vjp(g):
        d = np.exp(log_p)
        d[rows, targets] -= 1.0
        return (d * (g.item() / denom),)

    return _emit(np.array([[value]]), (logits,), vjp)

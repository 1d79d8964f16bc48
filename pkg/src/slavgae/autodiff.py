"""Tape-based reverse-mode differentiation over dense float64 numpy arrays.

A :class:`Tape` records every primitive applied to values that depend on a
parameter. :meth:`Tape.backward` then sweeps the record once, newest first,
pushing each output gradient to the inputs of the op that produced it.

Only the handful of primitives needed by the model are provided. Each one
checks its output for NaN/inf and raises :class:`NumericError` naming the op.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError

__all__ = ["Var", "Tape", "GradCheckReport", "grad_check"]


class Var:
    """A value on a tape. ``grad`` is filled in by :meth:`Tape.backward`."""

    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Var{tag}(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _as_array(value):
    a = np.array(value, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


class Tape:
    """Ordered record of primitive applications.

    >>> tape = Tape()
    >>> w = tape.param("w", [[1.0, 2.0]])
    >>> loss = tape.reduce_sum(tape.mul(w, w))
    >>> tape.backward(loss)["w"]
    array([[2., 4.]])
    """

    def __init__(self):
        self._records = []
        self.params = {}

    def __len__(self):
        return len(self._records)

    # -- leaves ---------------------------------------------------------------

    def constant(self, value) -> Var:
        return Var(_as_array(value))

    def param(self, name, value) -> Var:
        if name in self.params:
            raise ValueError(f"parameter {name!r} already registered on this tape")
        v = Var(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = v
        return v

    def _emit(self, op, value, inputs, backward):
        if not np.all(np.isfinite(value)):
            raise NumericError(f"{op}: non-finite values in output")
        out = Var(value, requires_grad=any(v.requires_grad for v in inputs))
        if out.requires_grad:
            self._records.append((op, out, inputs, backward))
        return out

    # -- primitives -----------------------------------------------------------

    def matmul(self, a: Var, b: Var) -> Var:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
        av, bv = a.value, b.value
        return self._emit("matmul", av @ bv, (a, b),
                          lambda g: (g @ bv.T, av.T @ g))

    def spmm(self, adj, h: Var) -> Var:
        """Sparse (normalized adjacency) times dense; ``adj`` is never differentiated."""
        m = adj.matrix
        if m.shape[1] != h.shape[0]:
            raise DimensionError(f"spmm: adjacency {m.shape} vs dense {h.shape}")
        return self._emit("spmm", np.asarray(m @ h.value), (h,),
                          lambda g: (np.asarray(m.T @ g),))

    def add_row_bias(self, x: Var, b: Var) -> Var:
        bv = b.value.reshape(-1)
        if x.value.ndim != 2 or bv.size != x.shape[1]:
            raise DimensionError(f"add_row_bias: bias of size {bv.size} for {x.shape}")
        bshape = b.shape
        return self._emit("add_row_bias", x.value + bv, (x, b),
                          lambda g: (g, g.sum(axis=0).reshape(bshape)))

    def relu(self, x: Var) -> Var:
        active = x.value > 0
        return self._emit("relu", np.where(active, x.value, 0.0), (x,),
                          lambda g: (g * active,))

    def softmax_rows(self, x: Var) -> Var:
        if x.value.ndim != 2:
            raise DimensionError("softmax_rows: expects a matrix")
        z = x.value - x.value.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=1, keepdims=True)

        def back(g):
            return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

        return self._emit("softmax_rows", y, (x,), back)

    def concat_cols(self, a: Var, b: Var) -> Var:
        if a.shape[0] != b.shape[0]:
            raise DimensionError(f"concat_cols: row counts {a.shape[0]} and {b.shape[0]} differ")
        k = a.shape[1]
        return self._emit("concat_cols", np.concatenate([a.value, b.value], axis=1), (a, b),
                          lambda g: (g[:, :k], g[:, k:]))

    def exp(self, x: Var) -> Var:
        with np.errstate(over="ignore"):
            y = np.exp(x.value)
        return self._emit("exp", y, (x,), lambda g: (g * y,))

    def log(self, x: Var) -> Var:
        xv = x.value
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.log(xv)
        return self._emit("log", y, (x,), lambda g: (g / xv,))

    def clip(self, x: Var, lo, hi) -> Var:
        """Clamp to [lo, hi]; gradient passes only where the input is strictly inside."""
        inside = (x.value > lo) & (x.value < hi)
        return self._emit("clip", np.clip(x.value, lo, hi), (x,),
                          lambda g: (g * inside,))

    def _check_same(self, op, a, b):
        if a.shape != b.shape:
            raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")

    def mul(self, a: Var, b: Var) -> Var:
        self._check_same("mul", a, b)
        av, bv = a.value, b.value
        return self._emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))

    def add(self, a: Var, b: Var) -> Var:
        self._check_same("add", a, b)
        return self._emit("add", a.value + b.value, (a, b), lambda g: (g, g))

    def sub(self, a: Var, b: Var) -> Var:
        self._check_same("sub", a, b)
        return self._emit("sub", a.value - b.value, (a, b), lambda g: (g, -g))

    def scale(self, x: Var, c: float) -> Var:
        c = float(c)
        return self._emit("scale", x.value * c, (x,), lambda g: (g * c,))

    def add_scalar(self, x: Var, c: float) -> Var:
        return self._emit("add_scalar", x.value + float(c), (x,), lambda g: (g,))

    def reduce_sum(self, x: Var) -> Var:
        shape = x.shape
        return self._emit("reduce_sum", np.array(x.value.sum()), (x,),
                          lambda g: (np.full(shape, float(g)),))

    def reduce_mean(self, x: Var) -> Var:
        shape = x.shape
        size = x.value.size
        if size == 0:
            raise DimensionError("reduce_mean: empty operand")
        return self._emit("reduce_mean", np.array(x.value.mean()), (x,),
                          lambda g: (np.full(shape, float(g) / size),))

    def masked_row_select(self, x: Var, rows) -> Var:
        """Gather rows by index (or boolean mask); gradient scatters back."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            if rows.shape != (x.shape[0],):
                raise DimensionError("masked_row_select: boolean mask length mismatch")
            rows = np.flatnonzero(rows)
        if rows.size and (rows.min() < 0 or rows.max() >= x.shape[0]):
            raise DimensionError("masked_row_select: row index out of range")
        shape = x.shape

        def back(g):
            full = np.zeros(shape)
            np.add.at(full, rows, g)
            return (full,)

        return self._emit("masked_row_select", x.value[rows], (x,), back)

    # -- reverse sweep --------------------------------------------------------

    def backward(self, loss: Var) -> dict:
        """Gradient of scalar ``loss`` w.r.t. every registered parameter."""
        if loss.value.size != 1:
            raise DimensionError("backward: loss must be a scalar")
        for v in self.params.values():
            v.grad = None
        for _, out, inputs, _ in self._records:
            out.grad = None
        loss.grad = np.ones_like(loss.value)
        for op, out, inputs, back in reversed(self._records):
            if out.grad is None:
                continue
            for v, g in zip(inputs, back(out.grad)):
                if not v.requires_grad:
                    continue
                g = np.reshape(g, v.shape)
                v.grad = g.copy() if v.grad is None else v.grad + g
        return {name: (np.zeros_like(v.value) if v.grad is None else v.grad)
                for name, v in self.params.items()}


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    per_param: dict = field(default_factory=dict)
    worst: tuple = None

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < self.tol)


def grad_check(f, params, eps=1e-5, tol=1e-4) -> GradCheckReport:
    """Compare taped gradients of ``f`` with central differences.

    ``f(tape, pvars)`` builds a scalar loss on ``tape`` from the parameter
    Vars in ``pvars`` (a dict keyed like ``params``). It must be
    deterministic: any noise has to be drawn once, outside ``f``.

    The error per coordinate is ``|fd - analytic| / max(1, |analytic|)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    def value(p):
        tape = Tape()
        pvars = {k: tape.param(k, v) for k, v in p.items()}
        return float(f(tape, pvars).value)

    tape = Tape()
    pvars = {k: tape.param(k, v) for k, v in params.items()}
    analytic = tape.backward(f(tape, pvars))

    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    report = GradCheckReport(0.0, tol)
    for name, arr in work.items():
        worst = 0.0
        flat = arr.reshape(-1)
        an = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = value(work)
            flat[i] = orig - eps
            fm = value(work)
            flat[i] = orig
            fd = (fp - fm) / (2 * eps)
            err = float(abs(fd - an[i]) / max(1.0, abs(an[i])))
            if err > worst:
                worst = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, i, float(an[i]), float(fd))
        report.per_param[name] = worst
    return report

"""Reverse-mode tape over numpy arrays with nested second-order forward duals.

A :class:`Tape` records every :class:`Var` produced during one evaluation,
in creation order, so the backward sweep is a plain reversed walk.  A
:class:`TapeValue` carries a primal value plus first and second directional
derivatives with respect to the network inputs; each of its channels is
itself an array (or a taped ``Var``), so PDE residuals built from input
derivatives can be differentiated with respect to the parameters.

Jet channels hold one leading axis per seeded input direction:
``primal`` has shape ``(N, w)`` and ``dual1``/``dual2`` shape ``(K, N, w)``.
``dual2 is None`` stands for an identically zero channel.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from dcgd import _kernels

# Set to False to force the pure-numpy activation rule (used by the tests).
USE_KERNELS = True


class TapeError(RuntimeError):
    pass


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tape:
    """Append-only record of one evaluation."""

    def __init__(self):
        self.nodes: list[Var] = []

    def variable(self, value) -> "Var":
        """A differentiable leaf."""
        return Var(np.array(value, dtype=np.float64), self, (), None)

    def _record(self, value, parents, vjp) -> "Var":
        return Var(value, self, parents, vjp)


class Var:
    """Array-valued node on a tape."""

    __slots__ = ("value", "tape", "parents", "vjp", "index")
    __array_priority__ = 100.0

    def __init__(self, value, tape: Tape, parents, vjp):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1.0))

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _val(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _check_same_tape(*xs):
    tapes = {id(x.tape) for x in xs if isinstance(x, Var)}
    if len(tapes) > 1:
        raise TapeError("operands recorded on different tapes")


# ---------------------------------------------------------------------------
# Var-level primitives.  Each records (parents, vjp) where vjp maps the
# output cotangent to one cotangent per parent (None for constants).
# ---------------------------------------------------------------------------


def add(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.add(a, b)
    _check_same_tape(a, b)
    av, bv = _val(a), _val(b)
    out = np.add(av, bv)
    sa, sb = np.shape(av), np.shape(bv)

    def vjp(g):
        return (_unbroadcast(g, sa), _unbroadcast(g, sb))

    return _tape_of(a, b)._record(out, (a, b), vjp)


def neg(a):
    if not isinstance(a, Var):
        return np.negative(a)
    return a.tape._record(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.multiply(a, b)
    _check_same_tape(a, b)
    av, bv = _val(a), _val(b)
    out = av * bv
    sa, sb = np.shape(av), np.shape(bv)

    def vjp(g):
        ga = _unbroadcast(g * bv, sa) if isinstance(a, Var) else None
        gb = _unbroadcast(g * av, sb) if isinstance(b, Var) else None
        return (ga, gb)

    return _tape_of(a, b)._record(out, (a, b), vjp)


def matmul(a, b):
    """``a @ b`` where ``b`` is a 2-D matrix and ``a`` has shape ``(..., n)``."""
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.matmul(a, b)
    _check_same_tape(a, b)
    av, bv = _val(a), _val(b)
    if np.ndim(bv) != 2:
        raise ValueError("matmul expects a 2-D right operand")
    out = av @ bv

    def vjp(g):
        ga = g @ bv.T if isinstance(a, Var) else None
        gb = None
        if isinstance(b, Var):
            n, m = bv.shape
            gb = av.reshape(-1, n).T @ g.reshape(-1, m)
        return (ga, gb)

    return _tape_of(a, b)._record(out, (a, b), vjp)


def getitem(a, idx):
    if not isinstance(a, Var):
        return a[idx]
    shape = a.value.shape

    basic = all(isinstance(i, (int, np.integer, slice)) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def vjp(g):
        full = np.zeros(shape)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return a.tape._record(a.value[idx], (a,), vjp)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    old = a.value.shape
    return a.tape._record(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def sum(a, axis=None):  # noqa: A001 - mirrors numpy
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    shape = a.value.shape
    out = np.sum(a.value, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return a.tape._record(np.asarray(out), (a,), vjp)


def mean(a, axis=None):
    n = np.size(_val(a)) if axis is None else np.shape(_val(a))[axis]
    return sum(a, axis=axis) * (1.0 / n)


def _unary(a, fn, dfn):
    """Elementwise ``fn`` with derivative ``dfn(x, fx)``."""
    if not isinstance(a, Var):
        return fn(a)
    x = a.value
    fx = fn(x)
    return a.tape._record(fx, (a,), lambda g: (g * dfn(x, fx),))


def _np_sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tanh_var(a):
    return _unary(a, np.tanh, lambda x, fx: 1.0 - fx * fx)


def sigmoid_var(a):
    return _unary(a, _np_sigmoid, lambda x, fx: fx * (1.0 - fx))


def sin_var(a):
    return _unary(a, np.sin, lambda x, fx: np.cos(x))


def cos_var(a):
    return _unary(a, np.cos, lambda x, fx: -np.sin(x))


def exp_var(a):
    return _unary(a, np.exp, lambda x, fx: fx)


def log_var(a):
    return _unary(a, np.log, lambda x, fx: 1.0 / x)


def power_var(a, p: float):
    p = float(p)
    if p == 2.0:
        return _unary(a, np.square, lambda x, fx: 2.0 * x)
    return _unary(a, lambda x: np.power(x, p), lambda x, fx: p * np.power(x, p - 1.0))


def maximum_var(a, c: float):
    """``max(a, c)``; at a tie the derivative follows ``a``."""
    return _unary(a, lambda x: np.maximum(x, c), lambda x, fx: (x >= c).astype(np.float64))


def minimum_var(a, c: float):
    """``min(a, c)``; at a tie the derivative follows ``a``."""
    return _unary(a, lambda x: np.minimum(x, c), lambda x, fx: (x <= c).astype(np.float64))


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


def concat0(parts):
    """Concatenate along axis 0; taped when any part is a ``Var``."""
    if not any(isinstance(p, Var) for p in parts):
        return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=0)
    _check_same_tape(*parts)
    vals = [_val(p) for p in parts]
    sizes = np.cumsum([v.shape[0] for v in vals])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=0))

    return _tape_of(*parts)._record(np.concatenate(vals, axis=0), tuple(parts), vjp)


class TapeValue:
    """Second-order forward jet whose channels may live on a tape.

    ``coords[k]`` is the input coordinate seeded in direction ``k``.  A jet
    may also be stored packed as one array of shape ``(1 + K [+ K], ...)``
    holding primal, first and (optionally) second channels; the individual
    channels are then taped slices of that array, created on demand.
    """

    __slots__ = ("_primal", "_dual1", "_dual2", "coords", "_packed", "_has2")

    def __init__(self, primal, dual1, dual2, coords: tuple):
        self._primal = primal
        self._dual1 = dual1
        self._dual2 = dual2
        self.coords = tuple(coords)
        self._packed = None
        self._has2 = dual2 is not None

    @classmethod
    def from_packed(cls, packed, coords, has2: bool) -> "TapeValue":
        jet = cls(None, None, None, coords)
        jet._packed = packed
        jet._has2 = has2
        return jet

    @property
    def n_dirs(self) -> int:
        return len(self.coords)

    @property
    def primal(self):
        if self._primal is None:
            self._primal = getitem(self._packed, 0)
        return self._primal

    @property
    def dual1(self):
        if self._dual1 is None and self._packed is not None and self.n_dirs:
            self._dual1 = getitem(self._packed, slice(1, 1 + self.n_dirs))
        return self._dual1

    @property
    def dual2(self):
        if self._dual2 is None and self._packed is not None and self._has2:
            k = self.n_dirs
            self._dual2 = getitem(self._packed, slice(1 + k, 1 + 2 * k))
        return self._dual2

    def pack(self):
        """Return ``(packed_array, has_second_channel)``."""
        if self._packed is None:
            shape = np.shape(_val(self.primal))
            parts = [reshape(self.primal, (1,) + shape)]
            k = self.n_dirs
            if k:
                d1 = self.dual1
                parts.append(d1 if d1 is not None else np.zeros((k,) + shape))
            if self._has2:
                parts.append(self.dual2)
            self._packed = concat0(parts)
        return self._packed, self._has2

    @property
    def node_id(self):
        """Tape index of the primal channel, or None for untaped values."""
        p = self.primal
        return p.index if isinstance(p, Var) else None

    def _lift(self, other):
        if isinstance(other, TapeValue):
            if other.coords != self.coords:
                raise ValueError("jets seeded along different directions")
            return other
        return TapeValue(other, None, None, self.coords)

    def __add__(self, other):
        o = self._lift(other)
        return TapeValue(self.primal + o.primal, _add_opt(self.dual1, o.dual1),
                         _add_opt(self.dual2, o.dual2), self.coords)

    __radd__ = __add__

    def __neg__(self):
        return TapeValue(-self.primal, _neg_opt(self.dual1), _neg_opt(self.dual2), self.coords)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        o = self._lift(other)
        a0, a1, a2 = self.primal, self.dual1, self.dual2
        b0, b1, b2 = o.primal, o.dual1, o.dual2
        d1 = _add_opt(_mul_opt(a1, b0), _mul_opt(a0, b1))
        d2 = _add_opt(_add_opt(_mul_opt(a2, b0), _mul_opt(a0, b2)),
                      _mul_opt(_mul_opt(a1, b1), 2.0))
        return TapeValue(a0 * b0, d1, d2, self.coords)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (TapeValue, Var)):
            return self * power(other, -1.0)
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, w):
        return jet_affine(self, w, None)

    def __getitem__(self, idx):
        """Index the trailing (feature) axes of every channel."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        didx = (slice(None),) + idx
        return TapeValue(getitem(self.primal, idx),
                         None if self.dual1 is None else getitem(self.dual1, didx),
                         None if self.dual2 is None else getitem(self.dual2, didx),
                         self.coords)


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


def _neg_opt(a):
    return None if a is None else neg(a)


def _mul_opt(a, b):
    if a is None or b is None:
        return None
    return mul(a, b)


def _jet_unary(x: TapeValue, f, fp, fpp) -> TapeValue:
    """Chain rule for an elementwise map given its value and first two derivatives.

    ``dual1 -> fp * dual1`` and ``dual2 -> fpp * dual1**2 + fp * dual2``.
    """
    d1 = _mul_opt(fp, x.dual1)
    d2 = _add_opt(_mul_opt(fpp, _mul_opt(x.dual1, x.dual1)), _mul_opt(fp, x.dual2))
    return TapeValue(f, d1, d2, x.coords)


def jet_affine(x: TapeValue, w, b) -> TapeValue:
    """``x @ w + b`` on all channels at once; the bias only touches the primal."""
    packed, has2 = x.pack()
    if not any(isinstance(v, Var) for v in (packed, w, b)):
        out = np.matmul(packed, w)
        if b is not None:
            out[0] += b
        return TapeValue.from_packed(out, x.coords, has2)
    _check_same_tape(packed, w, b)
    sv, wv = _val(packed), _val(w)
    out = sv @ wv
    if b is not None:
        out[0] += _val(b)
    n, m = wv.shape

    def vjp(g):
        gs = g @ wv.T if isinstance(packed, Var) else None
        gw = sv.reshape(-1, n).T @ g.reshape(-1, m) if isinstance(w, Var) else None
        gb = g[0].reshape(-1, m).sum(axis=0) if isinstance(b, Var) else None
        return (gs, gw, gb)

    node = _tape_of(packed, w, b)._record(out, (packed, w, b), vjp)
    return TapeValue.from_packed(node, x.coords, has2)


def _tanh_derivs(z):
    f = np.tanh(z)
    s = 1.0 - f * f
    c = -2.0 * f * s
    t = -2.0 * s * (1.0 - 3.0 * f * f)
    return f, s, c, t


def _swish_derivs(z):
    sg = _np_sigmoid(z)
    d = sg * (1.0 - sg)
    q = 1.0 - 2.0 * sg
    f = z * sg
    s = sg + z * d
    c = d * (2.0 + z * q)
    t = d * (q * (3.0 + z * q) - 2.0 * z * d)
    return f, s, c, t


def jet_activation(x: TapeValue, derivs, kernel: int | None = None) -> TapeValue:
    """Fused elementwise map on a packed jet.

    ``derivs(z)`` returns the value and first three derivatives at the primal;
    the third one only enters the parameter-space backward pass.  When
    ``kernel`` names a compiled kernel the same rule runs in one pass.
    """
    packed, has2 = x.pack()
    k = x.n_dirs
    sv = _val(packed)
    if kernel is not None and k > 0 and _kernels.AVAILABLE and USE_KERNELS:
        return _jet_activation_compiled(x, packed, sv, k, has2, kernel)
    z = sv[0]
    f, s, c, t = derivs(z)
    z1 = sv[1:1 + k]
    z2 = sv[1 + k:] if has2 else None
    if k == 0:
        out = f[None]
    else:
        a2 = c * z1 * z1
        if z2 is not None:
            a2 = a2 + s * z2
        out = np.concatenate([f[None], s * z1, a2], axis=0)
    if not isinstance(packed, Var):
        return TapeValue.from_packed(out, x.coords, k > 0)

    def vjp(g):
        g0 = g[0]
        if k == 0:
            return ((g0 * s)[None],)
        g1 = g[1:1 + k]
        g2 = g[1 + k:]
        w2 = t * z1 * z1
        if z2 is not None:
            w2 = w2 + c * z2
        gz = g0 * s + (g1 * z1).sum(axis=0) * c + (g2 * w2).sum(axis=0)
        gz1 = g1 * s + 2.0 * c * (g2 * z1)
        parts = [gz[None], gz1]
        if z2 is not None:
            parts.append(g2 * s)
        return (np.concatenate(parts, axis=0),)

    node = packed.tape._record(out, (packed,), vjp)
    return TapeValue.from_packed(node, x.coords, k > 0)


def _jet_activation_compiled(x, packed, sv, k, has2, kernel):
    base = _kernels.base_values(kernel, sv[0])
    out = _kernels.activation_forward(kernel, sv, base, k, has2)
    if not isinstance(packed, Var):
        return TapeValue.from_packed(out, x.coords, True)

    def vjp(g):
        return (_kernels.activation_backward(kernel, sv, base, k, has2, g),)

    node = packed.tape._record(out, (packed,), vjp)
    return TapeValue.from_packed(node, x.coords, True)


def seed_inputs(x, coords: Sequence[int]) -> TapeValue:
    """Jet of the input points with unit tangents along ``coords``.

    ``x`` has shape ``(N, d)``; direction ``k`` differentiates along input
    coordinate ``coords[k]``.  Second tangents start at zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("inputs must be a 2-D array (points, coordinates)")
    n, d = x.shape
    coords = tuple(int(c) for c in coords)
    for c in coords:
        if not 0 <= c < d:
            raise IndexError(f"input coordinate {c} out of range for dimension {d}")
    dual1 = np.zeros((len(coords), n, d))
    for k, c in enumerate(coords):
        dual1[k, :, c] = 1.0
    return TapeValue(x, dual1, None, coords)


def input_derivatives(value: TapeValue, input_coord: int):
    """First and second derivative of ``value`` along a seeded input coordinate."""
    if input_coord not in value.coords:
        raise IndexError(f"input coordinate {input_coord} was not seeded")
    k = value.coords.index(input_coord)
    d1, d2 = value.dual1, value.dual2
    first = getitem(d1, k) if d1 is not None else _zeros_like(value.primal)
    second = getitem(d2, k) if d2 is not None else _zeros_like(value.primal)
    return first, second


def _zeros_like(p):
    return np.zeros(np.shape(_val(p)))


# ---------------------------------------------------------------------------
# Dispatching elementwise functions: ndarray -> ndarray, Var -> Var,
# TapeValue -> TapeValue.
# ---------------------------------------------------------------------------


def tanh(x):
    if isinstance(x, TapeValue):
        return jet_activation(x, _tanh_derivs, _kernels.TANH)
    return tanh_var(x)


def sigmoid(x):
    if isinstance(x, TapeValue):
        sg = sigmoid_var(x.primal)
        fp = sg * (1.0 - sg)
        return _jet_unary(x, sg, fp, fp * (1.0 - 2.0 * sg))
    return sigmoid_var(x)


def swish(x):
    """``x * sigmoid(x)``."""
    if isinstance(x, TapeValue):
        return jet_activation(x, _swish_derivs, _kernels.SWISH)
    return x * sigmoid_var(x)


def sin(x):
    if isinstance(x, TapeValue):
        sx = sin_var(x.primal)
        return _jet_unary(x, sx, cos_var(x.primal), -sx)
    return sin_var(x)


def cos(x):
    if isinstance(x, TapeValue):
        cx = cos_var(x.primal)
        return _jet_unary(x, cx, -sin_var(x.primal), -cx)
    return cos_var(x)


def exp(x):
    if isinstance(x, TapeValue):
        e = exp_var(x.primal)
        return _jet_unary(x, e, e, e)
    return exp_var(x)


def log(x):
    if isinstance(x, TapeValue):
        inv = power_var(x.primal, -1.0)
        return _jet_unary(x, log_var(x.primal), inv, -(inv * inv))
    return log_var(x)


def power(x, p: float):
    p = float(p)
    if isinstance(x, TapeValue):
        z = x.primal
        if p == 2.0:
            return _jet_unary(x, power_var(z, 2.0), 2.0 * z, np.float64(2.0))
        if p == 3.0:
            z2 = power_var(z, 2.0)
            return _jet_unary(x, z2 * z, 3.0 * z2, 6.0 * z)
        f = power_var(z, p)
        fp = p * power_var(z, p - 1.0)
        fpp = (p * (p - 1.0)) * power_var(z, p - 2.0)
        return _jet_unary(x, f, fp, fpp)
    return power_var(x, p)


def maximum(x, c: float):
    """``max(x, c)``; ties differentiate through ``x``."""
    if isinstance(x, TapeValue):
        f = maximum_var(x.primal, c)
        mask = (np.asarray(_val(x.primal)) >= c).astype(np.float64)
        return _jet_unary(x, f, mask, None)
    return maximum_var(x, c)


def minimum(x, c: float):
    """Clamp from above at ``c``; ties differentiate through ``x``."""
    if isinstance(x, TapeValue):
        f = minimum_var(x.primal, c)
        mask = (np.asarray(_val(x.primal)) <= c).astype(np.float64)
        return _jet_unary(x, f, mask, None)
    return minimum_var(x, c)


# ---------------------------------------------------------------------------
# Backward sweep
# ---------------------------------------------------------------------------


def backward(output: Var, params: Var) -> np.ndarray:
    """Gradient of a scalar taped output with respect to the leaf ``params``.

    The result has the shape of ``params.value``.  An output that does not
    depend on ``params`` has a zero gradient.
    """
    if not isinstance(output, Var):
        raise TapeError("output is not a taped value")
    if not isinstance(params, Var) or params.tape is not output.tape:
        raise TapeError("parameters and output belong to different tapes")
    if output.value.size != 1:
        raise TapeError("backward needs a scalar output")
    nodes = output.tape.nodes
    if nodes[output.index] is not output:
        raise TapeError("output not found on its tape")
    grads: dict[int, np.ndarray] = {output.index: np.ones_like(output.value)}
    for i in range(output.index, params.index - 1, -1):
        g = grads.pop(i, None)
        if g is None:
            continue
        node = nodes[i]
        if node is params:
            return np.array(g, dtype=np.float64).reshape(params.value.shape)
        if node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not isinstance(parent, Var):
                continue
            j = parent.index
            if j in grads:
                grads[j] = grads[j] + pg
            else:
                grads[j] = pg
    return np.zeros_like(params.value)


def grad_of_input_derivative(residual_scalar: Var, params: Var) -> np.ndarray:
    """Parameter gradient of a scalar built from jet channels.

    Jet channels are ordinary taped values, so this is the same reverse sweep
    as :func:`backward`; it exists to name the use.
    """
    return backward(residual_scalar, params)


def value_and_grad(fn: Callable[[Var], Var], x) -> tuple[float, np.ndarray]:
    """Evaluate ``fn`` on a fresh tape and return (value, gradient)."""
    tape = Tape()
    leaf = tape.variable(x)
    out = fn(leaf)
    return float(out.value), backward(out, leaf)

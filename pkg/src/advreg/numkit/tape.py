"""Define-by-run reverse-mode differentiation over numpy arrays.

Every operation below accepts plain ``np.ndarray`` values or :class:`Var`
handles.  With arrays only, the plain numpy result is returned and nothing is
recorded.  As soon as one argument is a ``Var``, the result is recorded on that
variable's :class:`Tape`.

The vector-Jacobian products are written with these same polymorphic
operations.  A backward pass run on raw arrays is therefore a fast numpy
computation, while the same pass run on ``Var`` adjoints records new nodes,
which is what makes the gradient itself differentiable (double backprop).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from ..errors import CapabilityError, ContractError, DimensionError
from . import _kernels as K


class Tape:
    """Append-only record of the operations of one forward pass."""

    def __init__(self):
        self.nodes: list[Var] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, requires_grad: bool = True, name: str | None = None) -> "Var":
        value = np.asarray(value, dtype=np.float64)
        return Var(self, value, requires_grad=requires_grad, name=name)

    def constant(self, value, name: str | None = None) -> "Var":
        return self.leaf(value, requires_grad=False, name=name)

    @property
    def roots(self) -> list[int]:
        return [v.id for v in self.nodes if v.op is None]

    def backward(self, output: "Var") -> dict[int, np.ndarray]:
        """Gradients of a scalar ``output`` for every leaf that requires them.

        Returns a mapping from leaf node id to gradient array.  Leaves with no
        path to ``output`` get zeros.
        """
        found = _reverse(output, create_graph=False)
        grads = {}
        for node in self.nodes[: output.id + 1]:
            if node.op is None and node.requires_grad:
                g = found.get(node.id)
                grads[node.id] = np.zeros_like(node.value) if g is None else np.asarray(g)
        return grads


class Var:
    """A node of a :class:`Tape`: its value, producing op and inputs."""

    __slots__ = ("tape", "id", "op", "inputs", "needs", "value", "requires_grad", "name")
    # numpy must defer to our reflected operators instead of broadcasting over us
    __array_ufunc__ = None

    def __init__(self, tape, value, op=None, inputs=(), needs=(), requires_grad=False, name=None):
        self.tape = tape
        self.value = value
        self.op = op
        self.inputs = inputs
        self.needs = needs
        self.requires_grad = requires_grad
        self.name = name
        self.id = len(tape.nodes)
        tape.nodes.append(self)

    def __repr__(self):
        tag = self.op.tag if self.op is not None else "leaf"
        return f"Var(id={self.id}, op={tag}, shape={self.shape})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _value(x):
    return x.value if isinstance(x, Var) else x


def _apply(op: "Op", *args):
    tape = None
    for a in args:
        if isinstance(a, Var):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ContractError("operands belong to different tapes")
    if tape is None:
        return op.forward(*args)
    inputs = tuple(a if isinstance(a, Var) else np.asarray(a, dtype=np.float64) for a in args)
    out = op.forward(*(_value(a) for a in inputs))
    needs = tuple(isinstance(a, Var) and a.requires_grad for a in inputs)
    return Var(tape, out, op=op, inputs=inputs, needs=needs, requires_grad=any(needs))


def _reverse(output: Var, create_graph: bool, sources: Sequence[Var] = ()) -> dict:
    """Propagate adjoints from ``output`` back through its tape.

    Returns adjoints for leaves, plus for every node in ``sources``.  When
    ``sources`` is given, propagation is pruned to nodes that depend on them.
    """
    if not isinstance(output, Var):
        raise ContractError("output must be a tape variable")
    if output.value.size != 1:
        raise ContractError(f"output must be scalar, got shape {output.shape}")
    tape = output.tape
    nodes = tape.nodes[: output.id + 1]

    relevant = None
    if sources:
        relevant = {s.id for s in sources}
        for node in nodes[min(relevant):]:
            if any(isinstance(i, Var) and i.id in relevant for i in node.inputs):
                relevant.add(node.id)
    capture = {s.id for s in sources}

    seed = np.ones_like(output.value)
    adj = {output.id: tape.constant(seed) if create_graph else seed}
    found = {}
    for node in reversed(nodes):
        g = adj.pop(node.id, None)
        if g is None:
            continue
        if node.op is None or node.id in capture:
            found[node.id] = g
            if node.op is None:
                continue
        needs = node.needs
        if relevant is not None:
            needs = tuple(n and i.id in relevant for n, i in zip(needs, node.inputs))
        if not any(needs):
            continue
        if create_graph:
            if not node.op.twice_differentiable:
                raise CapabilityError(f"op {node.op.tag!r} does not support differentiable gradients")
            grads = node.op.vjp(g, node, node.inputs, needs)
        else:
            grads = node.op.vjp(g, node.value, [_value(i) for i in node.inputs], needs)
        for inp, need, gi in zip(node.inputs, needs, grads):
            if need and gi is not None:
                prev = adj.get(inp.id)
                adj[inp.id] = gi if prev is None else add(prev, gi)
    return found


def grad(output: Var, wrt: Iterable[Var]) -> list[np.ndarray]:
    """Plain-array gradients of a scalar ``output`` w.r.t. each of ``wrt``."""
    wrt = list(wrt)
    found = _reverse(output, create_graph=False, sources=wrt)
    return [np.zeros_like(w.value) if w.id not in found else np.asarray(found[w.id]) for w in wrt]


def input_gradient(output: Var, inp: Var) -> Var:
    """Gradient of ``output`` w.r.t. ``inp``, recorded as tape nodes.

    The returned variable can enter further computation, and a later backward
    pass differentiates through it.
    """
    found = _reverse(output, create_graph=True, sources=[inp])
    g = found.get(inp.id)
    if g is None:
        return output.tape.constant(np.zeros_like(inp.value))
    if not isinstance(g, Var):
        g = output.tape.constant(g)
    return g


# ---------------------------------------------------------------------------
# operations


class Op:
    """Base class of tape operations.

    ``forward`` maps input arrays to an output array.  ``vjp`` returns one
    adjoint per input (``None`` where ``needs`` is false).  Ops whose ``vjp``
    cannot itself be recorded set ``twice_differentiable = False``; reaching
    one during :func:`input_gradient` raises :class:`CapabilityError`.
    """

    tag = "op"
    twice_differentiable = True

    def forward(self, *args):
        raise NotImplementedError

    def vjp(self, g, out, inputs, needs):
        raise NotImplementedError


def _sum_to_array(x, shape):
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, n in enumerate(shape) if n == 1 and x.shape[i + lead] != 1
    )
    return x.sum(axis=axes, keepdims=True).reshape(shape)


class _Add(Op):
    tag = "add"

    def forward(self, a, b):
        self.shapes = (np.shape(a), np.shape(b))
        return np.add(a, b)

    def vjp(self, g, out, inputs, needs):
        return [sum_to(g, s) if n else None for s, n in zip(self.shapes, needs)]


class _Sub(Op):
    tag = "sub"

    def forward(self, a, b):
        self.shapes = (np.shape(a), np.shape(b))
        return np.subtract(a, b)

    def vjp(self, g, out, inputs, needs):
        ga = sum_to(g, self.shapes[0]) if needs[0] else None
        gb = neg(sum_to(g, self.shapes[1])) if needs[1] else None
        return [ga, gb]


class _Mul(Op):
    tag = "mul"

    def forward(self, a, b):
        self.shapes = (np.shape(a), np.shape(b))
        return np.multiply(a, b)

    def vjp(self, g, out, inputs, needs):
        a, b = inputs
        ga = sum_to(mul(g, b), self.shapes[0]) if needs[0] else None
        gb = sum_to(mul(g, a), self.shapes[1]) if needs[1] else None
        return [ga, gb]


class _Div(Op):
    tag = "div"

    def forward(self, a, b):
        self.shapes = (np.shape(a), np.shape(b))
        return np.divide(a, b)

    def vjp(self, g, out, inputs, needs):
        _, b = inputs
        ga = sum_to(div(g, b), self.shapes[0]) if needs[0] else None
        gb = sum_to(neg(mul(g, div(out, b))), self.shapes[1]) if needs[1] else None
        return [ga, gb]


class _Neg(Op):
    tag = "neg"

    def forward(self, a):
        return np.negative(a)

    def vjp(self, g, out, inputs, needs):
        return [neg(g)]


class _MatMul(Op):
    tag = "matmul"

    def forward(self, a, b):
        if a.ndim == 2 and b.ndim == 2 and a.shape[1] == 1:
            # outer product: every entry is a single product, same values as BLAS
            return np.multiply(a, b)
        return a @ b

    def vjp(self, g, out, inputs, needs):
        a, b = inputs
        ga = matmul(g, transpose(b)) if needs[0] else None
        gb = matmul(transpose(a), g) if needs[1] else None
        return [ga, gb]


class _Affine(Op):
    tag = "affine"

    def forward(self, x, w, b):
        out = x @ w
        out += b
        return out

    def vjp(self, g, out, inputs, needs):
        x, w, _ = inputs
        gx = matmul(g, transpose(w)) if needs[0] else None
        gw = matmul(transpose(x), g) if needs[1] else None
        gb = sum_(g, axis=0) if needs[2] else None
        return [gx, gw, gb]


class _Transpose(Op):
    tag = "transpose"

    def forward(self, a):
        return np.transpose(a)

    def vjp(self, g, out, inputs, needs):
        return [transpose(g)]


class _Reshape(Op):
    tag = "reshape"

    def __init__(self, shape):
        self.shape = shape

    def forward(self, a):
        self.in_shape = np.shape(a)
        return np.reshape(a, self.shape)

    def vjp(self, g, out, inputs, needs):
        return [reshape(g, self.in_shape)]


class _Sum(Op):
    tag = "sum"

    def __init__(self, axis, keepdims):
        self.axis = axis
        self.keepdims = keepdims

    def forward(self, a):
        self.in_shape = np.shape(a)
        return np.sum(a, axis=self.axis, keepdims=self.keepdims)

    def vjp(self, g, out, inputs, needs):
        if not self.keepdims:
            axes = range(len(self.in_shape)) if self.axis is None else np.atleast_1d(self.axis)
            kept = list(self.in_shape)
            for ax in axes:
                kept[ax] = 1
            g = reshape(g, tuple(kept))
        return [broadcast_to(g, self.in_shape)]


class _SumTo(Op):
    tag = "sum_to"

    def __init__(self, shape):
        self.shape = shape

    def forward(self, a):
        self.in_shape = np.shape(a)
        return _sum_to_array(a, self.shape)

    def vjp(self, g, out, inputs, needs):
        return [broadcast_to(g, self.in_shape)]


class _BroadcastTo(Op):
    tag = "broadcast_to"

    def __init__(self, shape):
        self.shape = shape

    def forward(self, a):
        self.in_shape = np.shape(a)
        return np.array(np.broadcast_to(a, self.shape))

    def vjp(self, g, out, inputs, needs):
        return [sum_to(g, self.in_shape)]


class _Exp(Op):
    tag = "exp"

    def forward(self, a):
        return np.exp(a)

    def vjp(self, g, out, inputs, needs):
        return [mul(g, out)]


class _Log(Op):
    tag = "log"

    def forward(self, a):
        return np.log(a)

    def vjp(self, g, out, inputs, needs):
        return [div(g, inputs[0])]


class _Sqrt(Op):
    tag = "sqrt"

    def forward(self, a):
        out = np.sqrt(a)
        # derivative taken as 0 where the value is exactly 0
        self.zero = (out == 0).astype(np.float64)
        return out

    def vjp(self, g, out, inputs, needs):
        safe = add(mul(out, 2.0), self.zero)
        return [mul(div(g, safe), 1.0 - self.zero)]


class _Power(Op):
    tag = "power"

    def __init__(self, p):
        self.p = float(p)

    def forward(self, a):
        return np.power(a, self.p)

    def vjp(self, g, out, inputs, needs):
        if self.p == 1.0:
            return [g]
        return [mul(g, mul(power(inputs[0], self.p - 1.0), self.p))]


class _Sigmoid(Op):
    tag = "sigmoid"

    def forward(self, a):
        return expit(a)

    def vjp(self, g, out, inputs, needs):
        return [mul(g, mul(out, sub(1.0, out)))]


class _LogSigmoid(Op):
    tag = "log_sigmoid"

    def forward(self, a):
        return -np.logaddexp(0.0, -a)

    def vjp(self, g, out, inputs, needs):
        return [mul(g, sigmoid(neg(inputs[0])))]


class _Relu(Op):
    tag = "relu"

    def forward(self, a):
        return np.maximum(a, 0.0)

    def vjp(self, g, out, inputs, needs):
        a = _value(inputs[0])
        if isinstance(g, Var):
            return [mul(g, (a > 0).astype(np.float64))]
        return [K.relu_backward(K.contiguous(g), K.contiguous(a))]


class _LeakyRelu(Op):
    tag = "leaky_relu"

    def __init__(self, alpha):
        self.alpha = alpha

    def forward(self, a):
        return K.leaky_forward(K.contiguous(a), self.alpha)

    def vjp(self, g, out, inputs, needs):
        a = _value(inputs[0])
        if isinstance(g, Var):
            # second derivative is taken as 0 everywhere: the slope is a constant mask
            return [mul(g, np.where(a > 0, 1.0, self.alpha))]
        return [K.leaky_backward(K.contiguous(g), K.contiguous(a), self.alpha)]


class _Softmax(Op):
    tag = "softmax"

    def forward(self, a):
        e = np.exp(a - a.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)

    def vjp(self, g, out, inputs, needs):
        inner = sum_(mul(g, out), axis=-1, keepdims=True)
        return [mul(out, sub(g, inner))]


class _Clip(Op):
    tag = "clip"

    def __init__(self, lo, hi):
        self.lo = lo
        self.hi = hi

    def forward(self, a):
        self.mask = ((a >= self.lo) & (a <= self.hi)).astype(np.float64)
        return np.clip(a, self.lo, self.hi)

    def vjp(self, g, out, inputs, needs):
        return [mul(g, self.mask)]


class _Index(Op):
    tag = "index"

    def __init__(self, key):
        self.key = key

    def forward(self, a):
        self.in_shape = np.shape(a)
        return np.array(a[self.key])

    def vjp(self, g, out, inputs, needs):
        return [scatter(g, self.key, self.in_shape)]


class _Scatter(Op):
    tag = "scatter"

    def __init__(self, key, shape):
        self.key = key
        self.shape = shape

    def forward(self, a):
        out = np.zeros(self.shape)
        out[self.key] = a
        return out

    def vjp(self, g, out, inputs, needs):
        return [index(g, self.key)]


class _Concat(Op):
    tag = "concat"

    def __init__(self, axis):
        self.axis = axis

    def forward(self, *parts):
        self.bounds = np.cumsum([0] + [np.shape(p)[self.axis] for p in parts])
        return np.concatenate(parts, axis=self.axis)

    def vjp(self, g, out, inputs, needs):
        grads = []
        for k, need in enumerate(needs):
            if not need:
                grads.append(None)
                continue
            key = [slice(None)] * np.ndim(_value(g))
            key[self.axis] = slice(int(self.bounds[k]), int(self.bounds[k + 1]))
            grads.append(index(g, tuple(key)))
        return grads


# public polymorphic functions


def apply(op: Op, *args):
    """Run a (possibly user-defined) :class:`Op`, recording it when any input is a ``Var``."""
    return _apply(op, *args)


def add(a, b):
    return _apply(_Add(), a, b)


def sub(a, b):
    return _apply(_Sub(), a, b)


def mul(a, b):
    return _apply(_Mul(), a, b)


def div(a, b):
    return _apply(_Div(), a, b)


def neg(a):
    return _apply(_Neg(), a)


def matmul(a, b):
    if np.ndim(_value(a)) != 2 or np.ndim(_value(b)) != 2:
        raise DimensionError("matmul needs two 2-D operands")
    if np.shape(_value(a))[1] != np.shape(_value(b))[0]:
        raise DimensionError(f"matmul shapes {np.shape(_value(a))} and {np.shape(_value(b))} do not conform")
    return _apply(_MatMul(), a, b)


def affine(x, w, b):
    """``x @ w + b`` as a single node."""
    return _apply(_Affine(), x, w, b)


def transpose(a):
    return _apply(_Transpose(), a)


def reshape(a, shape):
    return _apply(_Reshape(tuple(shape)), a)


def sum_(a, axis=None, keepdims=False):
    return _apply(_Sum(axis, keepdims), a)


def mean(a, axis=None, keepdims=False):
    shape = np.shape(_value(a))
    if axis is None:
        count = int(np.prod(shape))
    else:
        count = int(np.prod([shape[ax] for ax in np.atleast_1d(axis)]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def sum_to(a, shape):
    shape = tuple(shape)
    if np.shape(_value(a)) == shape:
        return a
    return _apply(_SumTo(shape), a)


def broadcast_to(a, shape):
    shape = tuple(shape)
    if np.shape(_value(a)) == shape:
        return a
    return _apply(_BroadcastTo(shape), a)


def exp(a):
    return _apply(_Exp(), a)


def log(a):
    return _apply(_Log(), a)


def sqrt(a):
    return _apply(_Sqrt(), a)


def power(a, p):
    return _apply(_Power(p), a)


def sigmoid(a):
    return _apply(_Sigmoid(), a)


def log_sigmoid(a):
    """``ln(sigmoid(a))`` without overflow."""
    return _apply(_LogSigmoid(), a)


def relu(a):
    return _apply(_Relu(), a)


def leaky_relu(a, alpha):
    return _apply(_LeakyRelu(alpha), a)


def softmax(a):
    return _apply(_Softmax(), a)


def clip(a, lo, hi):
    return _apply(_Clip(lo, hi), a)


def index(a, key):
    return _apply(_Index(key), a)


def scatter(a, key, shape):
    return _apply(_Scatter(key, tuple(shape)), a)


def concat(parts, axis=1):
    return _apply(_Concat(axis), *parts)

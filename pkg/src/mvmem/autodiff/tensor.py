"""Dense float64 tensors with a define-by-run gradient tape.

Every op records its parents and a closure mapping the output gradient to
parent gradients. ``backward`` walks the recorded graph in reverse
topological order and accumulates into the ``grad`` slot of leaf tensors
that require gradients (the entries of a ``ParamStore``).

There is no general broadcasting: elementwise ops demand equal shapes and
the few row-wise broadcasts the models need (bias add, centroid subtract)
are explicit ops.
"""

from __future__ import annotations

import contextlib

import numpy as np

from mvmem.errors import DegenerateVector, IndexOutOfRange, NonScalarOutput, ShapeMismatch

_grad_enabled = True
_watch = None  # set by watch_kinks(): distances to each op's non-smooth or ill-conditioned point


@contextlib.contextmanager
def no_grad():
    """Evaluate ops without recording them on the tape."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def watch_kinks():
    """Record how close evaluated ops sit to their trouble spots.

    Yields a dict with "kink" (smallest |input| per ReLU/abs call, smallest
    norm per row_norm call) and
    "spread" (smallest row standard deviation per layer_norm call, where
    zero spread makes the normalisation singular up to eps).
    """
    global _watch
    prev = _watch
    _watch = {"kink": [], "spread": []}
    try:
        yield _watch
    finally:
        _watch = prev


def _note(kind, values):
    if _watch is not None and values.size:
        _watch[kind].append(float(values.min()))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise NonScalarOutput(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __float__(self):
        return self.item()

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, data={self.data!r})"

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return add_scalar(scale(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor / tensor is not supported; use mul and explicit reciprocals")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- elementwise ---------------------------------------------------------------------------


def add(a, b):
    _same_shape("add", a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    _same_shape("sub", a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    _same_shape("mul", a, b)
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a, c):
    return _result(a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a, c):
    return _result(a.data + c, (a,), lambda g: (g,))


def square(a):
    return _result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def relu(a):
    _note("kink", np.abs(a.data))
    mask = a.data > 0.0  # derivative at exactly 0 is 0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def abs_(a):
    _note("kink", np.abs(a.data))
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def exp(a):
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


# -- reductions ---------------------------------------------------------------------------


def sum_(a, axis=None):
    if axis is None:
        return _result(np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))

    def back(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _result(np.sum(a.data, axis=axis), (a,), back)


def mean(a, axis=None):
    n = a.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis), 1.0 / n)


# -- linear algebra -----------------------------------------------------------------------


def matmul(a, b):
    """Matrix product of ``a`` [m, k] and ``b`` [k, n]."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeMismatch(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return _result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def add_row(a, row):
    """Add vector ``row`` [n] to every row of ``a`` [m, n]."""
    if a.data.ndim != 2 or row.data.ndim != 1 or a.shape[1] != row.shape[0]:
        raise ShapeMismatch(f"add_row: {a.shape} and {row.shape}")
    return _result(a.data + row.data, (a, row), lambda g: (g, g.sum(axis=0)))


def sub_row(a, row):
    if a.data.ndim != 2 or row.data.ndim != 1 or a.shape[1] != row.shape[0]:
        raise ShapeMismatch(f"sub_row: {a.shape} and {row.shape}")
    return _result(a.data - row.data, (a, row), lambda g: (g, -g.sum(axis=0)))


def reshape(a, shape):
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=-1):
    tensors = tuple(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def slice_rows(a, start, stop):
    """Rows ``start:stop`` of a 2-D tensor."""

    def back(g):
        out = np.zeros_like(a.data)
        out[start:stop] = g
        return (out,)

    return _result(a.data[start:stop], (a,), back)


def pick(a, index):
    """Select ``a[i, index[i]]`` for every row; returns [m]."""
    index = np.asarray(index, dtype=np.int64)
    if a.data.ndim != 2 or index.shape != (a.shape[0],):
        raise ShapeMismatch(f"pick: {a.shape} with index shape {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= a.shape[1]):
        raise IndexOutOfRange(f"pick: index outside [0, {a.shape[1]})")
    rows = np.arange(a.shape[0])

    def back(g):
        out = np.zeros_like(a.data)
        out[rows, index] = g
        return (out,)

    return _result(a.data[rows, index], (a,), back)


# -- fused row-wise ops -------------------------------------------------------------------


def layer_norm(a, eps=1e-5):
    """Normalise along the last axis: (v - mean) / sqrt(var + eps). No affine terms."""
    d = a.shape[-1]
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    _note("spread", np.sqrt(var))
    inv = 1.0 / np.sqrt(var + eps)
    out = centered * inv

    def back(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * out).sum(axis=-1, keepdims=True) / d
        return (inv * (g - gm - out * gy),)

    return _result(out, (a,), back)


def row_norm(a):
    """Euclidean norm along the last axis. Subgradient 0 at the origin."""
    n = np.sqrt((a.data * a.data).sum(axis=-1))
    _note("kink", n)

    def back(g):
        safe = np.where(n > 0.0, n, 1.0)
        unit = np.where((n > 0.0)[..., None], a.data / safe[..., None], 0.0)
        return (np.expand_dims(g, -1) * unit,)

    return _result(n, (a,), back)


def row_cosine(a, b, tol=1e-12):
    """Row-wise cosine similarity; rows where either norm < ``tol`` give 0 with zero gradient."""
    _same_shape("row_cosine", a, b)
    na = np.sqrt((a.data * a.data).sum(axis=-1))
    nb = np.sqrt((b.data * b.data).sum(axis=-1))
    ok = (na >= tol) & (nb >= tol)
    sa = np.where(ok, na, 1.0)
    sb = np.where(ok, nb, 1.0)
    cos = np.where(ok, (a.data * b.data).sum(axis=-1) / (sa * sb), 0.0)

    def back(g):
        g = np.where(ok, g, 0.0)[..., None]
        c = cos[..., None]
        ga = g * (b.data / (sa * sb)[..., None] - c * a.data / (sa * sa)[..., None])
        gb = g * (a.data / (sa * sb)[..., None] - c * b.data / (sb * sb)[..., None])
        return ga, gb

    return _result(cos, (a, b), back)


def log_softmax(a):
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def back(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _result(out, (a,), back)


def softmax(a):
    return exp(log_softmax(a))


# -- vector-level ops ------------------------------------------------------------------------


def cosine_similarity(a, b):
    """Cosine similarity of two vectors; raises on (near-)zero vectors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatch(f"cosine_similarity: {a.shape} and {b.shape}")
    if np.linalg.norm(a.data) < 1e-12 or np.linalg.norm(b.data) < 1e-12:
        raise DegenerateVector("cosine similarity is undefined for a zero vector")
    return row_cosine(a, b)


def softmax_cross_entropy(logits, label):
    """-log softmax(logits)[label] for a single logit vector."""
    logits = as_tensor(logits)
    if logits.data.ndim != 1:
        raise ShapeMismatch(f"softmax_cross_entropy expects a vector, got {logits.shape}")
    n = logits.shape[0]
    if not 0 <= int(label) < n:
        raise IndexOutOfRange(f"label {label} outside [0, {n})")
    row = reshape(logits, (1, n))
    return -reshape(pick(log_softmax(row), [int(label)]), ())


# -- reverse pass ------------------------------------------------------------------------


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out):
    """Accumulate d(out)/d(leaf) into the ``grad`` of every reachable leaf."""
    if out.size != 1:
        raise NonScalarOutput(f"backward needs a scalar output, got shape {out.shape}")
    if not out.requires_grad:
        return
    pending = {id(out): np.ones_like(out.data)}
    for node in reversed(_topological(out)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad += g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + pg if key in pending else pg

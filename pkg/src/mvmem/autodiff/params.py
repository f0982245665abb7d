"""Named parameter storage, Adam, and the binary checkpoint format."""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from mvmem.autodiff.tensor import Tensor
from mvmem.errors import CheckpointCorrupt

MAGIC = b"MEMCKPT1"


class ParamStore:
    """Ordered map of parameter name -> leaf Tensor with a gradient accumulator."""

    def __init__(self):
        self._params: OrderedDict[str, Tensor] = OrderedDict()

    def add(self, name, value):
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self, prefix=""):
        return [n for n in self._params if n.startswith(prefix)]

    def grads(self):
        return OrderedDict((n, t.grad) for n, t in self._params.items())

    def zero_grad(self, prefix=""):
        for name, t in self._params.items():
            if name.startswith(prefix):
                t.grad[...] = 0.0

    def state(self, prefix=""):
        """Copy of parameter values, keyed by name."""
        return OrderedDict((n, t.data.copy()) for n, t in self._params.items() if n.startswith(prefix))

    def load_state(self, state, strict=True):
        for name, value in state.items():
            if name not in self._params:
                if strict:
                    raise KeyError(f"unknown parameter {name!r}")
                continue
            target = self._params[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != target.shape:
                raise CheckpointCorrupt(f"{name}: shape {value.shape} != {target.shape}")
            target.data[...] = value
        if strict:
            missing = set(self._params) - set(state)
            if missing:
                raise CheckpointCorrupt(f"checkpoint lacks parameters: {sorted(missing)}")

    def merge(self, other):
        """Adopt every parameter of ``other`` (names must not collide)."""
        for name, t in other.items():
            if name in self._params:
                raise KeyError(f"duplicate parameter {name!r}")
            self._params[name] = t


class Adam:
    """Adam over the parameters of a store whose names start with ``prefix``."""

    def __init__(self, store, lr, prefix="", betas=(0.9, 0.999), eps=1e-8):
        self.store = store
        self.lr = lr
        self.prefix = prefix
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self._m = {n: np.zeros_like(store[n].data) for n in store.names(prefix)}
        self._v = {n: np.zeros_like(store[n].data) for n in store.names(prefix)}

    def zero_grad(self):
        self.store.zero_grad(self.prefix)

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, m in self._m.items():
            p = self.store[name]
            v = self._v[name]
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def save_checkpoint(path, state):
    """Write ``{name: array}`` in the MEMCKPT1 layout (little-endian throughout)."""
    chunks = [MAGIC, struct.pack("<I", len(state))]
    for name, value in state.items():
        value = np.array(value, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}Q", *value.shape))
        chunks.append(value.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path):
    buf = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointCorrupt(f"{path}: truncated at byte {pos}")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointCorrupt(f"{path}: bad magic")
    (count,) = struct.unpack("<I", take(4))
    state = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointCorrupt(f"{path}: undecodable parameter name") from exc
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        n = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(buf):
        raise CheckpointCorrupt(f"{path}: {len(buf) - pos} trailing bytes")
    return state

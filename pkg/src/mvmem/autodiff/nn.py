"""Dense layers registered in a ParamStore."""

from __future__ import annotations

import numpy as np

from mvmem.autodiff import tensor as T


class Linear:
    def __init__(self, store, name, n_in, n_out, rng, zero=False):
        bound = 1.0 / np.sqrt(n_in)
        if zero:
            w = np.zeros((n_in, n_out))
            b = np.zeros(n_out)
        else:
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
        self.weight = store.add(f"{name}/weight", w)
        self.bias = store.add(f"{name}/bias", b)
        self.n_in = n_in
        self.n_out = n_out

    def __call__(self, x):
        return T.add_row(T.matmul(x, self.weight), self.bias)


class MLP:
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, store, name, sizes, rng):
        self.layers = [
            Linear(store, f"{name}/l{i}", a, b, rng) for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x

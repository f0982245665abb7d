"""Central finite-difference gradient checking against the tape."""

from __future__ import annotations

import numpy as np

from mvmem.autodiff.tensor import backward, no_grad, watch_kinks


def numeric_grads(loss_fn, store, names=None, h=1e-4):
    """Central differences of ``loss_fn()`` w.r.t. every entry of the named parameters."""
    names = list(store) if names is None else list(names)
    out = {}
    with no_grad():
        for name in names:
            p = store[name].data
            g = np.zeros_like(p)
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * h)
            out[name] = g
    return out


def analytic_grads(loss_fn, store, names=None):
    names = list(store) if names is None else list(names)
    store.zero_grad()
    backward(loss_fn())
    return {n: store[n].grad.copy() for n in names}


def max_relative_error(analytic, numeric):
    """Largest entrywise |a - n|, relative to the largest gradient magnitude in the check.

    Normalising by the overall gradient scale keeps entries that are
    legitimately ~0 from dominating through finite-difference noise.
    """
    a = np.concatenate([np.ravel(analytic[k]) for k in analytic])
    n = np.concatenate([np.ravel(numeric[k]) for k in analytic])
    denom = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0))
    if denom == 0.0:
        return 0.0
    return float(np.abs(a - n).max() / denom)


def check(loss_fn, store, names=None, h=1e-4):
    """Return the max relative error between tape and finite-difference gradients."""
    a = analytic_grads(loss_fn, store, names)
    n = numeric_grads(loss_fn, store, names, h)
    return max_relative_error(a, n)


def kink_margin(loss_fn):
    """Distances from the evaluation point to trouble spots while evaluating ``loss_fn``.

    Returns (smallest |input| to any ReLU or abs or smallest row_norm
    output, smallest layer-norm row spread). Finite differences are only meaningful when the first clearly
    exceeds the step, and the second guards against the steep curvature of
    normalising a nearly constant row.
    """
    with no_grad(), watch_kinks() as seen:
        loss_fn()
    return min(seen["kink"], default=float("inf")), min(seen["spread"], default=float("inf"))

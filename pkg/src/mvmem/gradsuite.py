"""Randomised finite-difference checks of every loss and fused op.

Each case builds a fresh small instance from an rng and returns the loss
closure with the parameters to check. Instances that sit too close to a
ReLU or abs kink are redrawn, since a central difference straddling a kink
measures neither one-sided derivative; so are instances that hand layer_norm
a nearly constant row, where curvature swamps a 1e-4 step.
"""

from __future__ import annotations

import numpy as np

from mvmem.agents.a2c import actor_critic_loss
from mvmem.agents.dqn import q_loss
from mvmem.autodiff import tensor as T
from mvmem.autodiff.gradcheck import check, kink_margin
from mvmem.autodiff.nn import MLP
from mvmem.autodiff.params import ParamStore
from mvmem.encoder import (
    DiscriminatorNet,
    EncoderNet,
    LossWeights,
    loss_adv_discriminator,
    loss_adv_encoder,
    loss_con,
    loss_diff,
    loss_total,
)

TOLERANCE = 1e-4
STEP = 1e-4
# instances whose ReLU/abs inputs come closer than this to 0 are redrawn
KINK_CLEARANCE = 0.02
# and so are those feeding layer_norm a row with less spread than this
SPREAD_CLEARANCE = 0.05
MAX_REDRAWS = 1000


def _encoder_instance(rng, n_views=None):
    n_views = int(rng.integers(2, 4)) if n_views is None else n_views
    batch = int(rng.integers(2, 5))
    d, hidden, p = int(rng.integers(3, 6)), int(rng.integers(3, 6)), int(rng.integers(3, 5))
    store = ParamStore()
    net = EncoderNet(store, d, hidden, p, rng)
    disc = DiscriminatorNet(store, p, int(rng.integers(0, 4)), n_views, rng)
    rows = rng.standard_normal((n_views * batch, d))
    labels = np.repeat(np.arange(n_views), batch)
    return store, net, disc, rows, labels, batch


def _features(net, rows):
    return net(T.Tensor(rows))


def case_ops(rng):
    """Composite of the fused ops, reduced to a scalar."""
    store = ParamStore()
    a = store.add("a", rng.standard_normal((4, 5)))
    b = store.add("b", rng.standard_normal((4, 5)))
    w = store.add("w", rng.standard_normal((5, 3)))
    r = store.add("r", rng.standard_normal(3))

    def f():
        h = T.add_row(T.matmul(T.layer_norm(a), w), r)
        c = T.row_cosine(a, b) + T.row_norm(T.sub_row(b, T.mean(a, axis=0)))
        logits = T.concat([h, T.slice_rows(T.exp(T.scale(b, 0.3)), 0, 4)], axis=1)
        lp = T.pick(T.log_softmax(logits), [0, 2, 4, 7])
        return T.sum_(T.square(c)) + T.mean(T.abs_(T.relu(h) - 0.1)) - T.sum_(lp) + T.sum_(T.reshape(a, (20,)))

    return f, store, None


def case_loss_diff(rng):
    store, net, _, rows, _, _ = _encoder_instance(rng)
    names = store.names("encoder/")
    return (lambda: loss_diff(*_features(net, rows))), store, names


def case_loss_con(rng):
    store, net, _, rows, _, batch = _encoder_instance(rng)
    names = store.names("encoder/")
    margin = float(rng.uniform(0.5, 3.0))

    def f():
        _, y = _features(net, rows)
        n = rows.shape[0] // batch
        return loss_con([T.slice_rows(y, i * batch, (i + 1) * batch) for i in range(n)], margin)

    return f, store, names


def case_loss_adv_discriminator(rng):
    store, net, disc, rows, labels, _ = _encoder_instance(rng)
    names = store.names("disc/")
    return (lambda: loss_adv_discriminator(disc, _features(net, rows)[0], labels)), store, names


def case_loss_adv_encoder(rng):
    store, net, disc, rows, labels, _ = _encoder_instance(rng)
    names = store.names("encoder/")
    return (lambda: loss_adv_encoder(disc, _features(net, rows)[0], labels)), store, names


def case_loss_total(rng):
    store, net, disc, rows, labels, batch = _encoder_instance(rng)
    names = store.names("encoder/")
    w = LossWeights(*rng.uniform(0.1, 1.0, size=3))

    def f():
        x, y = _features(net, rows)
        n = rows.shape[0] // batch
        groups = [T.slice_rows(y, i * batch, (i + 1) * batch) for i in range(n)]
        return loss_total(w, loss_diff(x, y), loss_con(groups, w.margin), loss_adv_encoder(disc, x, labels))

    return f, store, names


def case_q_loss(rng):
    store = ParamStore()
    d, n_actions, m = int(rng.integers(3, 7)), 4, int(rng.integers(3, 9))
    qnet = MLP(store, "q", (d, int(rng.integers(3, 7)), n_actions), rng)
    states = rng.standard_normal((m, d))
    actions = rng.integers(0, n_actions, size=m)
    targets = rng.standard_normal(m)
    return (lambda: q_loss(qnet, states, actions, targets)), store, None


def case_actor_critic_loss(rng):
    store = ParamStore()
    d, n_actions, m = int(rng.integers(3, 7)), 4, int(rng.integers(3, 9))
    h = int(rng.integers(3, 7))
    policy = MLP(store, "pi", (d, h, n_actions), rng)
    value = MLP(store, "v", (d, h, 1), rng)
    states = rng.standard_normal((m, d))
    actions = rng.integers(0, n_actions, size=m)
    returns = rng.standard_normal(m)
    advantages = rng.standard_normal(m)
    coef = float(rng.uniform(0.0, 0.1))
    return (lambda: actor_critic_loss(policy, value, states, actions, returns, advantages, coef)[0]), store, None


CASES = {
    "ops": case_ops,
    "loss_diff": case_loss_diff,
    "loss_con": case_loss_con,
    "loss_adv_discriminator": case_loss_adv_discriminator,
    "loss_adv_encoder": case_loss_adv_encoder,
    "loss_total": case_loss_total,
    "q_loss": case_q_loss,
    "actor_critic_loss": case_actor_critic_loss,
}


def smooth_instance(case, rng):
    """Draw instances of ``case`` until it sits well away from every kink and singular spot."""
    for _ in range(MAX_REDRAWS):
        loss_fn, store, names = case(rng)
        kink, spread = kink_margin(loss_fn)
        if kink > KINK_CLEARANCE and spread > SPREAD_CLEARANCE:
            return loss_fn, store, names
    raise RuntimeError(f"no kink-free instance of {case.__name__} in {MAX_REDRAWS} draws")


def run_case(case, rng):
    loss_fn, store, names = smooth_instance(case, rng)
    return check(loss_fn, store, names, STEP)


def run_suite(trials=100, seed=0, cases=None):
    """Worst error per case over ``trials`` random instances."""
    names = list(CASES) if cases is None else list(cases)
    rng = np.random.default_rng(seed)
    return {name: max(run_case(CASES[name], rng) for _ in range(trials)) for name in names}

"""Shared/specific multi-view encoder, view discriminator, and their losses.

A single encoder is applied to every viewpoint. Its trunk feeds two linear
heads, each followed by a parameter-free layer norm: the shared head should
carry information common to all views, the specific head what tells views
apart. Training alternates a discriminator step (classify the view of a
detached shared feature) with an encoder step on the weighted sum of the
sparsity/decorrelation, contrastive and adversarial losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mvmem.autodiff import tensor as T
from mvmem.autodiff.nn import MLP, Linear
from mvmem.autodiff.params import Adam, ParamStore
from mvmem.errors import EmptyGroup, IndexOutOfRange, ShapeMismatch

LAYER_NORM_EPS = 1e-5


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.01
    lambda2: float = 0.1
    lambda3: float = 0.5
    margin: float = 1.0

    def __post_init__(self):
        for field in ("lambda1", "lambda2", "lambda3", "margin"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be nonnegative")


class EncoderNet:
    def __init__(self, store, input_dim, hidden, latent_dim, rng, prefix="encoder", zero_heads=False):
        hidden = (hidden,) if isinstance(hidden, int) else tuple(hidden)
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        sizes = (input_dim, *hidden)
        self.trunk = [Linear(store, f"{prefix}/trunk{i}", a, b, rng) for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.shared_head = Linear(store, f"{prefix}/shared", sizes[-1], latent_dim, rng, zero=zero_heads)
        self.specific_head = Linear(store, f"{prefix}/specific", sizes[-1], latent_dim, rng, zero=zero_heads)

    def __call__(self, obs):
        """obs: Tensor [m, input_dim] -> (shared [m, p], specific [m, p])."""
        if obs.data.ndim != 2 or obs.shape[1] != self.input_dim:
            raise ShapeMismatch(f"encoder expects [m, {self.input_dim}], got {obs.shape}")
        h = obs
        for layer in self.trunk:
            h = T.relu(layer(h))
        x = T.layer_norm(self.shared_head(h), LAYER_NORM_EPS)
        y = T.layer_norm(self.specific_head(h), LAYER_NORM_EPS)
        return x, y


def encode(net, obs):
    """Encode one observation vector; returns (shared, specific) as arrays."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (net.input_dim,):
        raise ShapeMismatch(f"observation has shape {obs.shape}, encoder expects ({net.input_dim},)")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation contains non-finite entries")
    with T.no_grad():
        x, y = net(T.Tensor(obs[None, :]))
    return x.data[0], y.data[0]


class DiscriminatorNet:
    def __init__(self, store, latent_dim, hidden, num_views, rng, prefix="disc"):
        self.num_views = num_views
        sizes = (latent_dim, num_views) if not hidden else (latent_dim, hidden, num_views)
        self.mlp = MLP(store, prefix, sizes, rng)

    def logits(self, x):
        return self.mlp(x)

    def probabilities(self, x):
        with T.no_grad():
            return T.softmax(self.mlp(T.as_tensor(np.atleast_2d(x)))).data


@dataclass
class FeatureBundle:
    shared: np.ndarray  # [N, p]
    specific: np.ndarray  # [N, p]

    @property
    def shared_mean(self):
        return self.shared.mean(axis=0)


def assemble_state(bundle):
    """Concatenate the N specific vectors and then the shared mean."""
    return np.concatenate([*bundle.specific, bundle.shared_mean])


# -- losses ------------------------------------------------------------------------------


def _rows(v):
    v = T.as_tensor(v)
    return T.reshape(v, (1, v.shape[0])) if v.data.ndim == 1 else v


def loss_diff(x, y):
    """Mean over rows of max(cos(x, y), 0) + |x|_1 + |y|_1; zero vectors give cosine 0."""
    x, y = _rows(x), _rows(y)
    per_row = T.relu(T.row_cosine(x, y)) + T.sum_(T.abs_(x), axis=1) + T.sum_(T.abs_(y), axis=1)
    return T.mean(per_row)


def loss_con(groups, margin=1.0):
    """Contrastive loss over per-view groups of specific features.

    Each anchor is pulled to the centroid of its own view and pushed to at
    least ``margin`` from the pooled centroid of every other view. The sum
    over all anchors is divided by twice the anchor count.
    """
    groups = [_rows(g) for g in groups]
    if not groups or any(g.shape[0] == 0 for g in groups):
        raise EmptyGroup("every view needs at least one specific vector")
    sums = [T.sum_(g, axis=0) for g in groups]
    counts = [g.shape[0] for g in groups]
    total = sum(counts)
    terms = []
    for i, g in enumerate(groups):
        centroid = T.scale(sums[i], 1.0 / counts[i])
        terms.append(T.sum_(T.square(T.sub_row(g, centroid))))
        others = [s for j, s in enumerate(sums) if j != i]
        if not others:
            continue
        pooled = others[0]
        for s in others[1:]:
            pooled = pooled + s
        pooled = T.scale(pooled, 1.0 / (total - counts[i]))
        gap = T.relu(T.add_scalar(T.scale(T.row_norm(T.sub_row(g, pooled)), -1.0), margin))
        terms.append(T.sum_(T.square(gap)))
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return T.scale(acc, 1.0 / (2.0 * total))


def _check_labels(labels, n_views):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_views):
        raise IndexOutOfRange(f"view labels must lie in [0, {n_views})")
    return labels


def loss_adv_discriminator(disc, shared, labels):
    """Mean cross-entropy of the discriminator on detached shared features."""
    labels = _check_labels(labels, disc.num_views)
    logp = T.log_softmax(disc.logits(_rows(shared).detach()))
    return -T.mean(T.pick(logp, labels))


def loss_adv_encoder(disc, shared, labels):
    """Cross-entropy between the discriminator output and the uniform view distribution.

    Gradient reaches the encoder through ``shared``; the discriminator's own
    gradient slots also fill up and must be cleared before its next step.
    """
    _check_labels(labels, disc.num_views)
    return -T.mean(T.log_softmax(disc.logits(_rows(shared))))


def loss_total(weights, l_diff, l_con, l_adv):
    return weights.lambda1 * l_diff + weights.lambda2 * l_con + weights.lambda3 * l_adv


# -- training ----------------------------------------------------------------------------


class MultiViewEncoder:
    """Encoder + discriminator pair with their optimisers."""

    def __init__(
        self,
        input_dim,
        num_views,
        rng,
        hidden=64,
        latent_dim=16,
        disc_hidden=0,
        weights=LossWeights(),
        learning_rate=1e-4,
        disc_learning_rate=None,
        store=None,
    ):
        self.store = ParamStore() if store is None else store
        self.num_views = num_views
        self.weights = weights
        self.net = EncoderNet(self.store, input_dim, hidden, latent_dim, rng)
        self.disc = DiscriminatorNet(self.store, latent_dim, disc_hidden, num_views, rng)
        self.enc_opt = Adam(self.store, learning_rate, prefix="encoder/")
        self.disc_opt = Adam(self.store, learning_rate if disc_learning_rate is None else disc_learning_rate, prefix="disc/")

    @property
    def latent_dim(self):
        return self.net.latent_dim

    @property
    def state_dim(self):
        return (self.num_views + 1) * self.net.latent_dim

    def features(self, obs):
        """obs [B, N, D] -> (shared [B, N, p], specific [B, N, p]) without taping."""
        obs = np.asarray(obs, dtype=np.float64)
        b, n, d = obs.shape
        with T.no_grad():
            x, y = self.net(T.Tensor(obs.reshape(b * n, d)))
        p = self.net.latent_dim
        return x.data.reshape(b, n, p), y.data.reshape(b, n, p)

    def states(self, obs):
        """obs [B, N, D] -> assembled states [B, (N+1) p]."""
        x, y = self.features(obs)
        return states_from_features(x, y)

    def state(self, views):
        return self.states(np.asarray(views)[None])[0]

    def train_step(self, obs, weights=None):
        return encoder_train_step(self, obs, weights)


def states_from_features(shared, specific):
    b = shared.shape[0]
    return np.concatenate([specific.reshape(b, -1), shared.mean(axis=1)], axis=1)


def view_major(obs):
    """[B, N, D] -> rows grouped by view ([N*B, D]) and their view labels."""
    obs = np.asarray(obs, dtype=np.float64)
    b, n, d = obs.shape
    return obs.transpose(1, 0, 2).reshape(n * b, d), np.repeat(np.arange(n), b)


def encoder_losses(model, rows, batch, margin):
    """Tape the shared features and the two non-adversarial losses for view-major ``rows``."""
    x, y = model.net(T.Tensor(rows))
    groups = [T.slice_rows(y, i * batch, (i + 1) * batch) for i in range(model.num_views)]
    return x, loss_diff(x, y), loss_con(groups, margin)


def encoder_train_step(model, obs, weights=None):
    """One alternating update on a batch of multi-view observations [B, N, D].

    Returns the loss values computed before the encoder moves, plus the
    discriminator's accuracy on the batch before its own step.
    """
    weights = model.weights if weights is None else weights
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 3 or obs.shape[0] == 0 or obs.shape[1] != model.num_views:
        raise ShapeMismatch(f"expected a [B, {model.num_views}, D] batch, got {obs.shape}")
    batch = obs.shape[0]
    rows, labels = view_major(obs)

    x, l_diff, l_con = encoder_losses(model, rows, batch, weights.margin)

    logits = model.disc.logits(x.detach())
    accuracy = float(np.mean(np.argmax(logits.data, axis=1) == labels))
    l_adv_d = -T.mean(T.pick(T.log_softmax(logits), labels))
    model.disc_opt.zero_grad()
    T.backward(l_adv_d)
    model.disc_opt.step()

    # generator side sees the freshly updated discriminator
    l_adv_g = loss_adv_encoder(model.disc, x, labels)
    total = loss_total(weights, l_diff, l_con, l_adv_g)
    model.enc_opt.zero_grad()
    T.backward(total)
    model.enc_opt.step()
    return {
        "loss_diff": l_diff.item(),
        "loss_con": l_con.item(),
        "loss_adv_d": l_adv_d.item(),
        "loss_adv_g": l_adv_g.item(),
        "disc_accuracy": accuracy,
    }


# -- evaluation helpers --------------------------------------------------------------------


def two_view_dataset(n, latent_dim, rng, offset_scale=1.0, noise=0.0):
    """Two views of the same Gaussian latent, each shifted by its own constant offset.

    Returns an array [n, 2, latent_dim].
    """
    z = rng.standard_normal((n, latent_dim))
    offsets = offset_scale * rng.standard_normal((2, latent_dim))
    views = z[:, None, :] + offsets[None, :, :]
    if noise:
        views = views + noise * rng.standard_normal(views.shape)
    return views


def linear_probe_accuracy(features, labels, rng, steps=300, lr=0.05, train_fraction=0.5):
    """Held-out accuracy of a softmax-regression probe trained from scratch."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    order = rng.permutation(len(labels))
    cut = int(train_fraction * len(labels))
    tr, te = order[:cut], order[cut:]
    mu = features[tr].mean(axis=0)
    sd = features[tr].std(axis=0) + 1e-8
    xtr = (features[tr] - mu) / sd
    xte = (features[te] - mu) / sd
    store = ParamStore()
    head = Linear(store, "probe", features.shape[1], n_classes, rng)
    opt = Adam(store, lr)
    xtr_t = T.Tensor(xtr)
    for _ in range(steps):
        opt.zero_grad()
        loss = -T.mean(T.pick(T.log_softmax(head(xtr_t)), labels[tr]))
        T.backward(loss)
        opt.step()
    with T.no_grad():
        pred = np.argmax(head(T.Tensor(xte)).data, axis=1)
    return float(np.mean(pred == labels[te]))


def probe_views(model, obs, rng):
    """Probe accuracies (specific, shared) for recovering the view index."""
    x, y = model.features(obs)
    b, n, p = x.shape
    labels = np.tile(np.arange(n), b)
    acc_specific = linear_probe_accuracy(y.reshape(b * n, p), labels, rng)
    acc_shared = linear_probe_accuracy(x.reshape(b * n, p), labels, rng)
    return acc_specific, acc_shared


def disentangling_trial(seed, steps=2000, n=4096, input_dim=8, batch=64, **encoder_kwargs):
    """Train a default encoder on a two-view dataset; returns held-out probe accuracies (specific, shared).

    The first half of the samples feeds the minibatches, the second half the
    probes. Views differ only by a constant per-view offset, so a perfect
    split puts view identity in the specific features and none in the shared.
    """
    rng = np.random.default_rng(seed)
    data = two_view_dataset(n, input_dim, rng)
    model = MultiViewEncoder(input_dim, 2, rng, **encoder_kwargs)
    half = n // 2
    for _ in range(steps):
        model.train_step(data[rng.choice(half, batch, replace=False)])
    return probe_views(model, data[half:], np.random.default_rng(0))

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvmem.autodiff import tensor as T
from mvmem.autodiff.gradcheck import check
from mvmem.autodiff.params import ParamStore
from mvmem.encoder import (
    DiscriminatorNet,
    EncoderNet,
    FeatureBundle,
    LossWeights,
    MultiViewEncoder,
    assemble_state,
    encode,
    encoder_train_step,
    loss_adv_discriminator,
    loss_adv_encoder,
    loss_con,
    loss_diff,
    loss_total,
    two_view_dataset,
)
from mvmem.errors import EmptyGroup, IndexOutOfRange, ShapeMismatch
from mvmem.gradsuite import smooth_instance, case_loss_total

GOLDEN = json.loads((Path(__file__).parent / "golden" / "encoder_forward.json").read_text())


class FixedDisc:
    """Discriminator stand-in with constant logits."""

    def __init__(self, probs):
        self.num_views = len(probs)
        self._logits = np.log(np.asarray(probs, dtype=float))

    def logits(self, x):
        zero = T.Tensor(np.zeros((x.shape[1], self.num_views)))
        return T.add_row(T.matmul(x, zero), T.Tensor(self._logits))


# -- encoder forward -------------------------------------------------------------------


def test_golden_forward():
    rng = np.random.default_rng(GOLDEN["seed"])
    net = EncoderNet(ParamStore(), *GOLDEN["shape"], rng)
    x, y = encode(net, GOLDEN["obs"])
    assert np.allclose(x, GOLDEN["shared"], rtol=0, atol=1e-12)
    assert np.allclose(y, GOLDEN["specific"], rtol=0, atol=1e-12)


def test_encode_is_deterministic(rng):
    net = EncoderNet(ParamStore(), 8, 6, 4, rng)
    obs = rng.standard_normal(8)
    a, b = encode(net, obs), encode(net, obs)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_zero_heads_give_zero_features(rng):
    net = EncoderNet(ParamStore(), 8, 6, 4, rng, zero_heads=True)
    x, y = encode(net, rng.standard_normal(8))
    assert np.array_equal(x, np.zeros(4)) and np.array_equal(y, np.zeros(4))


def test_encode_rejects_bad_input(rng):
    net = EncoderNet(ParamStore(), 8, 6, 4, rng)
    with pytest.raises(ShapeMismatch):
        encode(net, np.zeros(7))
    with pytest.raises(ValueError):
        encode(net, np.full(8, np.nan))


# -- losses ------------------------------------------------------------------------------


@pytest.mark.parametrize("x,y,expect", [
    ((1.0, 0.0), (0.0, 1.0), 2.0),
    ((1.0, 0.0), (1.0, 0.0), 3.0),
    ((1.0, 0.0), (-1.0, 0.0), 2.0),
])
def test_loss_diff_fixtures(x, y, expect):
    assert loss_diff(np.array(x), np.array(y)).item() == expect


@given(st.integers(0, 2**31 - 1))
def test_loss_diff_nonnegative_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    a = loss_diff(x, y).item()
    assert a >= 0
    assert a == pytest.approx(loss_diff(y, x).item(), abs=1e-12)


def test_loss_con_separated_views():
    g1, g2 = np.zeros((2, 2)), np.array([[2.0, 0.0], [2.0, 0.0]])
    assert loss_con([g1, g2], 1.0).item() == 0.0


@given(st.integers(1, 5), st.integers(2, 4))
def test_loss_con_identical_vectors(m, n):
    groups = [np.ones((m, 3)) for _ in range(n)]
    assert loss_con(groups, 1.0).item() == pytest.approx(0.5)


@given(st.integers(0, 2**31 - 1))
def test_loss_con_zero_margin_is_pull_only(seed):
    rng = np.random.default_rng(seed)
    groups = [rng.standard_normal((3, 2)) for _ in range(2)]
    pull = sum(((g - g.mean(0)) ** 2).sum() for g in groups) / (2 * 6)
    assert loss_con(groups, 0.0).item() == pytest.approx(pull, abs=1e-12)


def test_loss_con_empty_group():
    with pytest.raises(EmptyGroup):
        loss_con([np.ones((2, 2)), np.zeros((0, 2))])


def test_adv_discriminator_fixtures():
    assert loss_adv_discriminator(FixedDisc([1 / 3] * 3), np.zeros((3, 2)), [0, 1, 2]).item() == \
        pytest.approx(math.log(3))
    sure = FixedDisc([1 - 1e-12, 1e-12])
    assert loss_adv_discriminator(sure, np.zeros((1, 2)), [0]).item() == pytest.approx(0.0, abs=1e-9)
    d = FixedDisc(np.exp([1.0, 0.0]) / np.exp([1.0, 0.0]).sum())
    assert loss_adv_discriminator(d, np.zeros((1, 2)), [0]).item() == pytest.approx(0.3133, abs=1e-4)


def test_adv_label_range():
    with pytest.raises(IndexOutOfRange):
        loss_adv_discriminator(FixedDisc([0.5, 0.5]), np.zeros((1, 2)), [2])


def test_adv_encoder_fixtures():
    assert loss_adv_encoder(FixedDisc([0.5, 0.5]), np.zeros((2, 2)), [0, 1]).item() == pytest.approx(math.log(2))
    val = loss_adv_encoder(FixedDisc([0.9, 0.1]), np.zeros((1, 2)), [0]).item()
    assert val == pytest.approx(1.2040, abs=1e-4)


def test_adv_encoder_uniform_discriminator_has_zero_gradient(rng):
    store = ParamStore()
    net = EncoderNet(store, 5, 4, 3, rng)
    disc = DiscriminatorNet(store, 3, 0, 2, rng)
    disc.mlp.layers[0].weight.data[...] = 0.0
    disc.mlp.layers[0].bias.data[...] = 0.0
    x, _ = net(T.Tensor(rng.standard_normal((4, 5))))
    T.backward(loss_adv_encoder(disc, x, [0, 0, 1, 1]))
    for name in store.names("encoder/"):
        assert np.allclose(store[name].grad, 0.0, atol=1e-15)


@given(st.permutations([0, 0, 1, 1, 2]))
def test_adv_encoder_label_permutation_invariant(labels):
    rng = np.random.default_rng(0)
    disc = DiscriminatorNet(ParamStore(), 3, 0, 3, rng)
    x = rng.standard_normal((5, 3))
    base = loss_adv_encoder(disc, x, [0, 0, 1, 1, 2]).item()
    assert loss_adv_encoder(disc, x, list(labels)).item() == base


def test_loss_total_fixtures():
    ones = LossWeights(1.0, 1.0, 1.0)
    assert loss_total(ones, 2.0, 0.5, 1.0986) == pytest.approx(3.5986)
    assert loss_total(LossWeights(0.1, 0.02, 0.01), 3.0, 0.5, 1.1) == pytest.approx(0.321)
    assert loss_total(LossWeights(0.0, 0.0, 0.0), 3.0, 0.5, 1.1) == 0.0


def test_loss_weights_nonnegative():
    with pytest.raises(ValueError):
        LossWeights(-0.1)


def test_zero_weights_zero_encoder_gradient():
    rng = np.random.default_rng(4)
    store = ParamStore()
    enc = EncoderNet(store, 5, 4, 3, rng)
    disc = DiscriminatorNet(store, 3, 0, 2, rng)
    x, y = enc(T.Tensor(rng.standard_normal((4, 5))))
    zero = LossWeights(0.0, 0.0, 0.0)
    total = loss_total(zero, loss_diff(x, y), loss_con([T.slice_rows(y, 0, 2), T.slice_rows(y, 2, 4)]),
                       loss_adv_encoder(disc, x, [0, 0, 1, 1]))
    T.backward(total)
    assert total.item() == 0.0
    assert all(np.array_equal(store[n].grad, np.zeros_like(store[n].grad)) for n in store.names("encoder/"))


def test_loss_total_gradient_matches_finite_differences():
    loss_fn, store, names = smooth_instance(case_loss_total, np.random.default_rng(11))
    assert check(loss_fn, store, names) < 1e-4


# -- state assembly ------------------------------------------------------------------------


def test_assemble_single_view():
    s = assemble_state(FeatureBundle(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]])))
    assert s.tolist() == [3.0, 4.0, 1.0, 2.0]


def test_assemble_shared_mean_in_last_slots():
    b = FeatureBundle(np.array([[0.0, 2.0], [2.0, 0.0]]), np.array([[5.0, 6.0], [7.0, 8.0]]))
    assert assemble_state(b).tolist() == [5.0, 6.0, 7.0, 8.0, 1.0, 1.0]


@given(st.permutations([0, 1, 2]))
def test_assemble_permutation_is_local(perm):
    spec = np.arange(6.0).reshape(2, 3)
    shared = np.ones((2, 3))
    base = assemble_state(FeatureBundle(shared, spec))
    moved = spec.copy()
    moved[0] = spec[0][list(perm)]
    out = assemble_state(FeatureBundle(shared, moved))
    assert out[:3].tolist() == base[:3][list(perm)].tolist()
    assert np.array_equal(out[3:], base[3:])


# -- training step -------------------------------------------------------------------------


def test_zero_weights_and_zero_disc_rate_leave_parameters_unchanged(rng):
    model = MultiViewEncoder(6, 2, rng, hidden=5, latent_dim=3, weights=LossWeights(0.0, 0.0, 0.0),
                             disc_learning_rate=0.0)
    before = model.store.state()
    encoder_train_step(model, rng.standard_normal((4, 2, 6)))
    after = model.store.state()
    assert all(np.array_equal(before[n], after[n]) for n in before)


def test_train_step_rejects_wrong_view_count(rng):
    model = MultiViewEncoder(6, 2, rng, hidden=5, latent_dim=3)
    with pytest.raises(ShapeMismatch):
        encoder_train_step(model, np.zeros((4, 3, 6)))


def test_training_lowers_diff_and_con():
    rng = np.random.default_rng(0)
    base = rng.standard_normal((32, 8))
    obs = np.stack([base, base + 1.5], axis=1)
    model = MultiViewEncoder(8, 2, rng, hidden=16, latent_dim=4, weights=LossWeights(1.0, 1.0, 0.1),
                             learning_rate=1e-3)
    first = encoder_train_step(model, obs)
    for _ in range(499):
        last = encoder_train_step(model, obs)
    assert last["loss_diff"] < first["loss_diff"]
    assert last["loss_con"] < first["loss_con"]


def test_two_view_dataset_shape_and_offsets(rng):
    data = two_view_dataset(100, 4, rng)
    assert data.shape == (100, 2, 4)
    diff = data[:, 1] - data[:, 0]
    assert np.allclose(diff, diff[0])

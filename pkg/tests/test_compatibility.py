"""Pair transforms, discriminators, BCE, and threshold selection."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from outfitgen.compatibility import (
    BCE_EPS,
    PairDiscriminator,
    balanced_accuracy,
    binary_cross_entropy,
    discriminator_loss,
    normalize_transforms,
    pair_transform,
    select_threshold,
)
from outfitgen.errors import ConfigError, ShapeError
from outfitgen.nn import finite_difference_check, zero_grads

GOLDENS = np.load(Path(__file__).parent / "data" / "goldens.npz")


class TestPairTransform:
    def test_arithmetic(self):
        a, b = np.array([1.0, 2.0]), np.array([3.0, 4.0])
        np.testing.assert_array_equal(pair_transform(a, b, "dot"), [3.0, 8.0])
        np.testing.assert_array_equal(pair_transform(a, b, "diff"), [4.0, 4.0])
        np.testing.assert_array_equal(pair_transform(a, b, "sum"), [4.0, 6.0])
        np.testing.assert_array_equal(pair_transform(a, b, "all"),
                                      [3.0, 8.0, 4.0, 6.0, 4.0, 4.0])

    def test_equal_inputs_zero_diff(self, rng):
        a = rng.normal(size=6)
        np.testing.assert_array_equal(pair_transform(a, a, "diff"), np.zeros(6))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_exact_swap_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(2, 8))
        for kind in ("dot", "diff", "sum", "all"):
            np.testing.assert_array_equal(pair_transform(a, b, kind),
                                          pair_transform(b, a, kind))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            pair_transform(np.zeros(3), np.zeros(4), "dot")

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            pair_transform(np.zeros(3), np.zeros(3), "norm")

    def test_normalize_transforms_fixes_order(self):
        assert normalize_transforms(("diff", "dot")) == ("dot", "diff")
        assert normalize_transforms(("sum",)) == ("sum",)
        with pytest.raises(ConfigError):
            normalize_transforms(("bad",))


class TestDiscriminator:
    def test_scores_in_open_unit_interval(self, rng):
        disc = PairDiscriminator("d", 5, rng, hidden=(8, 5))
        a, b = rng.normal(size=(2, 20, 5)) * 10
        scores = disc.scores(a, b)
        assert np.all(scores > 0.0) and np.all(scores < 1.0)

    def test_swap_symmetry_exact(self, rng):
        disc = PairDiscriminator("d", 5, rng, hidden=(8, 5))
        a, b = rng.normal(size=(2, 50, 5))
        np.testing.assert_array_equal(disc.scores(a, b), disc.scores(b, a))

    def test_golden_cat_score(self):
        disc = PairDiscriminator("disc", 6, np.random.default_rng(oracles.GOLDEN_SEED),
                                 hidden=(8, 5))
        got = disc.score_one(GOLDENS["pair_a"], GOLDENS["pair_b"])
        independent = oracles.discriminator_score(disc, GOLDENS["pair_a"], GOLDENS["pair_b"])
        np.testing.assert_allclose(got, independent, rtol=1e-12)
        np.testing.assert_allclose(got, float(GOLDENS["cat_score"]), rtol=1e-12)

    def test_ablation_subsets_change_input_width(self, rng):
        for transforms, width in ((("dot",), 5), (("dot", "sum"), 10),
                                  (("dot", "sum", "diff"), 15)):
            disc = PairDiscriminator("d", 5, rng, hidden=(4, 3), transforms=transforms)
            assert disc.net.layers[0].in_dim == width
            scores = disc.scores(rng.normal(size=(3, 5)), rng.normal(size=(3, 5)))
            assert scores.shape == (3,)

    def test_gradients_match_finite_differences(self, rng):
        disc = PairDiscriminator("d", 4, rng, hidden=(6, 4))
        a, b = rng.normal(size=(2, 6, 4))
        labels = (np.arange(6) % 2).astype(np.float64)

        def loss_fn():
            zero_grads(disc.params())
            loss, _, _ = disc.loss_and_grads(a, b, labels)
            return loss

        report = finite_difference_check(loss_fn, disc.params(), rng)
        assert max(report.values()) < 1e-4


class TestBinaryCrossEntropy:
    def test_coin_flip_scores(self):
        scores = np.full(10, 0.5)
        labels = (np.arange(10) % 2).astype(float)
        np.testing.assert_allclose(binary_cross_entropy(scores, labels), np.log(2.0),
                                   rtol=1e-12)

    def test_perfect_scores_clamp(self):
        scores = np.array([1.0, 0.0])
        labels = np.array([1.0, 0.0])
        np.testing.assert_allclose(binary_cross_entropy(scores, labels),
                                   -np.log(1.0 - BCE_EPS), rtol=1e-6)

    def test_golden_batch(self):
        got = binary_cross_entropy(GOLDENS["bce_scores"], GOLDENS["bce_labels"])
        independent = oracles.bce(GOLDENS["bce_scores"], GOLDENS["bce_labels"])
        np.testing.assert_allclose(got, independent, rtol=1e-12)
        np.testing.assert_allclose(got, float(GOLDENS["bce_loss"]), rtol=1e-12)

    def test_empty_batch_rejected(self):
        with pytest.raises(ConfigError):
            binary_cross_entropy(np.zeros(0), np.zeros(0))

    def test_loss_finite_under_saturation(self, rng):
        disc = PairDiscriminator("d", 3, rng, hidden=(4, 3))
        a, b = rng.normal(size=(2, 4, 3)) * 1e6  # saturate the sigmoid
        labels = np.array([1.0, 0.0, 1.0, 0.0])
        assert np.isfinite(discriminator_loss(disc, a, b, labels))


class TestSelectThreshold:
    def test_perfectly_separated(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        labels = np.array([0, 0, 1, 1])
        theta = select_threshold(scores, labels)
        assert 0.2 < theta <= 0.8
        assert balanced_accuracy(scores, labels, theta) == 1.0

    def test_all_equal_scores(self):
        scores = np.full(6, 0.4)
        labels = np.array([0, 1, 0, 1, 0, 1])
        theta = select_threshold(scores, labels)
        assert theta == 0.4
        assert balanced_accuracy(scores, labels, theta) == 0.5

    def test_matches_bruteforce_scan(self, rng):
        scores = rng.uniform(size=20)
        labels = (rng.uniform(size=20) < 0.5).astype(int)
        if labels.sum() in (0, 20):
            labels[0] = 1 - labels[0]
        theta = select_threshold(scores, labels)

        # independent scan over the same candidate set, by definition
        uniq = np.unique(scores)
        candidates = sorted(list(uniq) + list((uniq[:-1] + uniq[1:]) / 2))
        best, best_acc = None, -1.0
        for cand in candidates:
            pred = scores >= cand
            sens = pred[labels == 1].mean()
            spec = (~pred[labels == 0]).mean()
            acc = 0.5 * (sens + spec)
            if acc > best_acc + 1e-15:
                best, best_acc = cand, acc
        assert theta == best
        np.testing.assert_allclose(balanced_accuracy(scores, labels, theta), best_acc)

    def test_single_class_rejected(self):
        with pytest.raises(ConfigError):
            select_threshold(np.array([0.2, 0.4]), np.array([1, 1]))

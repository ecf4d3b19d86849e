"""Tests for temporal-shift augmentation and test-time score combination."""

import numpy as np
import pytest

from cvepkit.augment import (
    ALPHAS,
    STRATEGIES,
    AugmentationSpec,
    augment_train,
    combine_test_scores,
    shift_samples,
    shift_trial,
)
from cvepkit.data import Trial


def test_spec_validation():
    assert AugmentationSpec("NA").alpha == 1
    with pytest.raises(ValueError):
        AugmentationSpec("bogus")
    with pytest.raises(ValueError):
        AugmentationSpec("TA", alpha=3)
    AugmentationSpec("TC", alpha=0)  # degenerate alpha is allowed


def test_spec_flags():
    assert not AugmentationSpec("NA").augments_train
    assert not AugmentationSpec("NA").combines_test
    assert AugmentationSpec("TA").augments_train
    assert not AugmentationSpec("TA").combines_test
    assert not AugmentationSpec("TC").augments_train
    assert AugmentationSpec("TC").combines_test
    both = AugmentationSpec("TA_TC")
    assert both.augments_train and both.combines_test
    assert set(STRATEGIES) == {"NA", "TA", "TC", "TA_TC"}
    assert ALPHAS == (1, 2, 4, 8)


def test_shift_set_dedupes():
    assert AugmentationSpec("TC", alpha=4).shift_set() == (-4, 0, 4)
    assert AugmentationSpec("TC", alpha=0).shift_set() == (0,)


def test_shift_samples_direction():
    x = np.arange(10.0)
    shifted = shift_samples(x, 3)
    # Output sample 0 reads input sample 3.
    assert shifted[0] == 3.0
    np.testing.assert_array_equal(shifted, np.roll(x, -3))
    np.testing.assert_array_equal(shift_samples(shifted, -3), x)
    with pytest.raises(ValueError):
        shift_samples(x, 10)


def test_shift_samples_trailing_axis_only():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 3, 12))
    shifted = shift_samples(x, 5)
    np.testing.assert_array_equal(shifted[2, 1], np.roll(x[2, 1], -5))


def test_shift_trial_preserves_metadata():
    trial = Trial(data=np.arange(16.0).reshape(2, 8), label=4, session_id=9)
    out = shift_trial(trial, 2)
    assert out.label == 4 and out.session_id == 9
    np.testing.assert_array_equal(out.data, np.roll(trial.data, -2, axis=-1))
    np.testing.assert_array_equal(trial.data, np.arange(16.0).reshape(2, 8))


def test_augment_train_layout():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 2, 20))
    labels = np.array([0, 1, 2, 3, 4])
    out, out_labels = augment_train(x, labels, AugmentationSpec("TA", alpha=4))
    assert out.shape == (15, 2, 20)
    np.testing.assert_array_equal(out_labels, np.tile(labels, 3))
    np.testing.assert_array_equal(out[:5], x)
    np.testing.assert_array_equal(out[5:10], shift_samples(x, 4))
    np.testing.assert_array_equal(out[10:], shift_samples(x, -4))


def test_augment_train_rejects_non_augmenting():
    x = np.zeros((2, 2, 10))
    labels = np.zeros(2, dtype=int)
    with pytest.raises(ValueError):
        augment_train(x, labels, AugmentationSpec("NA"))
    with pytest.raises(ValueError):
        augment_train(x, labels, AugmentationSpec("TC", alpha=2))
    with pytest.raises(ValueError):
        augment_train(x, labels, AugmentationSpec("TA", alpha=0))


def test_combine_test_scores_averages_shift_set():
    # A scorer keyed on sample 0 of channel 0 exposes which shifted copies
    # were evaluated.
    def score_fn(x):
        return np.stack([x[:, 0, 0], -x[:, 0, 0]], axis=1)

    x = np.zeros((1, 1, 8))
    x[0, 0] = np.arange(8.0)
    spec = AugmentationSpec("TC", alpha=2)
    got = combine_test_scores(score_fn, x, spec)
    # Shifts (-2, 0, 2) read samples 6, 0 and 2: mean 8/3.
    np.testing.assert_allclose(got, [[8.0 / 3.0, -8.0 / 3.0]])


def test_combine_alpha_zero_is_identity():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 2, 30))

    calls = []

    def score_fn(batch):
        calls.append(batch)
        return batch.sum(axis=(1, 2))[:, None] * np.ones((1, 6))

    base = score_fn(x)
    got = combine_test_scores(score_fn, x, AugmentationSpec("TC", alpha=0))
    np.testing.assert_array_equal(got, base)
    # Single-shift short-circuit passes the input through unshifted.
    assert calls[-1] is x


def test_combine_constant_scorer_unchanged():
    def score_fn(batch):
        return np.ones((batch.shape[0], 6))

    x = np.zeros((3, 2, 16))
    for alpha in ALPHAS:
        got = combine_test_scores(score_fn, x, AugmentationSpec("TC", alpha=alpha))
        np.testing.assert_allclose(got, np.ones((3, 6)), atol=1e-15)


def test_combine_improves_majority_example():
    # Two classes; the unshifted view miscounts, but two of the three
    # shifted views score class 0 higher, and the average recovers it.
    def score_fn(x):
        v = x[:, 0, 0]
        return np.stack([v, 1.0 - v], axis=1)

    x = np.zeros((1, 1, 6))
    x[0, 0] = [0.4, 1.0, 0.0, 0.3, 0.0, 1.0]
    spec = AugmentationSpec("TC", alpha=1)
    plain = score_fn(x)
    assert plain[0].argmax() == 1
    combined = combine_test_scores(score_fn, x, spec)
    assert combined[0].argmax() == 0

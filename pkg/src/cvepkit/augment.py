"""Temporal-shift augmentation and test-time score combination.

Two complementary robustness strategies around a shift magnitude ``alpha``
(in samples): train augmentation adds circularly shifted copies at +alpha
and -alpha to the training set, and test combination averages class scores
over the shift set {0, +alpha, -alpha} of each test trial. Shifts are
circular because an epoch spans exactly one code period, so a shift models
response latency without edge artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Trial

STRATEGIES = ("NA", "TA", "TC", "TA_TC")
ALPHAS = (1, 2, 4, 8)


@dataclass(frozen=True)
class AugmentationSpec:
    """Augmentation strategy and shift magnitude.

    Parameters
    ----------
    strategy : str
        One of ``"NA"`` (none), ``"TA"`` (train augmentation), ``"TC"``
        (test combination), ``"TA_TC"`` (both).
    alpha : int
        Shift magnitude in samples, one of 1, 2, 4, 8. Zero is accepted
        as a degenerate value so that test combination can be checked
        against the no-augmentation baseline; strategies that shift the
        training set reject it.
    """

    strategy: str = "NA"
    alpha: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.alpha not in ALPHAS and self.alpha != 0:
            raise ValueError(f"alpha must be one of {ALPHAS} (or 0), got {self.alpha}")

    @property
    def augments_train(self) -> bool:
        return self.strategy in ("TA", "TA_TC")

    @property
    def combines_test(self) -> bool:
        return self.strategy in ("TC", "TA_TC")

    def shift_set(self) -> tuple[int, ...]:
        """Deduplicated sorted shifts {0, +alpha, -alpha} for combination.

        Deduplication makes alpha = 0 collapse to a single evaluation, so
        TC at alpha 0 is bitwise identical to no augmentation.
        """
        return tuple(sorted({0, self.alpha, -self.alpha}))


def shift_samples(data: np.ndarray, shift: int) -> np.ndarray:
    """Circularly shift the trailing sample axis.

    Sample ``i`` of the output is sample ``(i + shift) mod n`` of the
    input, so a positive shift advances the signal (output sample 0 reads
    from input sample ``shift``).
    """
    n = data.shape[-1]
    if abs(shift) >= n:
        raise ValueError(f"|shift| must be below {n}, got {shift}")
    return np.roll(data, -shift, axis=-1)


def shift_trial(trial: Trial, shift: int) -> Trial:
    """Return a copy of the trial circularly shifted by ``shift`` samples."""
    return Trial(data=shift_samples(trial.data, shift), label=trial.label,
                 session_id=trial.session_id)


def augment_train(x: np.ndarray, labels: np.ndarray,
                  spec: AugmentationSpec) -> tuple[np.ndarray, np.ndarray]:
    """Expand a training set with +alpha and -alpha shifted copies.

    Parameters
    ----------
    x : ndarray, shape (n, channels, samples)
        Training epochs.
    labels : ndarray, shape (n,)
        Class labels, preserved on every copy.
    spec : AugmentationSpec
        Must have a train-augmenting strategy and a nonzero alpha.

    Returns
    -------
    (ndarray, ndarray)
        The originals followed by the +alpha then -alpha copies (3n rows)
        and the tiled labels.
    """
    if not spec.augments_train:
        raise ValueError(
            f"strategy {spec.strategy!r} does not augment the training set")
    if spec.alpha == 0:
        raise ValueError("alpha 0 is the no-augmentation case; use strategy NA")
    out = np.concatenate([x, shift_samples(x, spec.alpha),
                          shift_samples(x, -spec.alpha)], axis=0)
    return out, np.tile(labels, 3)


def combine_test_scores(score_fn, x: np.ndarray,
                        spec: AugmentationSpec) -> np.ndarray:
    """Average class scores over the shift set of each test epoch.

    Parameters
    ----------
    score_fn : callable
        Maps an epoch batch ``(n, channels, samples)`` to class scores
        ``(n, n_classes)``, higher better. Distance-based deciders must
        hand in negated distances so argmax semantics are uniform.
    x : ndarray, shape (n, channels, samples)
    spec : AugmentationSpec

    Returns
    -------
    ndarray, shape (n, n_classes)
        Arithmetic mean of the score vectors over the deduplicated shift
        set. Model state is never modified.
    """
    shifts = spec.shift_set()
    if len(shifts) == 1:
        return score_fn(x)
    total = None
    for s in shifts:
        scores = score_fn(shift_samples(x, s))
        total = scores if total is None else total + scores
    return total / len(shifts)

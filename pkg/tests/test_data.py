"""Tests for trial and session containers."""

import numpy as np
import pytest

from cvepkit.data import FS, N_CHANNELS, N_SAMPLES, REFRESH, Session, Trial


def test_epoch_constants():
    assert FS == 512.0
    assert REFRESH == 60.0
    assert N_CHANNELS == 8
    assert N_SAMPLES == 538


def test_trial_coerces_to_float64():
    t = Trial(data=np.zeros((8, 10), dtype=np.float32), label=2)
    assert t.data.dtype == np.float64
    assert t.label == 2 and t.session_id == 0


def test_trial_validation():
    with pytest.raises(ValueError):
        Trial(data=np.zeros(10), label=0)
    with pytest.raises(ValueError):
        Trial(data=np.zeros((8, 10)), label=6)
    with pytest.raises(ValueError):
        Trial(data=np.zeros((8, 10)), label=-1)


def test_session_accessors():
    rng = np.random.default_rng(0)
    trials = [Trial(data=rng.normal(size=(8, 16)), label=i % 6, session_id=3)
              for i in range(7)]
    sess = Session(trials=trials, session_id=3)
    assert len(sess) == 7
    np.testing.assert_array_equal(sess.labels(), np.arange(7) % 6)
    stacked = sess.stacked()
    assert stacked.shape == (7, 8, 16)
    np.testing.assert_array_equal(stacked[4], trials[4].data)

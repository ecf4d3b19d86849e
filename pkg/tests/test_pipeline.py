"""Tests for leave-one-session-out evaluation."""

import numpy as np
import pytest

from cvepkit.augment import AugmentationSpec
from cvepkit.codes import N_CLASSES
from cvepkit.data import N_CHANNELS, N_SAMPLES, Session, Trial
from cvepkit.methods import ModelPool, make_method, make_methods
from cvepkit.pipeline import (
    FoldResult,
    cross_validate,
    preprocess_sessions,
    run_experiment,
)
from cvepkit.preprocess import Preprocessor
from cvepkit.synth import ForwardModelConfig, simulate_subject

NA = AugmentationSpec("NA")


def _toy_subject(noise_sd=0.5, trials_per_class=4, seed=0):
    cfg = ForwardModelConfig(noise_sd=noise_sd, jitter_sd=0.0,
                             trials_per_class=trials_per_class,
                             n_sessions=5, seed=seed)
    return simulate_subject(cfg)


def test_run_experiment_requires_five_distinct_sessions():
    sessions = _toy_subject()
    with pytest.raises(ValueError, match="5 sessions"):
        run_experiment([make_method("corr_blda")], sessions[:4], NA)
    dup = sessions[:4] + [sessions[3]]
    with pytest.raises(ValueError, match="distinct"):
        run_experiment([make_method("corr_blda")], dup, NA)


def test_session_order_does_not_matter():
    sessions = _toy_subject()
    r_fwd = run_experiment([make_method("corr_blda")], sessions, NA, seed=7)
    shuffled = [sessions[i] for i in (3, 0, 4, 1, 2)]
    r_rev = run_experiment([make_method("corr_blda")], shuffled, NA, seed=7)
    a, b = r_fwd["corr_blda"], r_rev["corr_blda"]
    assert a.test_sessions == b.test_sessions == (0, 1, 2, 3, 4)
    np.testing.assert_array_equal(a.accuracies, b.accuracies)
    for sa, sb in zip(a.scores, b.scores):
        np.testing.assert_array_equal(sa, sb)


def test_fold_result_records_everything():
    sessions = _toy_subject()
    n_test = 4 * N_CLASSES
    res = run_experiment([make_method("cca_blda")], sessions, NA)["cca_blda"]
    assert isinstance(res, FoldResult)
    assert res.method == "cca_blda"
    assert res.accuracies.shape == (5,)
    assert len(res.predictions) == len(res.true_labels) == len(res.scores) == 5
    for k in range(5):
        assert res.scores[k].shape == (n_test, N_CLASSES)
        np.testing.assert_array_equal(res.predictions[k],
                                      res.scores[k].argmax(axis=1))
        acc = float(np.mean(res.predictions[k] == res.true_labels[k]))
        assert res.accuracies[k] == acc


def test_fold_result_mean_and_sd():
    acc = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    res = FoldResult(method="x", test_sessions=(0, 1, 2, 3, 4), accuracies=acc)
    assert res.mean == pytest.approx(0.6)
    assert res.sd == pytest.approx(acc.std(ddof=1))


def test_fold_hook_sees_each_held_out_session():
    sessions = _toy_subject()
    seen = []

    def hook(fold, sid, pool, x_te, y_te):
        seen.append((fold, sid))
        assert isinstance(pool, ModelPool)
        assert x_te.shape == (4 * N_CLASSES, N_CHANNELS, N_SAMPLES)
        np.testing.assert_array_equal(x_te, sessions[sid].stacked())
        np.testing.assert_array_equal(y_te, sessions[sid].labels())

    run_experiment([make_method("corr_blda")], sessions, NA, fold_hook=hook)
    assert seen == [(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]


def test_cross_validate_matches_run_experiment():
    sessions = _toy_subject()
    single = cross_validate(make_method("corr_blda"), sessions, NA, seed=3)
    joint = run_experiment([make_method("corr_blda")], sessions, NA, seed=3)
    np.testing.assert_array_equal(single.accuracies,
                                  joint["corr_blda"].accuracies)


def test_results_do_not_depend_on_method_subset():
    sessions = _toy_subject()
    alone = run_experiment(make_methods(["corr_blda"]), sessions, NA, seed=5)
    together = run_experiment(make_methods(["corr_blda", "cca_blda"]),
                              sessions, NA, seed=5)
    for sa, sb in zip(alone["corr_blda"].scores, together["corr_blda"].scores):
        np.testing.assert_array_equal(sa, sb)


def test_preprocess_sessions_keeps_structure():
    sessions = _toy_subject(trials_per_class=2)
    pre = Preprocessor()
    out = preprocess_sessions(sessions, pre)
    assert [s.session_id for s in out] == [s.session_id for s in sessions]
    for raw, done in zip(sessions, out):
        assert len(done.trials) == len(raw.trials)
        for t_raw, t_done in zip(raw.trials, done.trials):
            assert t_done.label == t_raw.label
            assert t_done.session_id == t_raw.session_id
            assert t_done.data.shape == t_raw.data.shape
            assert not np.array_equal(t_done.data, t_raw.data)
            np.testing.assert_allclose(t_done.data, pre.apply(t_raw.data),
                                       atol=1e-10)


def test_preprocess_sessions_default_preprocessor():
    trials = [Trial(data=np.random.default_rng(i).normal(
                        size=(N_CHANNELS, N_SAMPLES)),
                    label=i % N_CLASSES, session_id=0) for i in range(6)]
    out = preprocess_sessions([Session(trials=trials, session_id=0)])
    ref = preprocess_sessions([Session(trials=trials, session_id=0)],
                              Preprocessor())
    np.testing.assert_array_equal(out[0].stacked(), ref[0].stacked())

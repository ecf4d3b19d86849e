"""Leave-one-session-out evaluation of decoding methods.

A subject is five recorded sessions. Each fold holds one session out for
testing and trains on the other four; train augmentation, when requested,
touches only the training side, and test-time score combination touches
only the held-out side. Fold identity is the test session id, and all
per-fold randomness derives from (seed, session id, component), so results
are invariant to the order sessions are passed in and to which other
methods run alongside.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentationSpec, combine_test_scores
from .data import Session, Trial
from .methods import DecodingMethod, ModelPool
from .preprocess import Preprocessor

N_FOLDS = 5

logger = logging.getLogger(__name__)


@dataclass
class FoldResult:
    """Per-fold outcomes of one method on one subject.

    Attributes
    ----------
    method : str
    test_sessions : tuple of int
        Test session id per fold, ascending.
    accuracies : np.ndarray
        (folds,) fraction of correctly labeled test trials.
    predictions, true_labels : list of np.ndarray
        Per-fold predicted and true labels.
    scores : list of np.ndarray
        Per-fold (n, classes) combined class scores.
    """

    method: str
    test_sessions: tuple[int, ...]
    accuracies: np.ndarray
    predictions: list = field(default_factory=list)
    true_labels: list = field(default_factory=list)
    scores: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean())

    @property
    def sd(self) -> float:
        return float(self.accuracies.std(ddof=1))


def preprocess_sessions(sessions: list[Session],
                        preprocessor: Preprocessor | None = None) -> list[Session]:
    """Detrend, band-pass, and spatially filter every trial once.

    Augmentation shifts preprocessed epochs, so filtering happens a single
    time per subject rather than per augmented copy.
    """
    pre = preprocessor if preprocessor is not None else Preprocessor()
    out = []
    for s in sessions:
        stack = pre.apply_batch(np.stack([t.data for t in s.trials]))
        trials = [Trial(data=stack[i], label=t.label, session_id=t.session_id)
                  for i, t in enumerate(s.trials)]
        out.append(Session(trials=trials, session_id=s.session_id))
    return out


def _stack(sessions: list[Session]) -> tuple[np.ndarray, np.ndarray]:
    trials = [t for s in sessions for t in s.trials]
    return (np.stack([t.data for t in trials]),
            np.array([t.label for t in trials], dtype=np.int64))


def run_experiment(methods: list[DecodingMethod], sessions: list[Session],
                   spec: AugmentationSpec, seed: int = 0, *,
                   cnn_config=None, siamese_config=None,
                   exemplars_per_class: int | None = None,
                   fold_hook=None) -> dict[str, FoldResult]:
    """Cross-validate several methods with shared per-fold training.

    Methods evaluated together reuse one :class:`ModelPool` per fold, so
    the four distance decoders share a single trained reconstruction
    network. Scores and accuracies are identical to running each method
    alone with the same seed.

    Parameters
    ----------
    methods : list of DecodingMethod
    sessions : list of Session
        Exactly five, with distinct session ids.
    spec : AugmentationSpec
    seed : int
        Base seed; per-fold seeds derive from it and the test session id.
    cnn_config, siamese_config : TrainConfig, optional
        Forwarded to the pool.
    exemplars_per_class : int, optional
        Forwarded to the pool.
    fold_hook : callable, optional
        Called after each fold as ``fold_hook(fold, test_session_id, pool,
        x_test, y_test)``; lets callers persist per-fold artifacts such as
        trained-network checkpoints.

    Returns
    -------
    dict
        Method name to :class:`FoldResult`.
    """
    if len(sessions) != N_FOLDS:
        raise ValueError(f"expected exactly {N_FOLDS} sessions, got {len(sessions)}")
    ids = [s.session_id for s in sessions]
    if len(set(ids)) != len(ids):
        raise ValueError(f"session ids must be distinct, got {ids}")
    ordered = sorted(sessions, key=lambda s: s.session_id)

    results = {m.name: FoldResult(method=m.name,
                                  test_sessions=tuple(s.session_id for s in ordered),
                                  accuracies=np.zeros(N_FOLDS))
               for m in methods}
    pool_kw = {}
    if cnn_config is not None:
        pool_kw["cnn_config"] = cnn_config
    if siamese_config is not None:
        pool_kw["siamese_config"] = siamese_config
    if exemplars_per_class is not None:
        pool_kw["exemplars_per_class"] = exemplars_per_class

    for k, test in enumerate(ordered):
        train = [s for s in ordered if s.session_id != test.session_id]
        x_tr, y_tr = _stack(train)
        x_te, y_te = _stack([test])
        pool = ModelPool(x_tr, y_tr, spec, (seed, test.session_id), **pool_kw)
        for m in methods:
            t0 = time.perf_counter()
            m.fit(pool)
            if spec.combines_test:
                scores = combine_test_scores(m.class_scores, x_te, spec)
            else:
                scores = m.class_scores(x_te)
            pred = scores.argmax(axis=1)
            r = results[m.name]
            r.accuracies[k] = float(np.mean(pred == y_te))
            r.predictions.append(pred)
            r.true_labels.append(y_te)
            r.scores.append(scores)
            logger.info("fold %d (session %d): %s accuracy %.4f in %.1fs",
                        k, test.session_id, m.name, r.accuracies[k],
                        time.perf_counter() - t0)
        if fold_hook is not None:
            fold_hook(k, test.session_id, pool, x_te, y_te)
    return results


def cross_validate(method: DecodingMethod, sessions: list[Session],
                   spec: AugmentationSpec, seed: int = 0,
                   **pool_kw) -> FoldResult:
    """Leave-one-session-out evaluation of a single method."""
    return run_experiment([method], sessions, spec, seed, **pool_kw)[method.name]

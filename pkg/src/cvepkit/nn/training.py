"""Training loops with validation-based early stopping.

All loops shuffle per epoch, track a validation metric, and return the
parameters of the best epoch (not the last). Training may stop before the
epoch cap when the metric has not improved for ``patience`` epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import BCEWithLogits, MSELoss, Parameter, Sequential, SoftmaxCrossEntropy
from .models import SiameseNetwork
from .optim import Adam


@dataclass
class TrainConfig:
    """Knobs shared by all training loops.

    Parameters
    ----------
    epochs : int
        Upper bound on training epochs.
    batch_size : int
        Minibatch size for the CNN heads.
    lr, weight_decay : float
        Adam step size and L2 coefficient.
    patience : int
        Epochs without validation improvement before stopping early.
    min_delta : float
        Smallest metric change that counts as an improvement.
    seed : int
        Seed for shuffling and pair sampling.
    val_fraction : float
        Per-class fraction of training data held out for validation.
    pair_batch : int
        Pairs per minibatch for Siamese training.
    pairs_per_epoch : int or None
        Pairs drawn per Siamese epoch; defaults to the training-set size.
    dtype : numpy dtype
        Compute dtype for inputs handed to the network.
    """

    epochs: int = 40
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 1e-4
    patience: int = 5
    min_delta: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.1
    pair_batch: int = 256
    pairs_per_epoch: int | None = None
    dtype: type = np.float32


def split_validation(labels: np.ndarray, fraction: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Hold out the earliest ``fraction`` of examples of each class.

    "Earliest" follows the given order, which for session data is recording
    order. At least one example per class goes to validation. The split is
    meant to run before any augmentation so augmented copies never leak into
    the validation set.

    Returns
    -------
    train_idx, val_idx : np.ndarray
        Disjoint index arrays covering ``range(len(labels))``.
    """
    labels = np.asarray(labels)
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    val = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        k = max(1, int(round(idx.size * fraction)))
        if k >= idx.size:
            raise ValueError(f"class {c} too small to split")
        val.append(idx[:k])
    val_idx = np.sort(np.concatenate(val))
    mask = np.ones(labels.size, dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


def _snapshot(params: list[Parameter]) -> list[np.ndarray]:
    return [p.value.copy() for p in params]


def _restore(params: list[Parameter], saved: list[np.ndarray]) -> None:
    for p, s in zip(params, saved):
        p.value[...] = s


def predict_batched(net: Sequential, x: np.ndarray, batch: int = 512) -> np.ndarray:
    """Inference-mode forward pass in batches, concatenated."""
    outs = [net.forward(x[i:i + batch], training=False)
            for i in range(0, x.shape[0], batch)]
    return np.concatenate(outs)


def _fit_epochs(cfg, n_train, run_epoch, evaluate, lower_is_better, params):
    """Shared early-stopping skeleton; returns the history dict."""
    rng = np.random.default_rng(cfg.seed)
    sign = 1.0 if lower_is_better else -1.0
    best_metric = np.inf
    best_params = _snapshot(params)
    best_epoch = 0
    history = {"train_loss": [], "val_metric": []}
    since_best = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        history["train_loss"].append(run_epoch(order, rng))
        metric = evaluate()
        history["val_metric"].append(metric)
        if sign * metric < best_metric - cfg.min_delta:
            best_metric = sign * metric
            best_params = _snapshot(params)
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    _restore(params, best_params)
    history["best_epoch"] = best_epoch
    history["epochs_run"] = len(history["train_loss"])
    history["best_metric"] = sign * best_metric
    return history


def train_regressor(net: Sequential, x_tr: np.ndarray, y_tr: np.ndarray,
                    x_val: np.ndarray, y_val: np.ndarray,
                    cfg: TrainConfig) -> dict:
    """Fit a bitwise regression network under MSE; monitors validation RMSE.

    Returns a history dict with per-epoch training loss, validation RMSE,
    the best epoch and the restored best metric.
    """
    x_tr = x_tr.astype(cfg.dtype, copy=False)
    x_val = x_val.astype(cfg.dtype, copy=False)
    y_tr = y_tr.astype(cfg.dtype, copy=False)
    loss = MSELoss()
    opt = Adam(net.params(), lr=cfg.lr, weight_decay=cfg.weight_decay)

    def run_epoch(order, rng):
        total = 0.0
        for s in range(0, order.size, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            opt.zero_grad()
            pred = net.forward(x_tr[idx], training=True)
            total += loss.forward(pred, y_tr[idx]) * idx.size
            net.backward(loss.backward())
            opt.step()
        return total / order.size

    def evaluate():
        pred = predict_batched(net, x_val)
        return float(np.sqrt(np.mean((pred - y_val) ** 2)))

    return _fit_epochs(cfg, x_tr.shape[0], run_epoch, evaluate,
                       lower_is_better=True, params=net.params())


def train_classifier(net: Sequential, x_tr: np.ndarray, labels_tr: np.ndarray,
                     x_val: np.ndarray, labels_val: np.ndarray,
                     cfg: TrainConfig) -> dict:
    """Fit the softmax classifier; monitors validation accuracy."""
    x_tr = x_tr.astype(cfg.dtype, copy=False)
    x_val = x_val.astype(cfg.dtype, copy=False)
    labels_tr = np.asarray(labels_tr, dtype=np.int64)
    labels_val = np.asarray(labels_val, dtype=np.int64)
    loss = SoftmaxCrossEntropy()
    opt = Adam(net.params(), lr=cfg.lr, weight_decay=cfg.weight_decay)

    def run_epoch(order, rng):
        total = 0.0
        for s in range(0, order.size, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            opt.zero_grad()
            logits = net.forward(x_tr[idx], training=True)
            total += loss.forward(logits, labels_tr[idx]) * idx.size
            net.backward(loss.backward())
            opt.step()
        return total / order.size

    def evaluate():
        logits = predict_batched(net, x_val)
        return float((logits.argmax(1) == labels_val).mean())

    return _fit_epochs(cfg, x_tr.shape[0], run_epoch, evaluate,
                       lower_is_better=False, params=net.params())


class PairSampler:
    """Balanced same/different pair sampler over labeled examples.

    Parameters
    ----------
    labels : np.ndarray
        Integer labels of the pool being sampled.
    rng : np.random.Generator
    positive_fraction : float
        Fraction of same-class pairs per batch. The decoding task needs
        balanced batches, so values outside [0.4, 0.6] are rejected as a
        configuration error.
    target_class : int, optional
        When set, every pair involves this class: positives are two of its
        examples, negatives pair one of its examples with another class.
        This is the regime for the per-class binary scorers.
    """

    def __init__(self, labels: np.ndarray, rng: np.random.Generator,
                 positive_fraction: float = 0.5, target_class: int | None = None):
        if not 0.4 <= positive_fraction <= 0.6:
            raise ValueError(
                f"positive_fraction {positive_fraction} outside [0.4, 0.6]; "
                "pair batches must stay balanced")
        self.labels = np.asarray(labels, dtype=np.int64)
        self.rng = rng
        self.positive_fraction = positive_fraction
        self.target_class = target_class
        values = np.unique(self.labels)
        self._by_class = [np.flatnonzero(self.labels == c) for c in values]
        if len(self._by_class) < 2:
            raise ValueError("pair sampling needs at least two classes")
        if target_class is None:
            if min(len(ix) for ix in self._by_class) < 2:
                raise ValueError("every class needs at least two examples")
            self._target = None
            self._others = None
        else:
            pos = np.flatnonzero(values == target_class)
            if pos.size == 0:
                raise ValueError(f"no examples of target class {target_class}")
            if len(self._by_class[pos[0]]) < 2:
                raise ValueError(
                    f"target class {target_class} needs at least two examples")
            self._target = self._by_class[pos[0]]
            self._others = np.flatnonzero(self.labels != target_class)

    def sample(self, n_pairs: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw ``n_pairs`` index pairs and their same-class targets."""
        n_pos = int(round(n_pairs * self.positive_fraction))
        left = np.empty(n_pairs, dtype=np.int64)
        right = np.empty(n_pairs, dtype=np.int64)
        if self._target is not None:
            for k in range(n_pos):
                left[k], right[k] = self.rng.choice(self._target, size=2,
                                                    replace=False)
            n_neg = n_pairs - n_pos
            left[n_pos:] = self.rng.choice(self._target, size=n_neg)
            right[n_pos:] = self.rng.choice(self._others, size=n_neg)
        else:
            classes = len(self._by_class)
            for k in range(n_pos):
                c = self.rng.integers(classes)
                i, j = self.rng.choice(self._by_class[c], size=2, replace=False)
                left[k], right[k] = i, j
            for k in range(n_pos, n_pairs):
                c1, c2 = self.rng.choice(classes, size=2, replace=False)
                left[k] = self.rng.choice(self._by_class[c1])
                right[k] = self.rng.choice(self._by_class[c2])
        targets = np.zeros(n_pairs)
        targets[:n_pos] = 1.0
        return left, right, targets


def train_siamese(model: SiameseNetwork, x_tr: np.ndarray, labels_tr: np.ndarray,
                  x_val: np.ndarray, labels_val: np.ndarray,
                  cfg: TrainConfig, target_class: int | None = None) -> dict:
    """Fit the Siamese scorer on balanced pairs.

    Each epoch draws fresh training pairs; the validation pair set is drawn
    once so the early-stopping signal is comparable across epochs. Early
    stopping monitors the validation pair error rate, matching the
    classifier loop; the cross-entropy keeps shrinking long after the
    decisions stop changing, so it makes a poor stopping signal. With
    ``target_class`` set, pairs follow the binary per-class regime (see
    :class:`PairSampler`).
    """
    x_tr = x_tr.astype(cfg.dtype, copy=False)
    x_val = x_val.astype(cfg.dtype, copy=False)
    loss = BCEWithLogits()
    opt = Adam(model.params(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    sampler = PairSampler(labels_tr, np.random.default_rng(cfg.seed + 1),
                          target_class=target_class)
    val_sampler = PairSampler(labels_val, np.random.default_rng(cfg.seed + 2),
                              target_class=target_class)
    n_val_pairs = min(512, max(64, 2 * labels_val.size))
    vl, vr, vt = val_sampler.sample(n_val_pairs)
    pairs_per_epoch = cfg.pairs_per_epoch or x_tr.shape[0]

    def run_epoch(order, rng):
        total = 0.0
        drawn = 0
        while drawn < pairs_per_epoch:
            n = min(cfg.pair_batch, pairs_per_epoch - drawn)
            li, ri, t = sampler.sample(n)
            opt.zero_grad()
            logits = model.forward_pairs(x_tr[li], x_tr[ri], training=True)
            total += loss.forward(logits, t) * n
            model.backward(loss.backward())
            opt.step()
            drawn += n
        return total / drawn

    def evaluate():
        logits = []
        for s in range(0, n_val_pairs, cfg.pair_batch):
            logits.append(model.forward_pairs(x_val[vl[s:s + cfg.pair_batch]],
                                              x_val[vr[s:s + cfg.pair_batch]]))
        z = np.concatenate(logits)
        return float(np.mean((z > 0).astype(np.float64) != vt))

    return _fit_epochs(cfg, x_tr.shape[0], run_epoch, evaluate,
                       lower_is_better=True, params=model.params())

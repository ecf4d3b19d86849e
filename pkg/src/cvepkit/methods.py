"""The nine decoding methods behind a common fit/score interface.

Every method exposes ``fit(pool)`` and ``class_scores(x) -> (n, 6)`` where
higher scores mean more likely; distance-based deciders return negated
distances so argmax semantics are uniform and test-time score averaging
composes across methods. A :class:`ModelPool` owns the per-fold training
work and is shared, so the four distance evaluations reuse one trained
bit-reconstruction network instead of training four.
"""

from __future__ import annotations

from dataclasses import replace
from functools import cached_property

import numpy as np
from scipy.special import expit

from .augment import AugmentationSpec, augment_train
from .blda import blda_scores, fit_blda
from .codes import N_CLASSES, class_codewords
from .decode import (constrained_emd_decode, emd_decode, euclidean_decode,
                     mahalanobis_decode, shrinkage_covariance)
from .features import cca_features, correlation_features, templates_from_arrays
from .nn import (SoftmaxCrossEntropy, TrainConfig, build_class_network,
                 build_kbit_network, build_siamese_network, predict_batched,
                 split_validation, train_classifier, train_regressor,
                 train_siamese)

METHOD_NAMES = ("corr_blda", "cca_blda", "cnn_euclidean", "cnn_mahalanobis",
                "cnn_emd", "cnn_cemd", "cnn_class", "siamese_multiclass",
                "siamese_multimodel")

EXEMPLARS_PER_CLASS = 10

_EMBED_BATCH = 256

# Stable per-component tags appended to the fold seed so that training one
# component never perturbs another's randomness.
_TAGS = {"kbit": 1, "class": 2, "siamese": 3, "exemplars": 4}
_TAG_SIAMESE_BINARY = 16


class UnknownMethodError(ValueError):
    """Raised for a method name outside the registry."""

    def __init__(self, name: str):
        super().__init__(
            f"unknown method {name!r}; valid names: {', '.join(METHOD_NAMES)}")
        self.name = name


class ModelPool:
    """Lazily trained models shared by all methods within one fold.

    Parameters
    ----------
    x_train : np.ndarray
        (n, channels, samples) preprocessed training epochs.
    y_train : np.ndarray
        (n,) integer labels.
    spec : AugmentationSpec
        Train augmentation is applied here (after the validation split, so
        validation trials stay unshifted); test combination is the caller's
        job.
    seed_key : tuple of int
        Identifies the fold (base seed plus test-session id); every
        trained component derives its own seed from it and a fixed tag, so
        results do not depend on which methods run or in what order.
    cnn_config, siamese_config : TrainConfig, optional
        Training knobs; defaults are 40-epoch/batch-64 for the CNN heads
        and 30-epoch/256-pair batches for the pair scorers.
    exemplars_per_class : int
        Reference trials per class drawn (without replacement) for
        similarity scoring.
    """

    def __init__(self, x_train: np.ndarray, y_train: np.ndarray,
                 spec: AugmentationSpec, seed_key: tuple[int, ...], *,
                 cnn_config: TrainConfig | None = None,
                 siamese_config: TrainConfig | None = None,
                 exemplars_per_class: int = EXEMPLARS_PER_CLASS):
        self._x = np.asarray(x_train, dtype=np.float64)
        self._y = np.asarray(y_train, dtype=np.int64)
        if self._x.ndim != 3 or self._x.shape[0] != self._y.shape[0]:
            raise ValueError("x_train must be (n, channels, samples) matching labels")
        self._spec = spec
        self._seed_key = tuple(int(v) for v in seed_key)
        self._cnn_cfg = cnn_config if cnn_config is not None else TrainConfig()
        self._siam_cfg = (siamese_config if siamese_config is not None
                          else TrainConfig(epochs=30))
        self._m = int(exemplars_per_class)
        self.codewords = class_codewords().astype(np.float64)
        self.history: dict[str, dict] = {}

    def _seeds(self, *tag: int, n: int = 2) -> list[int]:
        ss = np.random.SeedSequence(self._seed_key + tag)
        state = ss.generate_state(n, np.uint64)
        return [int(s >> np.uint64(1)) for s in state]

    @cached_property
    def _blda_set(self) -> tuple[np.ndarray, np.ndarray]:
        if self._spec.augments_train:
            return augment_train(self._x, self._y, self._spec)
        return self._x, self._y

    @cached_property
    def templates(self) -> np.ndarray:
        xb, yb = self._blda_set
        return templates_from_arrays(xb, yb)

    @cached_property
    def corr_model(self):
        xb, yb = self._blda_set
        return fit_blda(correlation_features(xb, self.templates), yb)

    @cached_property
    def cca_model(self):
        xb, yb = self._blda_set
        return fit_blda(cca_features(xb, self.templates), yb)

    @cached_property
    def _nn_data(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        tr, va = split_validation(self._y, self._cnn_cfg.val_fraction)
        xf, yf = self._x[tr], self._y[tr]
        if self._spec.augments_train:
            xf, yf = augment_train(xf, yf, self._spec)
        return (xf.astype(np.float32), yf,
                self._x[va].astype(np.float32), self._y[va])

    @cached_property
    def kbit_net(self):
        xf, yf, xv, yv = self._nn_data
        net_seed, train_seed = self._seeds(_TAGS["kbit"])
        net = build_kbit_network(net_seed)
        cfg = replace(self._cnn_cfg, seed=train_seed)
        self.history["kbit"] = train_regressor(
            net, xf, self.codewords[yf].astype(np.float32),
            xv, self.codewords[yv].astype(np.float32), cfg)
        return net

    def kbit_predict(self, x: np.ndarray) -> np.ndarray:
        """Reconstructed 63-bit patterns for a batch of epochs."""
        out = predict_batched(self.kbit_net, np.asarray(x, dtype=np.float32))
        return out.astype(np.float64)

    @cached_property
    def train_covariance(self) -> np.ndarray:
        """Shrinkage covariance of reconstructions on the training epochs."""
        return shrinkage_covariance(self.kbit_predict(self._x))

    @cached_property
    def class_net(self):
        xf, yf, xv, yv = self._nn_data
        net_seed, train_seed = self._seeds(_TAGS["class"])
        net = build_class_network(net_seed)
        cfg = replace(self._cnn_cfg, seed=train_seed)
        self.history["class"] = train_classifier(net, xf, yf, xv, yv, cfg)
        return net

    @cached_property
    def siamese_net(self):
        xf, yf, xv, yv = self._nn_data
        net_seed, train_seed = self._seeds(_TAGS["siamese"])
        net = build_siamese_network(net_seed)
        cfg = replace(self._siam_cfg, seed=train_seed)
        self.history["siamese"] = train_siamese(net, xf, yf, xv, yv, cfg)
        return net

    @cached_property
    def siamese_models(self) -> list:
        xf, yf, xv, yv = self._nn_data
        # Each binary scorer works a single class, so it gets a third of
        # the generic per-epoch pair budget; the six models together still
        # see twice the pairs of the multiclass scorer.
        pairs = self._siam_cfg.pairs_per_epoch or max(1, -(-xf.shape[0] // 3))
        models = []
        for c in range(N_CLASSES):
            net_seed, train_seed = self._seeds(_TAG_SIAMESE_BINARY, c)
            net = build_siamese_network(net_seed)
            cfg = replace(self._siam_cfg, seed=train_seed, pairs_per_epoch=pairs)
            self.history[f"siamese_bin{c}"] = train_siamese(
                net, xf, yf, xv, yv, cfg, target_class=c)
            models.append(net)
        return models

    @cached_property
    def exemplars(self) -> np.ndarray:
        """(classes, m, channels, samples) reference trials, seed-determined."""
        rng = np.random.default_rng(self._seeds(_TAGS["exemplars"], n=1)[0])
        picks = []
        for c in range(N_CLASSES):
            idx = np.flatnonzero(self._y == c)
            if idx.size < self._m:
                raise ValueError(
                    f"class {c} has {idx.size} training trials; "
                    f"similarity scoring needs {self._m} exemplars")
            picks.append(self._x[rng.choice(idx, size=self._m, replace=False)])
        return np.stack(picks).astype(np.float32)


class DecodingMethod:
    """Interface: fit against a fold's pool, then score epoch batches."""

    name = ""

    def fit(self, pool: ModelPool):
        raise NotImplementedError

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        """Per-class scores (n, classes); higher means more likely."""
        raise NotImplementedError

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax labels; ties resolve to the lowest class index."""
        return self.class_scores(x).argmax(axis=1)


class CorrBldaMethod(DecodingMethod):
    name = "corr_blda"

    def fit(self, pool: ModelPool):
        self._templates = pool.templates
        self._model = pool.corr_model

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        feats = correlation_features(np.asarray(x, dtype=np.float64),
                                     self._templates)
        return blda_scores(self._model, feats)


class CcaBldaMethod(DecodingMethod):
    name = "cca_blda"

    def fit(self, pool: ModelPool):
        self._templates = pool.templates
        self._model = pool.cca_model

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        feats = cca_features(np.asarray(x, dtype=np.float64), self._templates)
        return blda_scores(self._model, feats)


class _KbitDistanceMethod(DecodingMethod):
    def fit(self, pool: ModelPool):
        self._pool = pool
        self._codewords = pool.codewords
        self._net = pool.kbit_net

    def _distances(self, outputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        return -self._distances(self._pool.kbit_predict(x))


class CnnEuclideanMethod(_KbitDistanceMethod):
    name = "cnn_euclidean"

    def _distances(self, outputs: np.ndarray) -> np.ndarray:
        return euclidean_decode(outputs, self._codewords)[0]


class CnnMahalanobisMethod(_KbitDistanceMethod):
    """Shrinkage-Mahalanobis decoding of bit reconstructions.

    Parameters
    ----------
    transductive : bool
        With the default True the covariance is estimated from the scored
        batch itself (the evaluation set); False uses the covariance of
        the training reconstructions. Batches of fewer than two epochs
        always use the training covariance.
    """

    name = "cnn_mahalanobis"

    def __init__(self, transductive: bool = True):
        self.transductive = transductive

    def _distances(self, outputs: np.ndarray) -> np.ndarray:
        if self.transductive and outputs.shape[0] >= 2:
            cov = shrinkage_covariance(outputs)
        else:
            cov = self._pool.train_covariance
        return mahalanobis_decode(outputs, self._codewords, cov)[0]


class CnnEmdMethod(_KbitDistanceMethod):
    name = "cnn_emd"

    def _distances(self, outputs: np.ndarray) -> np.ndarray:
        return emd_decode(outputs, self._codewords)[0]


class CnnCemdMethod(_KbitDistanceMethod):
    """Band-constrained transport decoding; the radius is mandatory."""

    name = "cnn_cemd"

    def __init__(self, radius: int):
        if radius is None or int(radius) < 0:
            raise ValueError("cnn_cemd needs a transport radius >= 0")
        self.radius = int(radius)

    def _distances(self, outputs: np.ndarray) -> np.ndarray:
        return constrained_emd_decode(outputs, self._codewords, self.radius)[0]


class CnnClassMethod(DecodingMethod):
    name = "cnn_class"

    def fit(self, pool: ModelPool):
        self._net = pool.class_net

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        logits = predict_batched(self._net, np.asarray(x, dtype=np.float32))
        return SoftmaxCrossEntropy.probabilities(logits)


def _pair_scores(net, embedded: np.ndarray, exemplar_embed: np.ndarray) -> np.ndarray:
    """Mean similarity of each embedded epoch against exemplar embeddings."""
    diff = np.abs(embedded[:, None, :] - exemplar_embed[None, :, :])
    logits = net.head.forward(diff.reshape(-1, diff.shape[-1]))[:, 0]
    sims = expit(logits).reshape(embedded.shape[0], -1)
    return sims.mean(axis=1)


class SiameseMulticlassMethod(DecodingMethod):
    """One shared pair scorer; classes compete via exemplar similarity."""

    name = "siamese_multiclass"

    def fit(self, pool: ModelPool):
        self._net = pool.siamese_net
        ex = pool.exemplars
        flat = ex.reshape(-1, *ex.shape[2:])
        emb = predict_batched(self._net.embed, flat, _EMBED_BATCH)
        self._exemplar_embed = emb.reshape(ex.shape[0], ex.shape[1], -1)

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        e = predict_batched(self._net.embed, np.asarray(x, dtype=np.float32),
                            _EMBED_BATCH)
        cols = [_pair_scores(self._net, e, self._exemplar_embed[c])
                for c in range(self._exemplar_embed.shape[0])]
        return np.stack(cols, axis=1)


class SiameseMultimodelMethod(DecodingMethod):
    """Six binary pair scorers, each judging similarity to its own class."""

    name = "siamese_multimodel"

    def fit(self, pool: ModelPool):
        self._models = pool.siamese_models
        ex = pool.exemplars
        self._exemplar_embed = [
            self._models[c].embed_forward(ex[c]) for c in range(len(self._models))]

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        x32 = np.asarray(x, dtype=np.float32)
        cols = []
        for c, net in enumerate(self._models):
            e = predict_batched(net.embed, x32, _EMBED_BATCH)
            cols.append(_pair_scores(net, e, self._exemplar_embed[c]))
        return np.stack(cols, axis=1)


def make_method(name: str, *, radius: int | None = None,
                transductive: bool = True) -> DecodingMethod:
    """Instantiate a registry method by name.

    Parameters
    ----------
    name : str
        One of :data:`METHOD_NAMES`.
    radius : int, optional
        Transport band radius; required by ``cnn_cemd`` and ignored by
        every other method.
    transductive : bool
        Covariance source for ``cnn_mahalanobis``.

    Raises
    ------
    UnknownMethodError
        For a name outside the registry.
    ValueError
        For ``cnn_cemd`` without a radius.
    """
    if name == "cnn_cemd":
        if radius is None:
            raise ValueError("cnn_cemd requires a transport radius (no default)")
        return CnnCemdMethod(radius)
    simple = {
        "corr_blda": CorrBldaMethod,
        "cca_blda": CcaBldaMethod,
        "cnn_euclidean": CnnEuclideanMethod,
        "cnn_emd": CnnEmdMethod,
        "cnn_class": CnnClassMethod,
        "siamese_multiclass": SiameseMulticlassMethod,
        "siamese_multimodel": SiameseMultimodelMethod,
    }
    if name == "cnn_mahalanobis":
        return CnnMahalanobisMethod(transductive)
    if name not in simple:
        raise UnknownMethodError(name)
    return simple[name]()


def make_methods(names, *, radius: int | None = None,
                 transductive: bool = True) -> list[DecodingMethod]:
    """Instantiate several methods, validating every name first."""
    return [make_method(n, radius=radius, transductive=transductive)
            for n in names]

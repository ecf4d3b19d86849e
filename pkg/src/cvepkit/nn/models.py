"""Network constructors for the three neural decoders.

All three share one convolutional feature extractor over single-trial
epochs shaped ``(batch, channels, samples)``: a spatial stage mixing the
electrode channels per timepoint, two temporal convolution blocks with
max pooling and dropout, and an adaptive max pool onto one time bin per
code bit. The heads differ: a 63-unit sigmoid regressor predicting the
bit pattern, a 6-unit softmax classifier, and a siamese pair scorer on
the absolute difference of two embeddings.
"""

from __future__ import annotations

import numpy as np

from .layers import (AdaptiveMaxPoolTime, BCEWithLogits, Dense, Dropout,
                     Flatten, Layer, MaxPoolTime, Parameter, ReLU, Sequential,
                     Sigmoid, TemporalConv, ToTimeMajor)

EMBED_INPUT = 63 * 32


def _spawn(rng: np.random.Generator) -> np.random.Generator:
    return np.random.default_rng(int(rng.integers(2 ** 63)))


def build_extractor(rng: np.random.Generator, dtype=np.float32) -> list[Layer]:
    """Layers mapping ``(batch, 8, 538)`` trials to 2016 features.

    The spatial stage is a per-timepoint linear map across the 8 input
    channels (8 maps, 72 parameters), followed by 16 temporal filters of
    width 11 and 32 of width 14, each with halving max pools, then an
    adaptive max pool onto 63 bins. Dropout draws come from generators
    spawned off ``rng`` so construction order fixes all randomness.
    """
    return [
        ToTimeMajor(),
        Dense(8, 8, rng, dtype),
        TemporalConv(8, 16, 11, rng, dtype),
        ReLU(),
        MaxPoolTime(2),
        Dropout(0.2, _spawn(rng)),
        TemporalConv(16, 32, 14, rng, dtype),
        ReLU(),
        MaxPoolTime(2),
        Dropout(0.3, _spawn(rng)),
        AdaptiveMaxPoolTime(63),
        Flatten(),
    ]


def build_kbit_network(seed: int, dtype=np.float32) -> Sequential:
    """Bit-pattern regressor: extractor plus a 63-unit sigmoid head."""
    rng = np.random.default_rng(seed)
    layers = build_extractor(rng, dtype)
    layers.append(Dense(EMBED_INPUT, 63, rng, dtype))
    layers.append(Sigmoid())
    return Sequential(layers)


def build_class_network(seed: int, dtype=np.float32) -> Sequential:
    """Direct classifier: extractor plus a 6-unit linear head."""
    rng = np.random.default_rng(seed)
    layers = build_extractor(rng, dtype)
    layers.append(Dense(EMBED_INPUT, 6, rng, dtype))
    return Sequential(layers)


class SiameseNetwork:
    """Twin embedding network scoring whether two trials share a class.

    Both inputs pass through one shared embedding tower (the extractor
    with a 63-unit linear head); the score is a dense layer on the
    absolute difference of the two embeddings. ``forward_pairs`` runs the
    twins as one concatenated batch so the shared tower accumulates both
    gradient contributions naturally.
    """

    def __init__(self, seed: int, dtype=np.float32):
        rng = np.random.default_rng(seed)
        layers = build_extractor(rng, dtype)
        layers.append(Dense(EMBED_INPUT, 63, rng, dtype))
        self.embed = Sequential(layers)
        self.head = Dense(63, 1, rng, dtype)
        self.loss = BCEWithLogits()

    def params(self) -> list[Parameter]:
        return self.embed.params() + self.head.params()

    def embed_forward(self, x: np.ndarray) -> np.ndarray:
        """Embeddings for inference; no caches are kept."""
        return self.embed.forward(x, training=False)

    def head_logits(self, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
        """Pair logits from precomputed embeddings (inference only)."""
        return self.head.forward(np.abs(e1 - e2), training=False)[:, 0]

    def forward_pairs(self, x1: np.ndarray, x2: np.ndarray,
                      training: bool = False) -> np.ndarray:
        both = self.embed.forward(np.concatenate([x1, x2], axis=0), training)
        n = x1.shape[0]
        e1, e2 = both[:n], both[n:]
        diff = e1 - e2
        if training:
            self._pair_cache = (n, np.sign(diff))
        return self.head.forward(np.abs(diff), training)[:, 0]

    def backward(self, dlogits: np.ndarray):
        n, sign = self._pair_cache
        self._pair_cache = None
        dabs = self.head.backward(dlogits[:, None])
        ddiff = dabs * sign
        self.embed.backward(np.concatenate([ddiff, -ddiff], axis=0))


def build_siamese_network(seed: int, dtype=np.float32) -> SiameseNetwork:
    return SiameseNetwork(seed, dtype)


def count_parameters(net) -> int:
    """Total trainable scalars in a layer, layer list, or siamese net."""
    if isinstance(net, SiameseNetwork):
        params = net.params()
    elif isinstance(net, Layer):
        params = net.params()
    else:
        params = [p for layer in net for p in layer.params()]
    return sum(p.value.size for p in params)

"""Minimal CNN stack for code-locked EEG decoding.

Implements exactly the layers the decoding architectures need, in numpy,
with time-major GEMM convolutions and explicit backward passes. Kept
dtype-generic so training runs in float32 while gradient checks run in
float64.
"""

from .layers import (AdaptiveMaxPoolTime, BCEWithLogits, Dense, Dropout,
                     Flatten, Layer, MaxPoolTime, MSELoss, Parameter, ReLU,
                     Sequential, Sigmoid, SoftmaxCrossEntropy, TemporalConv,
                     ToTimeMajor)
from .models import (EMBED_INPUT, SiameseNetwork, build_class_network,
                     build_extractor, build_kbit_network,
                     build_siamese_network, count_parameters)
from .optim import Adam
from .training import (PairSampler, TrainConfig, predict_batched,
                       split_validation, train_classifier, train_regressor,
                       train_siamese)

__all__ = [
    "AdaptiveMaxPoolTime", "BCEWithLogits", "Dense", "Dropout", "Flatten",
    "Layer", "MaxPoolTime", "MSELoss", "Parameter", "ReLU", "Sequential",
    "Sigmoid", "SoftmaxCrossEntropy", "TemporalConv", "ToTimeMajor",
    "EMBED_INPUT", "SiameseNetwork", "build_class_network", "build_extractor",
    "build_kbit_network", "build_siamese_network", "count_parameters", "Adam",
    "PairSampler", "TrainConfig", "predict_batched", "split_validation",
    "train_classifier", "train_regressor", "train_siamese",
]

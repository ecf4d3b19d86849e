"""Template-based feature extraction: cross-channel correlations and CCA.

Both feature families compare a trial against per-class template epochs
(the mean of the training trials of each class). Correlation features keep
all trial-channel by template-channel Pearson coefficients; CCA features
keep the leading canonical correlations between trial and template treated
as multichannel signals.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from .codes import N_CLASSES
from .data import Trial

logger = logging.getLogger(__name__)

#: Ridge added to covariance diagonals before whitening in CCA.
CCA_RIDGE = 1e-8

#: Canonical correlations kept per class before zero padding.
CCA_KEEP = 7


def templates_from_arrays(stack: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Average stacked epochs into per-class template epochs.

    Parameters
    ----------
    stack : np.ndarray
        (n, channels, samples) epochs.
    labels : np.ndarray
        (n,) class labels.

    Returns
    -------
    np.ndarray
        (classes, channels, samples) float64 array.

    Raises
    ------
    ValueError
        If any class has no trials.
    """
    stack = np.asarray(stack, dtype=np.float64)
    labels = np.asarray(labels)
    if stack.ndim != 3 or stack.shape[0] != labels.shape[0]:
        raise ValueError("stack must be (n, channels, samples) matching labels")
    counts = np.bincount(labels, minlength=N_CLASSES)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"no training trials for classes {missing.tolist()}")
    sums = np.zeros((N_CLASSES,) + stack.shape[1:])
    np.add.at(sums, labels, stack)
    return sums / counts[:, None, None]


def build_templates(trials: list[Trial]) -> np.ndarray:
    """Average training trials into per-class template epochs.

    Parameters
    ----------
    trials : list of Trial

    Returns
    -------
    np.ndarray
        (classes, channels, samples) float64 array.

    Raises
    ------
    ValueError
        If any class has no trials.
    """
    if not trials:
        raise ValueError("cannot build templates from an empty trial list")
    return templates_from_arrays(np.stack([t.data for t in trials]),
                                 np.array([t.label for t in trials]))


def _zscore_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Z-score along the last axis; returns (z, valid mask for nonzero sd)."""
    mean = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    valid = sd[..., 0] > 0
    z = (x - mean) / np.where(sd > 0, sd, 1.0)
    z[~valid] = 0.0
    return z, valid


def correlation_features(stack: np.ndarray, templates: np.ndarray) -> np.ndarray:
    """All trial-channel by template-channel Pearson correlations.

    Feature ``c * ch^2 + s * ch + u`` of a trial is the correlation between
    trial channel ``s`` and channel ``u`` of the class-``c`` template. Pairs
    involving a zero-variance signal get feature value 0 (and are counted in
    a log record), keeping the vector finite.

    Parameters
    ----------
    stack : np.ndarray
        (n, channels, samples) trials, or a single (channels, samples) epoch.
    templates : np.ndarray
        (classes, channels, samples) template bank.

    Returns
    -------
    np.ndarray
        (n, classes * channels^2) float64 features; 1-D for a single epoch.
    """
    single = stack.ndim == 2
    stack = np.asarray(stack, dtype=np.float64)
    if single:
        stack = stack[None]
    n, ch, ns = stack.shape
    zt, tvalid = _zscore_rows(stack)
    zm, mvalid = _zscore_rows(np.asarray(templates, dtype=np.float64))
    feats = np.einsum("nst,cut->ncsu", zt, zm) / ns
    degenerate = (~tvalid).sum() * zm.shape[0] * ch + (~mvalid).sum() * n * ch
    if degenerate:
        logger.warning("zero-variance signals produced %d zeroed correlations",
                       int(degenerate))
    feats = feats.reshape(n, -1)
    return feats[0] if single else feats


def canonical_correlations(x: np.ndarray, y: np.ndarray,
                           ridge: float = CCA_RIDGE) -> np.ndarray:
    """Canonical correlations between two multivariate signals.

    Columns are variables, rows are observations. Covariances get ``ridge``
    added to their diagonals before whitening, which keeps the computation
    defined for rank-deficient signals at the cost of slightly shrinking the
    reported correlations.

    Returns
    -------
    np.ndarray
        min(dx, dy) values in [0, 1], descending.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y need the same number of observations")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    xc = x - x.mean(0)
    yc = y - y.mean(0)
    cxx = xc.T @ xc / (n - 1) + ridge * np.eye(x.shape[1])
    cyy = yc.T @ yc / (n - 1) + ridge * np.eye(y.shape[1])
    cxy = xc.T @ yc / (n - 1)

    def inv_sqrt(c: np.ndarray) -> np.ndarray:
        vals, vecs = linalg.eigh(c)
        vals = np.maximum(vals, np.finfo(np.float64).tiny)
        return (vecs / np.sqrt(vals)) @ vecs.T

    m = inv_sqrt(cxx) @ cxy @ inv_sqrt(cyy)
    return np.clip(linalg.svdvals(m), 0.0, 1.0)


def cca_features(stack: np.ndarray, templates: np.ndarray,
                 keep: int = CCA_KEEP) -> np.ndarray:
    """Leading canonical correlations against each class template.

    Per class the first ``keep`` canonical correlations (descending) are
    retained and the block is zero-padded to ``channels`` entries, giving
    ``classes * channels`` features per trial.

    Parameters
    ----------
    stack : np.ndarray
        (n, channels, samples) trials or one (channels, samples) epoch.
    templates : np.ndarray
        (classes, channels, samples) template bank.
    keep : int
        Correlations kept per class before padding.

    Returns
    -------
    np.ndarray
        (n, classes * channels) float64 features; 1-D for a single epoch.
    """
    single = stack.ndim == 2
    stack = np.asarray(stack, dtype=np.float64)
    if single:
        stack = stack[None]
    n_classes, ch, _ = templates.shape
    out = np.zeros((stack.shape[0], n_classes * ch))
    for c in range(n_classes):
        tmpl = templates[c].T
        for i, trial in enumerate(stack):
            rho = canonical_correlations(trial.T, tmpl)
            k = min(keep, rho.size)
            out[i, c * ch:c * ch + k] = rho[:k]
    return out[0] if single else out

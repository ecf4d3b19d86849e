"""Bayesian linear discriminant analysis with evidence-based regularization.

One ridge-regression head per class is fit to +/-1 one-vs-rest targets. The
ridge strength is not a free parameter: per head, the weight prior precision
``alpha`` and noise precision ``beta`` are iterated to a fixed point of the
marginal-likelihood (evidence) equations using the effective number of
well-determined parameters. A single eigendecomposition of the augmented
Gram matrix is shared by all heads and all iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .codes import N_CLASSES

#: Relative change of both precisions below which iteration stops.
CONVERGENCE_TOL = 1e-4

#: Hard cap on fixed-point iterations per head.
MAX_ITER = 100

_BETA_CAP = 1e12
_RESID_FLOOR = 1e-12


@dataclass
class BldaModel:
    """Fitted one-vs-rest Bayesian LDA.

    Attributes
    ----------
    weights : np.ndarray
        (d + 1, classes) array; the last row is the bias.
    alpha, beta : np.ndarray
        Final prior and noise precisions per head.
    n_iter : np.ndarray
        Iterations used per head.
    evidence : list of np.ndarray
        Per-head log-evidence trace, one value per iteration.
    """

    weights: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    n_iter: np.ndarray
    evidence: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0] - 1


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    return np.hstack([x, np.ones((x.shape[0], 1))])


def fit_blda(x: np.ndarray, labels: np.ndarray,
             max_iter: int = MAX_ITER, tol: float = CONVERGENCE_TOL,
             fixed_alpha: float | None = None,
             fixed_beta: float | None = None) -> BldaModel:
    """Fit the one-vs-rest Bayesian LDA.

    Parameters
    ----------
    x : np.ndarray
        (n, d) feature matrix.
    labels : np.ndarray
        Integer class labels in ``0 .. 5``.
    max_iter : int
        Iteration cap per head.
    tol : float
        Relative-change threshold on both precisions for convergence.
    fixed_alpha, fixed_beta : float, optional
        Freeze a precision at the given value instead of updating it. Mainly
        for diagnostics; evidence is still tracked.

    Returns
    -------
    BldaModel

    Raises
    ------
    ValueError
        On non-finite features, fewer than 2 examples, single-valued labels
        or a class with no examples.
    """
    xa = _augment(x)
    labels = np.asarray(labels, dtype=np.int64)
    n, d = xa.shape
    if n < 2:
        raise ValueError("need at least 2 training examples")
    if np.unique(labels).size < 2:
        raise ValueError("labels are all identical; nothing to separate")
    counts = np.bincount(labels, minlength=N_CLASSES)
    if (counts == 0).any():
        missing = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"no training examples for classes {missing}")

    gram = xa.T @ xa
    evals, evecs = linalg.eigh(gram)
    evals = np.maximum(evals, 0.0)
    xty_eig = evecs.T @ xa.T  # (d, n); per-head projections via one matmul

    weights = np.zeros((d, N_CLASSES))
    alphas = np.zeros(N_CLASSES)
    betas = np.zeros(N_CLASSES)
    iters = np.zeros(N_CLASSES, dtype=np.int64)
    traces = []

    for c in range(N_CLASSES):
        y = np.where(labels == c, 1.0, -1.0)
        z = xty_eig @ y
        yty = float(y @ y)
        alpha = 1.0 if fixed_alpha is None else float(fixed_alpha)
        beta = (1.0 / max(y.var(), _RESID_FLOOR)) if fixed_beta is None else float(fixed_beta)
        trace = []
        m_eig = np.zeros(d)
        for it in range(1, max_iter + 1):
            gain = beta / (alpha + beta * evals)
            m_eig = gain * z
            mtm = float(m_eig @ m_eig)
            resid = yty - 2.0 * float(m_eig @ z) + float((evals * m_eig) @ m_eig)
            resid = max(resid, _RESID_FLOOR * n)
            gamma = float(np.sum(beta * evals / (alpha + beta * evals)))
            trace.append(0.5 * (d * np.log(alpha) + n * np.log(beta)
                                - beta * resid - alpha * mtm
                                - np.sum(np.log(alpha + beta * evals))
                                - n * np.log(2.0 * np.pi)))
            alpha_new = alpha if fixed_alpha is not None else gamma / max(mtm, _RESID_FLOOR)
            beta_new = beta if fixed_beta is not None else min((n - gamma) / resid, _BETA_CAP)
            moved = max(abs(alpha_new - alpha) / alpha, abs(beta_new - beta) / beta)
            alpha, beta = alpha_new, beta_new
            if moved < tol:
                break
        weights[:, c] = evecs @ m_eig
        alphas[c] = alpha
        betas[c] = beta
        iters[c] = it
        traces.append(np.asarray(trace))

    return BldaModel(weights=weights, alpha=alphas, beta=betas,
                     n_iter=iters, evidence=traces)


def blda_scores(model: BldaModel, x: np.ndarray) -> np.ndarray:
    """Linear discriminant scores, one column per class."""
    xa = _augment(x)
    if xa.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"expected {model.weights.shape[0] - 1} features, got {xa.shape[1] - 1}")
    return xa @ model.weights


def blda_predict(model: BldaModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class labels and softmax confidences.

    Returns
    -------
    labels : np.ndarray
        Argmax class per example.
    confidence : np.ndarray
        (n, classes) rows summing to one; a shifted softmax over the scores.
    """
    scores = blda_scores(model, x)
    shifted = scores - scores.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    conf = expd / expd.sum(axis=1, keepdims=True)
    return scores.argmax(axis=1), conf

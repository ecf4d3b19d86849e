"""Nonparametric comparison of decoding methods across subjects.

The comparison protocol is a Friedman test on per-subject mean accuracies
(mid-ranks on ties), Kendall's W as the effect size, and post-hoc pairwise
Wilcoxon signed-rank tests under a Bonferroni-adjusted threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as chi2_dist
from scipy.stats import norm, rankdata

EXACT_LIMIT = 25


@dataclass(frozen=True)
class FriedmanResult:
    """Friedman test outcome.

    Attributes
    ----------
    chi2 : float
        Test statistic on ``df`` degrees of freedom.
    df : int
    p_value : float
        Upper-tail chi-square probability.
    kendall_w : float
        Concordance in [0, 1]; ``chi2 / (n_subjects * (k - 1))``.
    mean_ranks : np.ndarray
        (methods,) average mid-rank per method; higher accuracy ranks higher.
    """

    chi2: float
    df: int
    p_value: float
    kendall_w: float
    mean_ranks: np.ndarray


def friedman_test(accuracies: np.ndarray) -> FriedmanResult:
    """Friedman rank test over a subjects-by-methods accuracy matrix.

    Parameters
    ----------
    accuracies : np.ndarray
        (subjects, methods) scores; each row is ranked independently with
        mid-ranks on ties, so any strictly monotone transform of a row
        leaves the statistic unchanged.

    Returns
    -------
    FriedmanResult

    Raises
    ------
    ValueError
        With fewer than two subjects or two methods.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 2:
        raise ValueError("accuracy matrix must be 2-D (subjects x methods)")
    n, k = acc.shape
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 subjects and 2 methods, got {n}x{k}")
    ranks = np.apply_along_axis(rankdata, 1, acc)
    return friedman_from_ranks(ranks.mean(axis=0), n)


def friedman_from_ranks(mean_ranks: np.ndarray, n_subjects: int) -> FriedmanResult:
    """Friedman statistic from mean ranks alone.

    Useful when only the per-method mean ranks are published: with k
    methods averaged over ``n_subjects`` rankings,
    chi2 = 12 n / (k (k+1)) * sum((R_j - (k+1)/2)^2) and
    W = chi2 / (n (k-1)).
    """
    mean_ranks = np.asarray(mean_ranks, dtype=np.float64)
    n = int(n_subjects)
    k = mean_ranks.size
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 subjects and 2 methods, got {n}x{k}")
    chi2 = 12.0 * n / (k * (k + 1)) * np.sum((mean_ranks - (k + 1) / 2.0) ** 2)
    df = k - 1
    p = float(chi2_dist.sf(chi2, df))
    w = chi2 / (n * (k - 1))
    return FriedmanResult(chi2=float(chi2), df=df, p_value=p,
                          kendall_w=float(w), mean_ranks=mean_ranks.copy())


def _exact_wilcoxon_p(ranks2: np.ndarray, w2_plus: int) -> float:
    """Exact two-sided p over all sign assignments of doubled ranks.

    The distribution of the doubled positive-rank sum is built by dynamic
    programming; doubling makes mid-ranks integral so ties are handled
    exactly (conditionally on the observed tie pattern).
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    n_assign = counts.sum()
    lower = counts[:w2_plus + 1].sum() / n_assign
    upper = counts[w2_plus:].sum() / n_assign
    return float(min(1.0, 2.0 * min(lower, upper)))


def wilcoxon_signed_rank(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped. With 25 or fewer remaining pairs the
    p-value is exact (dynamic programming over the signed-rank
    distribution, mid-ranks on tied magnitudes); beyond that a normal
    approximation with tie-corrected variance is used.

    Parameters
    ----------
    a, b : np.ndarray
        Paired score vectors of equal length.

    Returns
    -------
    float
        Two-sided p-value. All-zero differences give 1.0.

    Raises
    ------
    ValueError
        On length mismatch, or when fewer than five nonzero differences
        remain (too few pairs for a meaningful test).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-D arrays of equal length")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return 1.0
    if n < 5:
        raise ValueError(
            f"only {n} nonzero differences; need at least 5 for the test")
    mags = np.abs(d)
    ranks = rankdata(mags)
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_LIMIT:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(round(2.0 * w_plus))
        return _exact_wilcoxon_p(ranks2, w2)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(mags, return_counts=True)
    var -= (tie_counts ** 3 - tie_counts).sum() / 48.0
    if var <= 0:
        return 1.0
    z = (w_plus - mu) / np.sqrt(var)
    return float(2.0 * norm.sf(abs(z)))


def bonferroni_threshold(alpha: float, n_comparisons: int) -> float:
    """Adjusted per-test significance level ``alpha / n_comparisons``."""
    if n_comparisons < 1:
        raise ValueError("need at least one comparison")
    return alpha / n_comparisons


@dataclass(frozen=True)
class MethodComparison:
    """Full statistical comparison over an accuracy matrix.

    Attributes
    ----------
    method_names : tuple of str
    accuracies : np.ndarray
        (subjects, methods) input matrix.
    friedman : FriedmanResult
    pairwise_p : np.ndarray
        (methods, methods) symmetric Wilcoxon p-values, 1.0 on the
        diagonal.
    alpha_adjusted : float
        Bonferroni threshold 0.05 / C(methods, 2).
    """

    method_names: tuple[str, ...]
    accuracies: np.ndarray
    friedman: FriedmanResult
    pairwise_p: np.ndarray
    alpha_adjusted: float


def compare_methods(accuracies: np.ndarray,
                    method_names: list[str]) -> MethodComparison:
    """Run the full Friedman plus pairwise-Wilcoxon protocol.

    Parameters
    ----------
    accuracies : np.ndarray
        (subjects, methods) per-subject mean accuracies.
    method_names : list of str
        One name per column.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.ndim != 2 or acc.shape[1] != len(method_names):
        raise ValueError("accuracy matrix columns must match method names")
    fr = friedman_test(acc)
    k = acc.shape[1]
    pairwise = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            try:
                p = wilcoxon_signed_rank(acc[:, i], acc[:, j])
            except ValueError:
                p = 1.0
            pairwise[i, j] = pairwise[j, i] = p
    n_comp = k * (k - 1) // 2
    return MethodComparison(method_names=tuple(method_names), accuracies=acc,
                            friedman=fr, pairwise_p=pairwise,
                            alpha_adjusted=bonferroni_threshold(0.05, n_comp))

"""Decoding bitwise network outputs into class decisions.

A K-bit regression network emits one value per code bit. These are compared
against the six class codewords with one of four distances: Euclidean,
shrinkage-regularized Mahalanobis, unconstrained 1-D earth mover's distance,
or the band-constrained transport distance (mass limited to ``radius`` bins
of travel). All decoders return a (trials, classes) distance matrix plus
argmin labels, with ties resolved to the lowest class index.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from .simplex import InfeasibleTransportError, solve_transport

logger = logging.getLogger(__name__)

#: Shrinkage weight toward the scaled identity in the Mahalanobis covariance.
SHRINKAGE = 0.1


def _check_outputs(outputs: np.ndarray, codewords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    codewords = np.asarray(codewords, dtype=np.float64)
    if outputs.shape[1] != codewords.shape[1]:
        raise ValueError(
            f"outputs have {outputs.shape[1]} bits, codewords {codewords.shape[1]}")
    if not np.isfinite(outputs).all():
        raise ValueError("outputs contain non-finite values")
    return outputs, codewords


def euclidean_decode(outputs: np.ndarray,
                     codewords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean distance between raw outputs and each codeword.

    Parameters
    ----------
    outputs : np.ndarray
        (n, bits) network outputs in [0, 1].
    codewords : np.ndarray
        (classes, bits) binary codewords.

    Returns
    -------
    distances : np.ndarray
        (n, classes) float64 matrix.
    labels : np.ndarray
        Argmin class per trial; ties go to the lowest index.
    """
    outputs, codewords = _check_outputs(outputs, codewords)
    diff = outputs[:, None, :] - codewords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    return dist, dist.argmin(axis=1)


def shrinkage_covariance(outputs: np.ndarray, lam: float = SHRINKAGE) -> np.ndarray:
    """Sample covariance blended with a scaled identity.

    ``sigma_reg = (1 - lam) * sigma + lam * mean(diag(sigma)) * I``. The
    identity target keeps the estimate invertible when the sample covariance
    is rank-deficient, as long as the outputs are not all constant.

    Parameters
    ----------
    outputs : np.ndarray
        (n, bits) output vectors the covariance is estimated from.
    lam : float
        Shrinkage weight in [0, 1].

    Returns
    -------
    np.ndarray
        (bits, bits) regularized covariance.
    """
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if outputs.shape[0] < 2:
        raise ValueError("need at least 2 output vectors to estimate covariance")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("shrinkage weight must be in [0, 1]")
    sigma = np.cov(outputs, rowvar=False)
    scale = float(np.mean(np.diag(sigma)))
    return (1.0 - lam) * sigma + lam * scale * np.eye(sigma.shape[0])


def mahalanobis_decode(outputs: np.ndarray, codewords: np.ndarray,
                       covariance: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mahalanobis distance under a shared covariance.

    The covariance is factorized once (Cholesky) and distances come from
    triangular solves; the matrix is never explicitly inverted.

    Raises
    ------
    ValueError
        If the covariance is not positive definite, e.g. estimated from
        constant outputs.
    """
    outputs, codewords = _check_outputs(outputs, codewords)
    try:
        chol = linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError as err:
        raise ValueError("covariance is singular; cannot decode") from err
    diff = outputs[:, None, :] - codewords[None, :, :]
    flat = diff.reshape(-1, diff.shape[-1]).T
    solved = linalg.solve_triangular(chol, flat, lower=True)
    dist = np.sqrt((solved ** 2).sum(0)).reshape(outputs.shape[0], -1)
    return dist, dist.argmin(axis=1)


def pmf_normalize(values: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero and normalize to unit mass.

    Raises
    ------
    ValueError
        If no positive mass remains.
    """
    values = np.asarray(values, dtype=np.float64)
    clipped = np.maximum(values, 0.0)
    total = clipped.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("cannot normalize: no positive mass")
    return clipped / total


def emd_1d(p: np.ndarray, q: np.ndarray) -> float:
    """Earth mover's distance between two PMFs on the ordered bit axis.

    Computed as the mean absolute difference of the cumulative
    distributions; the final near-zero term stays in the mean, so the value
    carries a 1/K normalization relative to the transport-cost formulation.

    Raises
    ------
    ValueError
        If either input is not a normalized PMF (within 1e-9).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-D PMFs of equal length")
    for name, v in (("p", p), ("q", q)):
        if (v < 0).any() or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a normalized PMF")
    return float(np.abs(np.cumsum(p - q)).mean())


def _codeword_pmfs(codewords: np.ndarray) -> np.ndarray:
    return np.stack([pmf_normalize(c) for c in codewords])


def emd_decode(outputs: np.ndarray,
               codewords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained EMD between normalized outputs and codeword PMFs.

    Trials whose output carries no positive mass cannot form a PMF; those
    rows fall back to Euclidean distances (and a warning is logged), which
    keeps every trial decodable.
    """
    outputs, codewords = _check_outputs(outputs, codewords)
    q = _codeword_pmfs(codewords)
    cum_q = np.cumsum(q, axis=1)
    dist = np.empty((outputs.shape[0], codewords.shape[0]))
    fallback = []
    for i, row in enumerate(outputs):
        try:
            p = pmf_normalize(row)
        except ValueError:
            fallback.append(i)
            dist[i] = euclidean_decode(row, codewords)[0][0]
            continue
        dist[i] = np.abs(np.cumsum(p)[None, :] - cum_q).mean(axis=1)
    if fallback:
        logger.warning("EMD decode: %d degenerate outputs fell back to "
                       "Euclidean distance", len(fallback))
    return dist, dist.argmin(axis=1)


def constrained_emd(p: np.ndarray, q: np.ndarray, radius: int) -> float:
    """Banded transport distance between two PMFs, in bin units.

    Unlike :func:`emd_1d` the value is the raw transport cost
    ``sum |i - j| * plan[i, j]`` (no 1/K factor); with ``radius >= K - 1``
    it equals ``K * emd_1d(p, q)``.

    Raises
    ------
    InfeasibleTransportError
        When mass cannot be matched within the band.
    """
    return solve_transport(np.asarray(p, dtype=np.float64),
                           np.asarray(q, dtype=np.float64), radius).cost


def constrained_emd_decode(outputs: np.ndarray, codewords: np.ndarray,
                           radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Band-constrained transport distance to each codeword.

    Class entries whose transport problem is infeasible within the band get
    distance ``+inf`` and are excluded from the argmin. If every class is
    infeasible for a trial, that row falls back to unconstrained EMD
    distances; degenerate (zero-mass) outputs fall back to Euclidean rows,
    matching :func:`emd_decode`.
    """
    outputs, codewords = _check_outputs(outputs, codewords)
    q = _codeword_pmfs(codewords)
    dist = np.empty((outputs.shape[0], codewords.shape[0]))
    n_infeasible_rows = 0
    for i, row in enumerate(outputs):
        try:
            p = pmf_normalize(row)
        except ValueError:
            dist[i] = euclidean_decode(row, codewords)[0][0]
            continue
        for c in range(q.shape[0]):
            try:
                dist[i, c] = constrained_emd(p, q[c], radius)
            except InfeasibleTransportError:
                dist[i, c] = np.inf
        if np.isinf(dist[i]).all():
            n_infeasible_rows += 1
            dist[i] = np.abs(np.cumsum(p)[None, :]
                             - np.cumsum(q, axis=1)).mean(axis=1)
    if n_infeasible_rows:
        logger.warning("constrained EMD: %d trials infeasible for every "
                       "class; used unconstrained EMD", n_infeasible_rows)
    return dist, dist.argmin(axis=1)

"""
 Ridge leverage scores h_ii = x_i'(X'X + lambda I)^-1 x_i and the l2 row norms used in their place
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ridge_core import ridge_core
from utils import parallel

# Rows handled per block; the hat matrix itself is never formed
BLOCK_ROWS = 8192
HETEROGENEITY_WARNING = 10.0


@dataclass(frozen=True)
class LeverageProfile:
    h: np.ndarray
    lam: float
    trace: float
    row_norms: np.ndarray


def __row_blocks(n):
    return [slice(start, min(n, start + BLOCK_ROWS)) for start in range(0, n, BLOCK_ROWS)]


def iter_row_norms(blocks):
    """
    l2 norm of every row, consuming the design matrix one block at a time

    :param blocks: iterable of 2d arrays sharing the same column count
    :return: generator of 1d arrays, one per block
    """
    for block in blocks:
        block = np.asarray(block, dtype=np.float64)
        if not np.all(np.isfinite(block)):
            raise ValueError("Row block has non-finite entries")
        yield np.sqrt(np.einsum("ij,ij->i", block, block))


def row_norms(d):
    """
    ||x_i||_2 for every row of the dataset
    """
    return np.concatenate(list(iter_row_norms(d.X[rows] for rows in __row_blocks(d.n))))


def leverage_scores(d, lam):
    """
    Diagonal of X(X'X + lam I)^-1 X' from one Cholesky factor L and a
    triangular solve per row block: h_ii = ||L^-1 x_i||^2.

    lam = 0 is accepted (plain leverage scores) when X'X is well conditioned.
    """
    lower, _ = ridge_core.factor_gram(d.X.T @ d.X, lam)

    def block_scores(rows):
        z = linalg.solve_triangular(lower, d.X[rows].T, lower=True, check_finite=False)
        return np.einsum("ij,ij->j", z, z)

    return np.concatenate(parallel.map_ordered(block_scores, __row_blocks(d.n)))


def exact_ridge_leverage(d, lam):
    """
    Exact ridge leverage profile, O(np^2)

    :param d: Dataset
    :param lam: positive ridge parameter
    :raises ValueError: lam <= 0
    :return: LeverageProfile
    """
    if not lam > 0:
        raise ValueError(f"Ridge leverage needs lambda > 0, got {lam}")
    h = leverage_scores(d, lam)
    profile = LeverageProfile(h, float(lam), float(h.sum()), row_norms(d))
    ratio = heterogeneity(profile)
    logging.debug(f"Ridge leverage lambda={lam:.4g} tr(H)={profile.trace:.4f} max/mean={ratio:.2f}")
    if ratio > HETEROGENEITY_WARNING:
        logging.warning(f"Ridge leverage scores are heterogeneous (max/mean={ratio:.1f}), the l2 approximation is loose")
    return profile


def average_leverage(profile):
    """n^-1 tr(H)"""
    return profile.trace / profile.h.shape[0]


def heterogeneity(profile):
    """
    max h_ii / mean h_ii; 1 means every row has the same leverage
    """
    mean = average_leverage(profile)
    return float(profile.h.max() / mean) if mean > 0 else 1.0

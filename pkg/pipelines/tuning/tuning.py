"""
 Ridge parameter selection: K-fold cross-validation, leave-one-out shortcut and GCV

 Every criterion is evaluated on the whole grid from one thin SVD X = U S V'
 per fitted design, so each extra grid point costs O(np):
   fitted(lam) = U diag(s^2 / (s^2 + lam)) U'y
   h_ii(lam)   = sum_j U_ij^2 s_j^2 / (s_j^2 + lam)
"""

import enum
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg

from ridge_core import ridge_core
from utils import file_ops

DEFAULT_GRID_MIN = 1e-4
DEFAULT_GRID_MAX = 1e4
DEFAULT_GRID_SIZE = 61
DEFAULT_FOLDS = 5
# Scores within this relative distance of the minimum count as ties
TIE_RTOL = 1e-12
LEVERAGE_CEILING = 1.0 - 1e-12
# Largest (grid points) x rows block held in memory while scoring the grid
GRID_CHUNK_CELLS = 1 << 22


class Method(enum.Enum):
    KFOLD = "kfold"
    LOOCV = "loocv"
    GCV = "gcv"

    @classmethod
    def parse(cls, value):
        try:
            return cls(str(value).strip().lower().replace("-", ""))
        except ValueError:
            raise ValueError(f"Unknown tuning method '{value}', expected one of {[m.value for m in cls]}")


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size == 0:
            raise ValueError("Lambda grid is empty")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("Lambda grid values must be finite and > 0")
        if np.any(np.diff(values) <= 0):
            raise ValueError("Lambda grid must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def logspace(cls, low=DEFAULT_GRID_MIN, high=DEFAULT_GRID_MAX, size=DEFAULT_GRID_SIZE):
        if size == 1:
            return cls(np.array([low], dtype=np.float64))
        if not 0 < low < high:
            raise ValueError(f"Grid bounds must satisfy 0 < low < high, got {low}, {high}")
        return cls(np.logspace(np.log10(low), np.log10(high), int(size)))

    def step_ratio(self):
        """Ratio between consecutive values (grid built with logspace)"""
        if self.values.size < 2:
            return 1.0
        return float(self.values[1] / self.values[0])


@dataclass(frozen=True)
class TuningResult:
    lambda_star: float
    criterion_curve: np.ndarray
    method: Method

    def curve_frame(self):
        return pd.DataFrame({"lambda": self.criterion_curve[:, 0], "score": self.criterion_curve[:, 1]})

    def to_csv(self, path):
        file_ops.folder_exist_or_create(os.path.dirname(path))
        self.curve_frame().to_csv(path, index=False, float_format="%.17g")
        logging.info(f"Criterion curve written : {path}")


def __select(grid, scores, method):
    scores = np.asarray(scores, dtype=np.float64)
    best = scores.min()
    # ties go to the larger lambda (more regularization)
    winner = np.flatnonzero(scores <= best + TIE_RTOL * abs(best))[-1]
    return TuningResult(float(grid.values[winner]), np.column_stack([grid.values, scores]), method)


def __thin_svd(X):
    u, s, _ = linalg.svd(X, full_matrices=False, check_finite=False)
    return u, s


def __shrinkage(s, grid):
    """(grid points) x (singular values) matrix of s^2 / (s^2 + lam)"""
    s2 = s ** 2
    return s2[None, :] / (s2[None, :] + grid.values[:, None])


def __grid_chunks(rows, grid):
    """Consecutive grid slices whose (grid points) x rows blocks hold at most GRID_CHUNK_CELLS values"""
    size = max(1, GRID_CHUNK_CELLS // max(rows, 1))
    return [slice(start, start + size) for start in range(0, grid.values.shape[0], size)]


def __residual_path(d, grid):
    """Yield (residuals, shrinkage, U^2) one grid chunk at a time"""
    u, s = __thin_svd(d.X)
    shrink = __shrinkage(s, grid)
    uty = u.T @ d.y
    u2 = u ** 2
    for chunk in __grid_chunks(d.n, grid):
        fitted = (shrink[chunk] * uty[None, :]) @ u.T
        yield d.y[None, :] - fitted, shrink[chunk], u2


def loocv_scores(d, grid):
    """
    n^-1 sum_i {e_i(lam) / (1 - h_ii(lam))}^2 for every grid value, one full fit per value

    :raises ValueError: a leverage score is numerically 1
    """
    scores = []
    for e, shrink, u2 in __residual_path(d, grid):
        h = shrink @ u2.T
        if np.any(h >= LEVERAGE_CEILING):
            raise ValueError("A ridge leverage score is numerically 1, leave-one-out shortcut undefined")
        scores.append(np.mean((e / (1.0 - h)) ** 2, axis=1))
    return np.concatenate(scores)


def gcv_scores(d, grid):
    """
    n^-1 sum_i {e_i(lam) / (1 - tr(H)/n)}^2 for every grid value

    :raises ValueError: tr(H)/n numerically 1
    """
    scores = []
    for e, shrink, _ in __residual_path(d, grid):
        average = shrink.sum(axis=1) / d.n
        if np.any(average >= LEVERAGE_CEILING):
            raise ValueError("Average leverage tr(H)/n is numerically 1, GCV denominator degenerates")
        scores.append(np.mean(e ** 2, axis=1) / (1.0 - average) ** 2)
    return np.concatenate(scores)


def kfold_folds(n, K, seed):
    """
    Seeded random partition of range(n) into K near-equal folds
    """
    if K < 2:
        raise ValueError(f"K-fold cross-validation needs K >= 2, got {K}")
    if n < K:
        raise ValueError(f"Cannot build {K} folds from {n} rows")
    folds = np.array_split(np.random.default_rng(seed).permutation(n), K)
    if any(fold.size == 0 for fold in folds):
        raise ValueError("Empty fold")
    return folds


def kfold_scores(d, grid, K, seed):
    """
    K^-1 sum_k ||y_k - X_k beta_{-k}(lam)||^2 for every grid value
    """
    scores = np.zeros(grid.values.shape[0])
    for fold in kfold_folds(d.n, K, seed):
        train = np.ones(d.n, dtype=bool)
        train[fold] = False
        X_train, y_train = d.X[train], d.y[train]
        u, s, vt = linalg.svd(X_train, full_matrices=False, check_finite=False)
        # beta(lam) = V diag(s / (s^2 + lam)) U'y
        coef = (s[None, :] / (s[None, :] ** 2 + grid.values[:, None])) * (u.T @ y_train)[None, :]
        rotated = d.X[fold] @ vt.T
        for chunk in __grid_chunks(fold.size, grid):
            predictions = rotated @ coef[chunk].T
            scores[chunk] += np.sum((d.y[fold][:, None] - predictions) ** 2, axis=0)
    return scores / K


def kfold_cv(d, grid, K=DEFAULT_FOLDS, seed=0):
    """
    K-fold cross-validation over the grid

    :param d: Dataset
    :param grid: LambdaGrid
    :param K: fold count, 2 <= K <= n
    :param seed: fold assignment seed
    :return: TuningResult
    """
    return __select(grid, kfold_scores(d, grid, K, seed), Method.KFOLD)


def loocv_shortcut(d, grid):
    return __select(grid, loocv_scores(d, grid), Method.LOOCV)


def gcv(d, grid):
    return __select(grid, gcv_scores(d, grid), Method.GCV)


def tune(d, grid, method=Method.GCV, K=DEFAULT_FOLDS, seed=0):
    """
    Dispatch to the requested criterion
    """
    method = Method.parse(method.value if isinstance(method, Method) else method)
    if method is Method.KFOLD:
        result = kfold_cv(d, grid, K, seed)
    elif method is Method.LOOCV:
        result = loocv_shortcut(d, grid)
    else:
        result = gcv(d, grid)
    logging.debug(f"{method.value} on n={d.n}: lambda*={result.lambda_star:.4g}")
    return result


def tune_subsample(rows, phi, grid, method=Method.GCV, K=DEFAULT_FOLDS, seed=0):
    """
    Choose the subsample ridge parameter on the weighted rows (Phi* X*, Phi* y*)

    Folds are drawn on the subsample rows, ignoring the weights; the weights only
    enter through the weighted design and response.

    :param rows: Dataset of the r drawn rows
    :param phi: WeightDiag of the draw
    :param grid: LambdaGrid
    :param method: Method tag
    :param K: fold count for K-fold
    :param seed: fold seed
    :return: TuningResult (lambda_star is lambda tilde)
    """
    method = Method.parse(method.value if isinstance(method, Method) else method)
    if method is Method.KFOLD and rows.n < K:
        raise ValueError(f"Subsample of {rows.n} rows is smaller than K={K}")
    return tune(ridge_core.weighted_rows(rows, phi), grid, method, K, seed)


def orthonormal_mse(lam, p, sigma2, beta):
    """
    E||beta_hat(lam) - beta||^2 when X has orthonormal columns:
    p sigma^2 (1+lam)^-2 + lam^2 (1+lam)^-2 beta'beta
    """
    lam = np.asarray(lam, dtype=np.float64)
    energy = float(np.dot(beta, beta))
    return (p * sigma2 + lam ** 2 * energy) / (1.0 + lam) ** 2


def orthonormal_optimal_lambda(p, sigma2, beta):
    """p sigma^2 / beta'beta, the minimiser of orthonormal_mse"""
    energy = float(np.dot(beta, beta))
    if energy <= 0:
        raise ValueError("beta must be non-zero")
    return p * sigma2 / energy


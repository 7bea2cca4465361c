"""
 Full-sample and weighted-subsample ridge solvers built on a Cholesky factor of X'X + lambda*I
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from data_model import data_model

# Unpenalized fits are refused beyond this condition number of X'X
CONDITION_LIMIT = 1e12
NORMAL_EQUATION_RTOL = 1e-8


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class RidgeFit:
    """
    beta: coefficients, lam: ridge parameter used, residuals: y - X beta on the
    rows the fit was computed on, trace_H: trace of the hat matrix.
    """

    beta: np.ndarray
    lam: float
    residuals: np.ndarray
    trace_H: float


@dataclass(frozen=True)
class WeightDiag:
    """
    Subsample weights 1/sqrt(r * pi_k) for the r drawn rows.

    indices are the drawn row numbers in the full data (repetitions kept),
    pi_star their sampling probabilities and n the full sample size, which is
    enough to rebuild the multiplicity form W = Omega K.
    """

    weights: np.ndarray
    pi_star: np.ndarray
    indices: np.ndarray
    n: int

    def __post_init__(self):
        if self.weights.shape != self.pi_star.shape or self.weights.shape != self.indices.shape:
            raise ValueError("weights, pi_star and indices must share the same length")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive and finite")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError(f"indices must lie in [0, {self.n})")

    @property
    def r(self):
        return self.weights.shape[0]

    def multiplicities(self):
        """K_i: how many times row i was drawn, length n, sums to r"""
        return np.bincount(self.indices, minlength=self.n)

    def w_diagonal(self):
        """Diagonal of W = Omega K, i.e. K_i / (r pi_i), zero for rows never drawn"""
        counts = self.multiplicities()
        w = np.zeros(self.n)
        drawn = np.flatnonzero(counts)
        pi_rows = np.zeros(self.n)
        pi_rows[self.indices] = self.pi_star
        w[drawn] = counts[drawn] / (self.r * pi_rows[drawn])
        return w


def unit_weights(indices, n):
    """
    WeightDiag whose entries are all 1 (used by deterministic selections)
    """
    indices = np.asarray(indices, dtype=np.int64)
    r = indices.shape[0]
    return WeightDiag(np.ones(r), np.full(r, 1.0 / r), indices, n)


def __check_lambda(lam):
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"Ridge parameter must be a finite non-negative number, got {lam}")


def factor_gram(gram, lam):
    """
    Cholesky factor of gram + lam*I

    :param gram: p x p matrix X'X (or its weighted version)
    :param lam: ridge parameter, 0 allowed when gram is well conditioned
    :raises SingularSystemError: lam = 0 on an ill conditioned gram, or failed factorization
    :return: factor usable by scipy.linalg.cho_solve
    """
    __check_lambda(lam)
    if not np.all(np.isfinite(gram)):
        raise ValueError("Gram matrix has non-finite entries")
    if lam == 0:
        condition = np.linalg.cond(gram)
        logging.debug(f"Unpenalized system, condition number {condition:.3e}")
        if not condition < CONDITION_LIMIT:
            raise SingularSystemError(f"X'X is singular at lambda=0 (condition number {condition:.3e})")
    try:
        return linalg.cho_factor(gram + lam * np.eye(gram.shape[0]), lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise SingularSystemError(f"X'X + {lam} I is not positive definite") from e


def solve_normal_equations(gram, rhs, lam):
    """
    Solve (gram + lam*I) beta = rhs, also returning tr[(gram + lam I)^-1 gram]

    :return: (beta, trace_H)
    """
    factor = factor_gram(gram, lam)
    beta = linalg.cho_solve(factor, rhs, check_finite=False)
    trace_H = float(np.trace(linalg.cho_solve(factor, gram, check_finite=False)))
    return beta, trace_H


def gram_inverse(d, lam):
    """
    (X'X + lam*I)^-1 from the Cholesky factor
    """
    factor = factor_gram(d.X.T @ d.X, lam)
    return linalg.cho_solve(factor, np.eye(d.p), check_finite=False)


def ridge_solve(d, lam):
    """
    Closed-form ridge estimator (X'X + lam*I)^-1 X'y

    :param d: Dataset
    :param lam: ridge parameter
    :raises SingularSystemError: lam = 0 with a singular X'X
    :return: RidgeFit
    """
    beta, trace_H = solve_normal_equations(d.X.T @ d.X, d.X.T @ d.y, lam)
    logging.debug(f"Ridge fit n={d.n} p={d.p} lambda={lam:.4g} tr(H)={trace_H:.4f}")
    return RidgeFit(beta, float(lam), d.y - d.X @ beta, trace_H)


def weighted_rows(rows, phi):
    """
    (Phi* X*, Phi* y*) as a Dataset
    """
    if phi.r != rows.n:
        raise ValueError(f"{phi.r} weights for {rows.n} subsample rows")
    return data_model.Dataset(rows.X * phi.weights[:, None], rows.y * phi.weights, rows.column_names)


def weighted_ridge_solve(rows, phi, lam_tilde):
    """
    Subsample estimator: argmin ||Phi* y* - Phi* X* beta||^2 + lam_tilde ||beta||^2

    :param rows: Dataset of the r drawn rows (X*, y*), repetitions included
    :param phi: WeightDiag of the draw
    :param lam_tilde: subsample ridge parameter
    :return: RidgeFit whose residuals are the weighted subsample residuals
    """
    if rows.n < 1:
        raise ValueError("Subsample must hold at least one row")
    return ridge_solve(weighted_rows(rows, phi), lam_tilde)


def weighted_ridge_solve_full_form(d, phi, lam_tilde):
    """
    Same estimator written on the full data: (X'WX + lam_tilde I)^-1 X'Wy

    :param d: full Dataset
    :param phi: WeightDiag of the draw
    :param lam_tilde: subsample ridge parameter
    :return: coefficient vector
    """
    if phi.n != d.n:
        raise ValueError(f"Weights built for n={phi.n}, dataset has n={d.n}")
    w = phi.w_diagonal()
    drawn = np.flatnonzero(w)
    Xw = d.X[drawn] * w[drawn, None]
    beta, _ = solve_normal_equations(Xw.T @ d.X[drawn], Xw.T @ d.y[drawn], lam_tilde)
    return beta


def residuals(d, fit):
    """
    e = y - X beta

    :raises ValueError: dimension mismatch
    """
    if fit.beta.shape[0] != d.p:
        raise ValueError(f"Fit has {fit.beta.shape[0]} coefficients, dataset has p={d.p}")
    return d.y - d.X @ fit.beta


def normal_equation_residual(d, fit):
    """
    ||(X'X + lam I) beta - X'y|| / ||X'y||, relative residual of the normal equation
    """
    rhs = d.X.T @ d.y
    lhs = d.X.T @ (d.X @ fit.beta) + fit.lam * fit.beta
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(lhs - rhs) / scale) if scale > 0 else float(np.linalg.norm(lhs))

"""
 Asymptotic quantities of the weighted subsample ridge estimator and their Monte Carlo checks

 With M = (X'X + lambda I)^-1 and e the full-sample residuals:
   Sigma_c = r^-1 M (sum_i e_i^2 x_i x_i' / pi_i) M
   AVar    = Sigma_c - lambda^2 r^-1 M beta beta' M
   AE      = beta + (lambda - lambda_tilde) M beta
   AMSE    = AVar + (lambda - lambda_tilde)^2 M beta beta' M
"""

import logging
from dataclasses import dataclass

import numpy as np

from leverage import leverage
from ridge_core import ridge_core
from samplers import samplers
from utils import parallel

MIN_DECAY_REPLICATES = 20
# AVar eigenvalues below -PSD_RTOL * trace(Sigma_c) are reported as a loss of definiteness
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class TheoryReport:
    sigma_c: np.ndarray
    avar: np.ndarray
    ae: np.ndarray
    amse: np.ndarray
    r: int
    lam: float
    lam_tilde: float
    strategy: str = ""
    trace_objective: float = float("nan")
    holder_bound: float = float("nan")
    avar_psd: bool = True
    avar_min_eigenvalue: float = 0.0

    @property
    def amse_trace(self):
        return float(np.trace(self.amse))

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "r": int(self.r),
            "lambda": float(self.lam),
            "lambda_tilde": float(self.lam_tilde),
            "sigma_c": self.sigma_c.tolist(),
            "avar": self.avar.tolist(),
            "ae": self.ae.tolist(),
            "amse": self.amse.tolist(),
            "amse_trace": self.amse_trace,
            "trace_objective": float(self.trace_objective),
            "holder_bound": float(self.holder_bound),
            "avar_psd": bool(self.avar_psd),
            "avar_min_eigenvalue": float(self.avar_min_eigenvalue),
        }


@dataclass(frozen=True)
class DecayCheck:
    """
    Median remainder norm per subsample size and the fitted log-log slope
    """

    r_grid: tuple
    medians: np.ndarray
    slope: float


def __probabilities(plan, n):
    if plan.pi is None:
        raise ValueError(f"{plan.strategy.value} has no sampling probabilities")
    pi = np.asarray(plan.pi, dtype=np.float64)
    if pi.shape[0] != n:
        raise ValueError(f"Plan covers {pi.shape[0]} rows, dataset has {n}")
    if np.any(pi <= 0):
        raise ValueError("Sampling probabilities must be strictly positive")
    return pi


def __check_r(r):
    if r < 1:
        raise ValueError(f"Subsample size must be >= 1, got {r}")


def sigma_c(d, fit, plan, r):
    """
    r^-1 M (sum_i e_i^2 x_i x_i' / pi_i) M with e the residuals of fit on d

    :param d: full Dataset
    :param fit: RidgeFit on d at lambda
    :param plan: randomized SamplingPlan on d
    :param r: subsample size
    :return: p x p matrix
    """
    __check_r(r)
    pi = __probabilities(plan, d.n)
    e = ridge_core.residuals(d, fit)
    scaled = d.X * (e / np.sqrt(pi))[:, None]
    gram_inv = ridge_core.gram_inverse(d, fit.lam)
    middle = gram_inv @ (scaled.T @ scaled) @ gram_inv / r
    return (middle + middle.T) / 2.0


def expected_trace_objective(d, profile, plan, r):
    """
    r^-1 sum_i (1 - h_ii) ||x_i||^2 / pi_i, the expected trace of Sigma_c under a
    homoscedastic model; minimised over pi by the ROPT-acc plan
    """
    __check_r(r)
    pi = __probabilities(plan, d.n)
    if profile.h.shape[0] != d.n:
        raise ValueError(f"Leverage profile has {profile.h.shape[0]} rows, dataset has {d.n}")
    return float(np.sum((1.0 - profile.h) * profile.row_norms ** 2 / pi) / r)


def holder_bound(profile, r):
    """
    {sum_i sqrt(1 - h_ii) ||x_i||}^2 / r, lower bound of the expected trace objective
    """
    __check_r(r)
    return float(np.sum(np.sqrt(np.clip(1.0 - profile.h, 0.0, None)) * profile.row_norms) ** 2 / r)


def avar(sigma, gram_inv, beta_hat, lam, r):
    """
    Sigma_c - lambda^2 r^-1 M beta beta' M
    """
    __check_r(r)
    direction = gram_inv @ beta_hat
    return sigma - (lam ** 2 / r) * np.outer(direction, direction)


def ae_and_amse(beta_hat, lam, lam_tilde, gram_inv, sigma, r):
    """
    Asymptotic mean and mean squared error matrix

    :param beta_hat: full-sample ridge coefficients at lam
    :param lam: full-sample ridge parameter
    :param lam_tilde: subsample ridge parameter
    :param gram_inv: (X'X + lam I)^-1
    :param sigma: Sigma_c
    :param r: subsample size
    :return: (AE vector, AMSE matrix)
    """
    direction = gram_inv @ beta_hat
    ae = beta_hat + (lam - lam_tilde) * direction
    amse = avar(sigma, gram_inv, beta_hat, lam, r) + (lam - lam_tilde) ** 2 * np.outer(direction, direction)
    return ae, amse


def build_report(d, plan, lam, r, lam_tilde=None, profile=None):
    """
    Every asymptotic quantity for one (plan, r, lambda, lambda tilde) in a TheoryReport

    A non positive semidefinite AVar (possible for tiny r) is flagged on the
    report and logged, not raised.

    :param d: full Dataset
    :param plan: randomized SamplingPlan
    :param lam: full-sample ridge parameter (> 0)
    :param r: subsample size
    :param lam_tilde: subsample ridge parameter, defaults to lam
    :param profile: LeverageProfile of d at lam, computed when absent
    :return: TheoryReport
    """
    lam_tilde = lam if lam_tilde is None else lam_tilde
    fit = ridge_core.ridge_solve(d, lam)
    gram_inv = ridge_core.gram_inverse(d, lam)
    sigma = sigma_c(d, fit, plan, r)
    ae, amse = ae_and_amse(fit.beta, lam, lam_tilde, gram_inv, sigma, r)
    variance = avar(sigma, gram_inv, fit.beta, lam, r)
    profile = leverage.exact_ridge_leverage(d, lam) if profile is None else profile

    min_eigenvalue = float(np.linalg.eigvalsh((variance + variance.T) / 2.0).min())
    psd = min_eigenvalue >= -PSD_RTOL * max(float(np.trace(sigma)), np.finfo(float).tiny)
    if not psd:
        logging.warning(f"AVar is not positive semidefinite at r={r} (smallest eigenvalue {min_eigenvalue:.3e})")

    report = TheoryReport(
        sigma_c=sigma,
        avar=variance,
        ae=ae,
        amse=amse,
        r=int(r),
        lam=float(lam),
        lam_tilde=float(lam_tilde),
        strategy=plan.strategy.value,
        trace_objective=expected_trace_objective(d, profile, plan, r),
        holder_bound=holder_bound(profile, r),
        avar_psd=psd,
        avar_min_eigenvalue=min_eigenvalue,
    )
    logging.info(
        f"Theory report {report.strategy} r={r} lambda={lam:.4g}: "
        f"E tr(Sigma_c)={report.trace_objective:.4e} bound={report.holder_bound:.4e} tr(AMSE)={report.amse_trace:.4e}"
    )
    return report


def first_order_term(d, fit, phi):
    """
    M X'W e, the leading stochastic term of beta_tilde - beta_hat; its mean is lambda M beta_hat
    """
    if phi.n != d.n:
        raise ValueError(f"Weights built for n={phi.n}, dataset has n={d.n}")
    w = phi.w_diagonal()
    e = ridge_core.residuals(d, fit)
    return ridge_core.gram_inverse(d, fit.lam) @ (d.X.T @ (w * e))


def expansion_remainder(d, fit, phi, lam_tilde):
    """
    beta_tilde - beta_hat - M X'W e + lam_tilde M beta_hat, which shrinks like 1/r
    """
    beta_tilde = ridge_core.weighted_ridge_solve_full_form(d, phi, lam_tilde)
    gram_inv = ridge_core.gram_inverse(d, fit.lam)
    return beta_tilde - fit.beta - first_order_term(d, fit, phi) + lam_tilde * (gram_inv @ fit.beta)


def monte_carlo_estimates(d, plan, r, lam_tilde, replicates, seed, workers=None):
    """
    Subsample estimates beta_tilde from independent draws

    Replicate k uses the seed derived from (seed, k), so the estimates do not
    depend on the worker count.

    :return: replicates x p matrix
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")

    def estimate(k):
        sub = samplers.draw(plan, r, samplers.derived_seed(seed, k))
        return ridge_core.weighted_ridge_solve_full_form(d, sub.weights, lam_tilde)

    return np.array(parallel.map_ordered(estimate, range(replicates), workers))


def remainder_decay_check(d, plan, lam, r_grid, replicates, seed, lam_tilde=None, workers=None):
    """
    Median norm of the expansion remainder for every r and the slope of
    log(median) against log(r), expected close to -1

    :param d: full Dataset
    :param plan: randomized SamplingPlan
    :param lam: full-sample ridge parameter
    :param r_grid: increasing subsample sizes spanning at least a decade
    :param replicates: draws per r, at least 20
    :param seed: root seed
    :param lam_tilde: subsample ridge parameter, defaults to lam
    :raises ValueError: too few replicates or a grid narrower than a decade
    :return: DecayCheck
    """
    if replicates < MIN_DECAY_REPLICATES:
        raise ValueError(f"Decay check needs at least {MIN_DECAY_REPLICATES} replicates, got {replicates}")
    r_grid = tuple(int(r) for r in r_grid)
    if len(r_grid) < 2 or any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError(f"r grid must be strictly increasing with at least two values, got {r_grid}")
    if r_grid[-1] < 10 * r_grid[0]:
        raise ValueError(f"r grid must span at least a decade, got {r_grid[0]}..{r_grid[-1]}")

    lam_tilde = lam if lam_tilde is None else lam_tilde
    fit = ridge_core.ridge_solve(d, lam)

    def remainder_norm(cell):
        r, k = cell
        sub = samplers.draw(plan, r, samplers.derived_seed(seed, r, k))
        return float(np.linalg.norm(expansion_remainder(d, fit, sub.weights, lam_tilde)))

    cells = [(r, k) for r in r_grid for k in range(replicates)]
    norms = np.array(parallel.map_ordered(remainder_norm, cells, workers)).reshape(len(r_grid), replicates)
    medians = np.median(norms, axis=1)
    slope, _ = np.polyfit(np.log(r_grid), np.log(medians), 1)
    logging.info(f"Remainder decay over r={r_grid[0]}..{r_grid[-1]}: slope {slope:.3f}")
    return DecayCheck(r_grid, medians, float(slope))


lemma1_decay_check = remainder_decay_check

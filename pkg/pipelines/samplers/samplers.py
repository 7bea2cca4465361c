"""
 Subsampling probabilities (ROPT, ROPT-acc, RLEV, RUNIF, OPT), IBOSS selection and the multinomial draw
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from leverage import leverage
from ridge_core import ridge_core

# pi_i < PROBABILITY_FLOOR / n is raised to that value before renormalizing
PROBABILITY_FLOOR = 1e-8


class Strategy(enum.Enum):
    ROPT_ACC = "ROPT_ACC"
    ROPT = "ROPT"
    RLEV = "RLEV"
    RUNIF = "RUNIF"
    OPT = "OPT"
    IBOSS = "IBOSS"

    @property
    def randomized(self):
        return self is not Strategy.IBOSS

    @classmethod
    def parse(cls, value):
        try:
            return cls(str(value).strip().upper().replace("-", "_"))
        except ValueError:
            raise ValueError(f"Unknown strategy '{value}', expected one of {[s.value for s in cls]}")


@dataclass(frozen=True)
class SamplingPlan:
    """
    pi is None for deterministic strategies (IBOSS).
    """

    pi: object
    strategy: Strategy
    lambda_used: object = None

    def __post_init__(self):
        if self.pi is None:
            if self.strategy.randomized:
                raise ValueError(f"{self.strategy.value} plan needs probabilities")
            return
        pi = np.asarray(self.pi, dtype=np.float64)
        if not np.all(pi > 0):
            raise ValueError("Sampling probabilities must be strictly positive")
        if abs(pi.sum() - 1.0) > 1e-12 * max(1, pi.shape[0]) ** 0.5:
            raise ValueError(f"Sampling probabilities sum to {pi.sum()!r}, expected 1")


@dataclass(frozen=True)
class Subsample:
    indices: np.ndarray
    counts: np.ndarray
    r: int
    weights: ridge_core.WeightDiag


def derived_seed(seed, *keys):
    """
    Counter-based child seed for (seed, keys...), stable across platforms and run order

    :param seed: root integer seed
    :param keys: non-negative integers, e.g. (method, r, replicate)
    :return: non-negative integer seed below 2**63
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def __floor_and_normalize(raw, strategy):
    raw = np.asarray(raw, dtype=np.float64)
    total = raw.sum()
    if not total > 0 or not np.isfinite(total):
        raise ValueError(f"{strategy.value} probabilities are degenerate (all scores are zero)")
    pi = raw / total
    floor = PROBABILITY_FLOOR / pi.shape[0]
    floored = pi < floor
    if floored.any():
        logging.debug(f"{strategy.value}: {int(floored.sum())} probabilities raised to the floor {floor:.3e}")
        pi = np.where(floored, floor, pi)
        pi = pi / pi.sum()
    return pi


def plan_ropt_exact(d, profile):
    """
    ROPT-acc: pi_i proportional to sqrt(1 - h_ii) ||x_i||, the minimiser of E[tr(Sigma_c)]

    :param d: Dataset
    :param profile: LeverageProfile computed on d at the intended lambda
    :return: SamplingPlan
    """
    if profile.h.shape[0] != d.n:
        raise ValueError(f"Leverage profile has {profile.h.shape[0]} rows, dataset has {d.n}")
    raw = np.sqrt(np.clip(1.0 - profile.h, 0.0, None)) * profile.row_norms
    return SamplingPlan(__floor_and_normalize(raw, Strategy.ROPT_ACC), Strategy.ROPT_ACC, profile.lam)


def plan_ropt_approx(d):
    """
    ROPT: pi_i proportional to ||x_i||, every ridge leverage score replaced by their average
    """
    return SamplingPlan(__floor_and_normalize(leverage.row_norms(d), Strategy.ROPT), Strategy.ROPT)


def plan_rlev(profile):
    """RLEV: pi_i proportional to h_ii"""
    return SamplingPlan(__floor_and_normalize(profile.h, Strategy.RLEV), Strategy.RLEV, profile.lam)


def plan_runif(n):
    if n < 1:
        raise ValueError(f"Uniform plan needs n >= 1, got {n}")
    return SamplingPlan(np.full(n, 1.0 / n), Strategy.RUNIF)


def plan_opt_linear(d):
    """
    OPT: pi_i proportional to the unpenalized leverage scores diag(X(X'X)^-1 X')

    :raises SingularSystemError: X'X is singular
    """
    h = leverage.leverage_scores(d, 0.0)
    return SamplingPlan(__floor_and_normalize(h, Strategy.OPT), Strategy.OPT, 0.0)


def build_plan(strategy, d, lam=None):
    """
    Sampling plan of a randomized strategy; lam is required by ROPT_ACC and RLEV
    """
    if strategy in (Strategy.ROPT_ACC, Strategy.RLEV):
        if lam is None:
            raise ValueError(f"{strategy.value} needs the full-sample lambda")
        profile = leverage.exact_ridge_leverage(d, lam)
        return plan_ropt_exact(d, profile) if strategy is Strategy.ROPT_ACC else plan_rlev(profile)
    if strategy is Strategy.ROPT:
        return plan_ropt_approx(d)
    if strategy is Strategy.RUNIF:
        return plan_runif(d.n)
    if strategy is Strategy.OPT:
        return plan_opt_linear(d)
    raise ValueError(f"{strategy.value} is a deterministic selection, it has no sampling plan")


def __extremes(column, available, count, largest):
    candidates = np.flatnonzero(available)
    if count <= 0 or candidates.size == 0:
        return np.empty(0, dtype=np.int64)
    values = column[candidates]
    # stable sort keeps the lower row index first on ties
    order = np.argsort(-values if largest else values, kind="stable")
    return candidates[order[:count]]


def select_iboss(d, r):
    """
    Information-based deterministic subdata: cycling through the columns, take
    the r // (2p) unselected rows with the smallest and largest values.

    The remainder r - 2p * (r // (2p)) is handed out from the first column on,
    one smallest then one largest row at a time. Ties go to the lower row index.

    :param d: Dataset
    :param r: subsample size, r <= n
    :raises ValueError: r > n or r < 1
    :return: Subsample with 0/1 counts and unit weights
    """
    if r < 1 or r > d.n:
        raise ValueError(f"IBOSS subsample size must lie in [1, {d.n}], got {r}")
    if r < 2 * d.p:
        logging.warning(f"IBOSS with r={r} < 2p={2 * d.p}: some columns contribute no extreme rows")

    per_side = r // (2 * d.p)
    remainder = r - 2 * d.p * per_side
    available = np.ones(d.n, dtype=bool)
    selected = []
    for j in range(d.p):
        extra_small = 1 if remainder > 0 else 0
        extra_large = 1 if remainder > 1 else 0
        remainder -= extra_small + extra_large
        for largest, count in ((False, per_side + extra_small), (True, per_side + extra_large)):
            rows = __extremes(d.X[:, j], available, count, largest)
            available[rows] = False
            selected.append(rows)

    indices = np.sort(np.concatenate(selected)).astype(np.int64)
    counts = np.zeros(d.n, dtype=np.int64)
    counts[indices] = 1
    return Subsample(indices, counts, int(indices.shape[0]), ridge_core.unit_weights(indices, d.n))


def draw(plan, r, seed):
    """
    r draws with replacement from categorical(pi); counts are multinomial(r, pi)

    numpy's PCG64 generator is used, seeded with the given integer, so a draw is
    reproducible on every platform.

    :param plan: randomized SamplingPlan
    :param r: subsample size
    :param seed: integer seed
    :raises ValueError: deterministic plan or r < 1
    :return: Subsample
    """
    if plan.pi is None:
        raise ValueError(f"{plan.strategy.value} is deterministic and cannot be drawn from, use select_iboss")
    if r < 1:
        raise ValueError(f"Subsample size must be >= 1, got {r}")
    pi = np.asarray(plan.pi)
    rng = np.random.Generator(np.random.PCG64(seed))
    indices = rng.choice(pi.shape[0], size=r, replace=True, p=pi).astype(np.int64)
    counts = np.bincount(indices, minlength=pi.shape[0])
    weights = ridge_core.WeightDiag(1.0 / np.sqrt(r * pi[indices]), pi[indices], indices, pi.shape[0])
    return Subsample(indices, counts, int(r), weights)


def plan_frame(plan):
    """
    Audit table of a plan: index, pi
    """
    if plan.pi is None:
        return pd.DataFrame({"index": pd.Series(dtype=np.int64), "pi": pd.Series(dtype=np.float64)})
    return pd.DataFrame({"index": np.arange(len(plan.pi)), "pi": plan.pi})


def subsample_frame(sub):
    """
    Audit table of a subsample: index, count, weight (one line per distinct row)
    """
    rows, first = np.unique(sub.indices, return_index=True)
    return pd.DataFrame({"index": rows, "count": sub.counts[rows], "weight": sub.weights.weights[first]})

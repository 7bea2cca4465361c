"""
 Synthetic regression data: six cases crossing the auxiliary column law
 (normal, lognormal, t with 2 degrees of freedom) with the informative dimension q (10 or 25)
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np

from data_model import data_model
from utils import parallel

DEFAULT_N = 100000
DEFAULT_P = 50
DEFAULT_NOISE_SD = 3.0
INFORMATIVE_CORRELATION = 0.5
# Rows generated per block, every block has its own derived seed
BLOCK_ROWS = 4096


class Auxiliary(enum.Enum):
    NORMAL = "normal"
    LOGNORMAL = "lognormal"
    T2 = "t2"


# case id -> (auxiliary law, informative dimension q)
CASES = {
    1: (Auxiliary.NORMAL, 10),
    2: (Auxiliary.LOGNORMAL, 10),
    3: (Auxiliary.T2, 10),
    4: (Auxiliary.NORMAL, 25),
    5: (Auxiliary.LOGNORMAL, 25),
    6: (Auxiliary.T2, 25),
}


@dataclass(frozen=True)
class SimConfig:
    """
    q defaults to the case's informative dimension; a smaller or equal override
    (q = p gives a design without auxiliary columns) is accepted.
    """

    n: int = DEFAULT_N
    p: int = DEFAULT_P
    q: object = None
    case: int = 1
    noise_sd: float = DEFAULT_NOISE_SD
    seed: int = 0

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"Unknown simulation case {self.case}, expected one of {sorted(CASES)}")
        q = CASES[self.case][1] if self.q is None else int(self.q)
        if self.n < 1 or self.p < 1:
            raise ValueError(f"Simulation needs n >= 1 and p >= 1, got n={self.n} p={self.p}")
        if not 1 <= q <= self.p:
            raise ValueError(f"Informative dimension q={q} must lie in [1, p={self.p}]")
        if not self.noise_sd >= 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        object.__setattr__(self, "q", q)

    @property
    def auxiliary(self):
        return CASES[self.case][0]


@dataclass(frozen=True)
class SimTruth:
    beta_true: np.ndarray
    sigma_informative: np.ndarray


def informative_covariance(q):
    """Sigma_ij = 0.5 off the diagonal, 1 on it"""
    return INFORMATIVE_CORRELATION * np.ones((q, q)) + (1.0 - INFORMATIVE_CORRELATION) * np.eye(q)


def __auxiliary_block(rng, law, rows, columns):
    if law is Auxiliary.NORMAL:
        return rng.standard_normal((rows, columns))
    if law is Auxiliary.LOGNORMAL:
        return rng.lognormal(mean=0.0, sigma=1.0, size=(rows, columns))
    return rng.standard_t(df=2, size=(rows, columns))


def generate(cfg, workers=None):
    """
    Draw (X, y) with X = [informative | auxiliary] and y = X_informative 1_q + noise_sd * eps

    The design is returned unstandardized; standardization is left to data_model.

    :param cfg: SimConfig
    :param workers: thread count for block generation, the result does not depend on it
    :return: (Dataset, SimTruth)
    """
    sigma = informative_covariance(cfg.q)
    factor = np.linalg.cholesky(sigma)
    beta = np.concatenate([np.ones(cfg.q), np.zeros(cfg.p - cfg.q)])

    def block(index):
        start = index * BLOCK_ROWS
        rows = min(BLOCK_ROWS, cfg.n - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(cfg.seed), spawn_key=(index,))))
        informative = rng.standard_normal((rows, cfg.q)) @ factor.T
        auxiliary = __auxiliary_block(rng, cfg.auxiliary, rows, cfg.p - cfg.q)
        noise = rng.standard_normal(rows)
        return np.hstack([informative, auxiliary]), informative.sum(axis=1) + cfg.noise_sd * noise

    blocks = parallel.map_ordered(block, range(-(-cfg.n // BLOCK_ROWS)), workers)
    X = np.vstack([b[0] for b in blocks])
    y = np.concatenate([b[1] for b in blocks])
    logging.info(f"Simulated case {cfg.case} ({cfg.auxiliary.value}) n={cfg.n} p={cfg.p} q={cfg.q} seed={cfg.seed}")
    return data_model.Dataset(X, y), SimTruth(beta, sigma)


def export_csv(cfg, path):
    """
    Generate and write the dataset as CSV, response column "y"
    """
    d, truth = generate(cfg)
    data_model.write_csv(d, path)
    return truth

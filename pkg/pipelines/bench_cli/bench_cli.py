"""
 Replicated subsampling experiments on simulated data or a CSV table, and their reports

 Every (method, r, replicate) cell draws its randomness from a seed derived from
 (seed, method, r, replicate), so the records do not depend on the worker count
 nor on the order the cells run in.
"""

import dataclasses
import enum
import logging
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy

from data_model import data_model
from leverage import leverage
from ridge_core import ridge_core
from samplers import samplers
from simgen import simgen
from theory import theory
from tuning import tuning
from utils import file_ops
from utils import parallel

DEFAULT_R_GRID = (100, 200, 400, 800, 1600, 3200, 6400)
DEFAULT_REPLICATES = 20
# Above this training size the reference lambda comes from a pilot subsample
FULL_GCV_MAX_ROWS = 500000
PILOT_KEY = 2 ** 31 - 1
OUTPUT_DIR_ENV = "RIDGESUB_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "output"

RECORD_COLUMNS = ["method", "r", "replicate", "metric", "value", "seed"]
TIMING_COLUMNS = ["method", "r", "replicate", "stage", "seconds"]
FLOAT_FORMAT = "%.17g"

MSE_TRUE = "mse_true"
MSE_FULL = "mse_full"
TEST_ERROR = "test_error"
LAMBDA_TILDE = "lambda_tilde"


class Source(enum.Enum):
    SIM = "sim"
    CSV = "csv"


class LambdaPolicy(enum.Enum):
    GCV = "gcv"
    KFOLD = "kfold"
    FIXED = "fixed"

    @classmethod
    def parse(cls, value):
        try:
            return cls(str(value).strip().lower().replace("-", ""))
        except ValueError:
            raise ValueError(f"Unknown lambda policy '{value}', expected one of {[m.value for m in cls]}")

    @property
    def tuning_method(self):
        return tuning.Method.KFOLD if self is LambdaPolicy.KFOLD else tuning.Method.GCV


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR


@dataclass(frozen=True)
class ExperimentSpec:
    source: Source = Source.SIM
    sim: simgen.SimConfig = field(default_factory=simgen.SimConfig)
    csv_path: str = ""
    response: object = data_model.NEWS_RESPONSE_COLUMN
    drop_columns: tuple = data_model.NEWS_DROP_COLUMNS
    methods: tuple = tuple(samplers.Strategy)
    r_grid: tuple = DEFAULT_R_GRID
    replicates: int = DEFAULT_REPLICATES
    lambda_policy: LambdaPolicy = LambdaPolicy.GCV
    fixed_lambda: object = None
    kfold: int = tuning.DEFAULT_FOLDS
    grid: tuning.LambdaGrid = field(default_factory=tuning.LambdaGrid.logspace)
    seed: int = 0
    train_fraction: float = data_model.DEFAULT_TRAIN_FRACTION
    reference_lambda: object = None

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        policy = LambdaPolicy.parse(getattr(self.lambda_policy, "value", self.lambda_policy))
        object.__setattr__(self, "lambda_policy", policy)
        methods = tuple(samplers.Strategy.parse(getattr(m, "value", m)) for m in self.methods)
        if len(set(methods)) != len(methods):
            raise ValueError(f"Duplicate methods in {[m.value for m in methods]}")
        object.__setattr__(self, "methods", methods)
        r_grid = tuple(int(r) for r in self.r_grid)
        if not r_grid or r_grid[0] < 1 or any(b <= a for a, b in zip(r_grid, r_grid[1:])):
            raise ValueError(f"r grid must be a non-empty strictly increasing list of positive sizes, got {r_grid}")
        object.__setattr__(self, "r_grid", r_grid)
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if self.lambda_policy is LambdaPolicy.FIXED and not (self.fixed_lambda is not None and self.fixed_lambda > 0):
            raise ValueError("The fixed lambda policy needs a positive lambda")
        if self.reference_lambda is not None and not self.reference_lambda > 0:
            raise ValueError(f"Reference lambda must be > 0, got {self.reference_lambda}")
        if self.source is Source.CSV and not self.csv_path:
            raise ValueError("A csv source needs a csv path")

    def to_dict(self):
        return {
            "source": self.source.value,
            "sim": dataclasses.asdict(self.sim) if self.source is Source.SIM else None,
            "csv_path": self.csv_path if self.source is Source.CSV else None,
            "response": self.response if self.source is Source.CSV else None,
            "drop_columns": list(self.drop_columns) if self.source is Source.CSV else None,
            "train_fraction": self.train_fraction if self.source is Source.CSV else None,
            "methods": [m.value for m in self.methods],
            "r_grid": list(self.r_grid),
            "replicates": self.replicates,
            "lambda_policy": self.lambda_policy.value,
            "fixed_lambda": self.fixed_lambda,
            "kfold": self.kfold,
            "grid": {
                "min": float(self.grid.values[0]),
                "max": float(self.grid.values[-1]),
                "size": int(self.grid.values.shape[0]),
            },
            "seed": self.seed,
            "reference_lambda": self.reference_lambda,
        }


@dataclass(frozen=True)
class PreparedData:
    """
    Standardized training rows plus what the metrics compare against
    """

    train: data_model.Dataset
    lam: float
    beta_full: np.ndarray
    beta_true: object = None
    test: object = None


@dataclass(frozen=True)
class ExperimentReport:
    records: pd.DataFrame
    timings: pd.DataFrame
    metadata: dict

    def aggregates(self):
        return summarize(self.records)


def summarize(records):
    """
    mean, median, std and count of every (method, r, metric), with log-scale columns

    :param records: long-format records
    :return: DataFrame
    """
    columns = ["method", "r", "metric", "mean", "median", "std", "count", "log_r", "log_mean"]
    if records.empty:
        return pd.DataFrame(columns=columns)
    grouped = records.groupby(["method", "r", "metric"], sort=True)["value"]
    frame = grouped.agg(["mean", "median", "std", "count"]).reset_index()
    frame["log_r"] = np.log(frame["r"].astype(np.float64))
    means = frame["mean"].to_numpy(dtype=np.float64)
    frame["log_mean"] = np.log(np.where(means > 0, means, np.nan))
    return frame[columns]


def __method_key(method):
    return list(samplers.Strategy).index(method)


def __check_sizes(spec, n_train, strict):
    largest = spec.r_grid[-1]
    if largest > n_train or (strict and largest >= n_train):
        logging.error(f"r={largest} with n_train={n_train}")
        raise ValueError(f"subsample size exceeds training size (r={largest}, n_train={n_train})")


def reference_lambda(train, spec):
    """
    Full-sample ridge parameter the reference fit beta_hat uses

    An explicit reference or fixed lambda wins. Otherwise the policy's criterion
    runs on the full training rows when there are at most FULL_GCV_MAX_ROWS of
    them, and on a ROPT pilot draw of the largest r (whose lambda tilde
    extrapolates to the full sample) beyond.

    :param train: standardized training Dataset
    :param spec: ExperimentSpec
    :return: lambda
    """
    if spec.reference_lambda is not None:
        lam, how = float(spec.reference_lambda), "given"
    elif spec.lambda_policy is LambdaPolicy.FIXED:
        lam, how = float(spec.fixed_lambda), "fixed"
    elif train.n <= FULL_GCV_MAX_ROWS:
        method = spec.lambda_policy.tuning_method
        lam = tuning.tune(train, spec.grid, method, spec.kfold, spec.seed).lambda_star
        how = f"full-sample {method.value}"
    else:
        pilot_seed = samplers.derived_seed(spec.seed, PILOT_KEY)
        pilot = samplers.draw(samplers.plan_ropt_approx(train), spec.r_grid[-1], pilot_seed)
        rows = data_model.take_rows(train, pilot.indices)
        lam = tuning.tune_subsample(
            rows, pilot.weights, spec.grid, spec.lambda_policy.tuning_method, spec.kfold, pilot_seed
        ).lambda_star
        how = f"pilot subsample r={spec.r_grid[-1]}"
    logging.info(f"Reference lambda {lam:.6g} ({how})")
    return lam


def prepare_simulation(spec, workers=None):
    """
    Generate the configured case once, standardize it and fit the reference beta_hat

    The true coefficients are expressed in the standardized scale.
    """
    d, truth = simgen.generate(spec.sim, workers)
    train, stats = data_model.standardize(d)
    __check_sizes(spec, train.n, strict=False)
    lam = reference_lambda(train, spec)
    beta_full = ridge_core.ridge_solve(train, lam).beta
    return PreparedData(train, lam, beta_full, beta_true=truth.beta_true * stats.column_scales)


def __center_response(d, mean):
    return data_model.Dataset(d.X, d.y - mean, d.column_names)


def prepare_realdata(spec):
    """
    Load the CSV, split it, standardize X on the training statistics and center y
    on the training mean (the model has no intercept)
    """
    d = data_model.load_csv(spec.csv_path, spec.response, spec.drop_columns)
    parts = data_model.split(d, spec.train_fraction, spec.seed)
    train_raw = data_model.take_rows(d, parts.train_indices)
    __check_sizes(spec, train_raw.n, strict=True)
    train, stats = data_model.standardize(train_raw)
    test = data_model.apply_standardization(data_model.take_rows(d, parts.test_indices), stats)
    y_mean = float(train.y.mean())
    train, test = __center_response(train, y_mean), __center_response(test, y_mean)
    lam = reference_lambda(train, spec)
    beta_full = ridge_core.ridge_solve(train, lam).beta
    return PreparedData(train, lam, beta_full, test=test)


def prepare(spec, workers=None):
    if spec.source is Source.SIM:
        return prepare_simulation(spec, workers)
    return prepare_realdata(spec)


def __plans(spec, data):
    plans, timings = {}, []
    for method in spec.methods:
        if not method.randomized:
            continue
        start = time.perf_counter()
        plans[method] = samplers.build_plan(method, data.train, data.lam)
        timings.append((method.value, 0, -1, "plan", time.perf_counter() - start))
    return plans, timings


def run_prepared(spec, data, workers=None):
    """
    Run every (method, r, replicate) cell on prepared data

    :param spec: ExperimentSpec
    :param data: PreparedData
    :param workers: thread count, the records do not depend on it
    :return: ExperimentReport
    """
    plans, timings = __plans(spec, data)
    train = data.train

    def cell(key):
        method, r, replicate = key
        seed = samplers.derived_seed(spec.seed, __method_key(method), r, replicate)
        clock = {}
        start = time.perf_counter()
        if method.randomized:
            sub = samplers.draw(plans[method], r, seed)
        else:
            sub = samplers.select_iboss(train, r)
        clock["draw"] = time.perf_counter() - start

        rows = data_model.take_rows(train, sub.indices)
        start = time.perf_counter()
        if spec.lambda_policy is LambdaPolicy.FIXED:
            lam_tilde = float(spec.fixed_lambda)
        else:
            lam_tilde = tuning.tune_subsample(
                rows, sub.weights, spec.grid, spec.lambda_policy.tuning_method, spec.kfold, seed
            ).lambda_star
        clock["tune"] = time.perf_counter() - start

        start = time.perf_counter()
        beta_tilde = ridge_core.weighted_ridge_solve(rows, sub.weights, lam_tilde).beta
        clock["fit"] = time.perf_counter() - start

        metrics = []
        if data.beta_true is not None:
            metrics.append((MSE_TRUE, float(np.sum((beta_tilde - data.beta_true) ** 2))))
        metrics.append((MSE_FULL, float(np.sum((beta_tilde - data.beta_full) ** 2))))
        if data.test is not None:
            metrics.append((TEST_ERROR, float(np.mean((data.test.y - data.test.X @ beta_tilde) ** 2))))
        metrics.append((LAMBDA_TILDE, float(lam_tilde)))
        records = [(method.value, r, replicate, metric, value, seed) for metric, value in metrics]
        return records, [(method.value, r, replicate, stage, seconds) for stage, seconds in clock.items()]

    keys = [(m, r, k) for m in spec.methods for r in spec.r_grid for k in range(spec.replicates)]
    logging.info(f"Running {len(keys)} cells: methods={[m.value for m in spec.methods]} r={list(spec.r_grid)}")
    results = parallel.map_ordered(cell, keys, workers)

    records = pd.DataFrame([row for result in results for row in result[0]], columns=RECORD_COLUMNS)
    timing_rows = timings + [row for result in results for row in result[1]]
    metadata = {
        "spec": spec.to_dict(),
        "reference_lambda": data.lam,
        "n_train": data.train.n,
        "p": data.train.p,
        "n_test": data.test.n if data.test is not None else None,
        "full_test_error": (
            float(np.mean((data.test.y - data.test.X @ data.beta_full) ** 2)) if data.test is not None else None
        ),
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }
    return ExperimentReport(records, pd.DataFrame(timing_rows, columns=TIMING_COLUMNS), metadata)


def run_simulation(spec, workers=None):
    """
    Simulated-data protocol: records mse_true, mse_full and lambda_tilde per cell

    :raises ValueError: non simulation source, r above n
    """
    if spec.source is not Source.SIM:
        raise ValueError("run_simulation needs a simulation source")
    return run_prepared(spec, prepare_simulation(spec, workers), workers)


def run_realdata(spec, workers=None):
    """
    Train/test protocol on a CSV table: records mse_full, test_error and lambda_tilde per cell

    :raises IngestionError: unreadable CSV
    :raises ValueError: r >= n_train
    """
    if spec.source is not Source.CSV:
        raise ValueError("run_realdata needs a csv source")
    return run_prepared(spec, prepare_realdata(spec), workers)


def run(spec, workers=None):
    if spec.source is Source.SIM:
        return run_simulation(spec, workers)
    return run_realdata(spec, workers)


def theory_diagnostics(spec, data):
    """
    TheoryReport of the ROPT-acc plan at the smallest r and the reference lambda
    """
    profile = leverage.exact_ridge_leverage(data.train, data.lam)
    plan = samplers.plan_ropt_exact(data.train, profile)
    return theory.build_report(data.train, plan, data.lam, spec.r_grid[0], profile=profile)


def __frame_payload(frame):
    """JSON ready rows, numpy scalars turned into python numbers"""
    return [
        {key: value.item() if isinstance(value, np.generic) else value for key, value in row.items()}
        for row in frame.to_dict(orient="records")
    ]


def __companion_paths(path):
    return {
        "summary": file_ops.sibling_path(path, "_summary", ".csv"),
        "timings": file_ops.sibling_path(path, "_timings", ".csv"),
        "metadata": file_ops.sibling_path(path, "_meta", ".json"),
    }


def emit_report(report, fmt, path):
    """
    Write a report

    csv: the long-format records (method,r,replicate,metric,value,seed) at path,
    plus <stem>_summary.csv, <stem>_timings.csv and <stem>_meta.json beside it.
    Only the timings differ between two runs of the same spec.
    json: one document holding metadata, records, aggregates and timings.

    :param report: ExperimentReport
    :param fmt: "csv" or "json"
    :param path: destination file
    """
    fmt = str(fmt).lower()
    file_ops.folder_exist_or_create(os.path.dirname(path))
    if fmt == "csv":
        companions = __companion_paths(path)
        report.records.to_csv(path, index=False, columns=RECORD_COLUMNS, float_format=FLOAT_FORMAT)
        report.aggregates().to_csv(companions["summary"], index=False, float_format=FLOAT_FORMAT)
        report.timings.to_csv(companions["timings"], index=False, float_format=FLOAT_FORMAT)
        file_ops.write_json(report.metadata, companions["metadata"])
    elif fmt == "json":
        file_ops.write_json(
            {
                "metadata": report.metadata,
                "records": __frame_payload(report.records),
                "aggregates": __frame_payload(report.aggregates()),
                "timings": __frame_payload(report.timings),
            },
            path,
        )
    else:
        raise ValueError(f"Unknown report format '{fmt}', expected csv or json")
    logging.info(f"Report written : {path}")


def load_report(path):
    """
    Parse a report written by emit_report back into an ExperimentReport
    """
    if not file_ops.file_exist(path):
        raise ValueError(f"Report not found: {path}")
    if path.lower().endswith(".json"):
        payload = file_ops.read_json(path)
        records = pd.DataFrame(payload["records"], columns=RECORD_COLUMNS)
        timings = pd.DataFrame(payload["timings"], columns=TIMING_COLUMNS)
        return ExperimentReport(records, timings, payload["metadata"])

    companions = __companion_paths(path)
    records = pd.read_csv(path, float_precision="round_trip")
    timings = (
        pd.read_csv(companions["timings"], float_precision="round_trip")
        if file_ops.file_exist(companions["timings"])
        else pd.DataFrame(columns=TIMING_COLUMNS)
    )
    metadata = file_ops.read_json(companions["metadata"]) if file_ops.file_exist(companions["metadata"]) else {}
    return ExperimentReport(records, timings, metadata)


def trend_violations(report, metric=MSE_FULL):
    """
    (method, r) pairs where the median of metric over replicates went up from the previous r

    Violations are logged as warnings, not raised.
    """
    violations = []
    subset = report.records[report.records["metric"] == metric]
    for method, rows in subset.groupby("method", sort=False):
        medians = rows.groupby("r")["value"].median().sort_index()
        for r, previous, current in zip(medians.index[1:], medians.values[:-1], medians.values[1:]):
            if current > previous:
                violations.append((method, int(r)))
    if violations:
        logging.warning(f"Median {metric} increased with r for {violations}")
    return violations


def lambda_gaps(report):
    """
    Median |lambda_tilde - reference lambda| per (method, r)
    """
    subset = report.records[report.records["metric"] == LAMBDA_TILDE].copy()
    subset["gap"] = (subset["value"] - float(report.metadata["reference_lambda"])).abs()
    return subset.groupby(["method", "r"], sort=True)["gap"].median().reset_index()


def plan_timing_scan(n_values, p=50, lam=1.0, seed=0):
    """
    Wall-clock cost of the ROPT plan against the exact ROPT-acc plan for growing n

    :param n_values: increasing sample sizes
    :param p: column count
    :param lam: ridge parameter of the exact leverage scores
    :param seed: simulation seed
    :return: DataFrame n, ropt_seconds, exact_seconds
    """
    rows = []
    for n in n_values:
        d, _ = simgen.generate(simgen.SimConfig(n=int(n), p=p, q=min(10, p), case=1, seed=seed))
        start = time.perf_counter()
        samplers.plan_ropt_approx(d)
        ropt = time.perf_counter() - start
        start = time.perf_counter()
        samplers.plan_ropt_exact(d, leverage.exact_ridge_leverage(d, lam))
        exact = time.perf_counter() - start
        logging.info(f"Plan timing n={n}: ROPT {ropt:.4f}s, ROPT-acc {exact:.4f}s")
        rows.append((int(n), ropt, exact))
    return pd.DataFrame(rows, columns=["n", "ropt_seconds", "exact_seconds"])


def timing_slopes(frame):
    """
    log-log slopes of plan cost against n
    """
    log_n = np.log(frame["n"].to_numpy(dtype=np.float64))
    return {
        "ropt": float(np.polyfit(log_n, np.log(frame["ropt_seconds"].to_numpy(dtype=np.float64)), 1)[0]),
        "exact": float(np.polyfit(log_n, np.log(frame["exact_seconds"].to_numpy(dtype=np.float64)), 1)[0]),
    }

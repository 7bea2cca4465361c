"""
 Dataset representation, standardization, train/test split and CSV ingestion
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from utils import file_ops

# Non-predictive columns of the online news popularity table
NEWS_DROP_COLUMNS = ("url", "timedelta")
NEWS_RESPONSE_COLUMN = "shares"

DEFAULT_TRAIN_FRACTION = 0.7
CSV_FLOAT_FORMAT = "%.17g"


class IngestionError(ValueError):
    pass


def _read_only(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """
    Design matrix X (n x p) with response y (n). Immutable once built.
    """

    X: np.ndarray
    y: np.ndarray
    column_names: tuple = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be a 2d matrix, got {X.ndim} dimension(s)")
        if y.ndim != 1:
            raise ValueError(f"y must be a vector, got {y.ndim} dimension(s)")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"Dataset needs n >= 1 and p >= 1, got n={n} p={p}")
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]} but X has {n} rows")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("Dataset entries must be finite (no NaN/Inf)")
        names = tuple(self.column_names) if self.column_names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValueError(f"{len(names)} column names given for {p} columns")

        object.__setattr__(self, "X", _read_only(X))
        object.__setattr__(self, "y", _read_only(y))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizationStats:
    column_means: np.ndarray
    column_scales: np.ndarray

    def __post_init__(self):
        if np.any(self.column_scales <= 0):
            raise ValueError("column_scales must be strictly positive")


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray


def take_rows(d, indices):
    """
    Sub-dataset made of the given rows, repetitions allowed

    :param d: Dataset
    :param indices: row indices
    :return: Dataset
    """
    indices = np.asarray(indices, dtype=np.int64)
    return Dataset(d.X[indices], d.y[indices], d.column_names)


def __constant_columns(X, names):
    scales = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    return [names[j] for j in np.flatnonzero(~(scales > 0))]


def __resolve_column(frame, column):
    if isinstance(column, (int, np.integer)):
        if not -frame.shape[1] <= column < frame.shape[1]:
            raise IngestionError(f"Response column index {column} out of range for {frame.shape[1]} columns")
        return frame.columns[column]
    if column not in frame.columns:
        raise IngestionError(f"Response column '{column}' not found in header")
    return column


def __numeric_frame(frame, path):
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() & frame.notna()
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise IngestionError(
            f"Non-numeric cell {frame.iat[row, col]!r} in {path} at row {row + 1}, column '{frame.columns[col]}'"
        )
    missing = numeric.isna().to_numpy()
    if missing.any():
        row, col = np.argwhere(missing)[0]
        raise IngestionError(f"Empty cell in {path} at row {row + 1}, column '{frame.columns[col]}'")
    if not np.all(np.isfinite(numeric.to_numpy(dtype=np.float64))):
        row, col = np.argwhere(~np.isfinite(numeric.to_numpy(dtype=np.float64)))[0]
        raise IngestionError(f"Non-finite cell in {path} at row {row + 1}, column '{frame.columns[col]}'")
    return numeric


def load_csv(path, response_column, drop_columns=()):
    """
    Read a numeric CSV with a header row into a Dataset

    :param path: CSV file path (UTF-8, '.' decimal separator)
    :param response_column: name or position of the response column
    :param drop_columns: names of columns removed from X
    :raises IngestionError: missing file, non-numeric cell, missing response column, constant column
    :return: Dataset
    """
    if not file_ops.file_exist(path):
        logging.error(f"CSV file not found: {path}")
        raise IngestionError(f"CSV file not found: {path}")

    frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip", skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    response_name = __resolve_column(frame, response_column)

    missing = [c for c in drop_columns if c not in frame.columns]
    if missing:
        logging.warning(f"Drop columns not present in {path}: {missing}")
    frame = frame.drop(columns=[c for c in drop_columns if c in frame.columns and c != response_name])

    numeric = __numeric_frame(frame, path)
    y = numeric[response_name].to_numpy(dtype=np.float64)
    features = numeric.drop(columns=[response_name])
    if features.shape[1] == 0:
        raise IngestionError(f"No predictor column left in {path}")

    names = tuple(features.columns)
    X = features.to_numpy(dtype=np.float64)
    constant = __constant_columns(X, names)
    if constant:
        raise IngestionError(f"Constant column(s) in {path}: {constant}")

    logging.info(f"Loaded {path}: n={X.shape[0]} p={X.shape[1]} response='{response_name}'")
    return Dataset(X, y, names)


def write_csv(d, path, response_name="y"):
    """
    Write a Dataset as CSV so that load_csv reads back the exact same values

    :param d: Dataset
    :param path: destination file
    :param response_name: header used for y
    """
    file_ops.folder_exist_or_create(os.path.dirname(path))
    frame = pd.DataFrame(d.X, columns=list(d.column_names))
    frame[response_name] = d.y
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, encoding="utf-8")
    logging.info(f"Dataset written : {path}")


def standardize(d):
    """
    Center every column and scale it to unit sample standard deviation (n-1)

    y is left untouched.

    :param d: Dataset
    :raises ValueError: constant column
    :return: (standardized Dataset, StandardizationStats)
    """
    if d.n < 2:
        raise ValueError("Standardization needs at least 2 rows")
    constant = __constant_columns(d.X, d.column_names)
    if constant:
        raise ValueError(f"Cannot standardize constant column(s): {constant}")

    means = d.X.mean(axis=0)
    centered = d.X - means
    scales = centered.std(axis=0, ddof=1)
    stats = StandardizationStats(_read_only(means), _read_only(scales))
    return Dataset(centered / scales, d.y, d.column_names), stats


def apply_standardization(d, stats):
    """
    Apply training statistics to other rows (e.g. the test split)
    """
    if stats.column_means.shape[0] != d.p:
        raise ValueError(f"Statistics cover {stats.column_means.shape[0]} columns, dataset has {d.p}")
    return Dataset((d.X - stats.column_means) / stats.column_scales, d.y, d.column_names)


def split(d, train_fraction=DEFAULT_TRAIN_FRACTION, seed=0):
    """
    Seeded random train/test partition of the row indices

    :param d: Dataset
    :param train_fraction: share of rows used for training, in (0, 1)
    :param seed: integer seed
    :raises ValueError: when one side of the partition would be empty
    :return: Split
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if d.n < 2:
        raise ValueError(f"Cannot split a dataset of {d.n} row(s)")
    n_train = int(round(train_fraction * d.n))
    if n_train == 0 or n_train == d.n:
        raise ValueError(f"train_fraction {train_fraction} leaves an empty partition for n={d.n}")

    permutation = np.random.default_rng(seed).permutation(d.n)
    return Split(np.sort(permutation[:n_train]), np.sort(permutation[n_train:]))

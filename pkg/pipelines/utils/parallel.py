import logging
import os
from concurrent.futures import ThreadPoolExecutor

MAX_WORKERS_ENV = "RIDGESUB_MAX_WORKERS"


def max_workers():
    """
    Number of worker threads allowed for replicated work

    Reads RIDGESUB_MAX_WORKERS, falls back on the cpu count.

    :raises ValueError: when the variable is not a positive integer
    :return: worker count
    """
    value = os.environ.get(MAX_WORKERS_ENV)
    if value is None or value == "":
        return os.cpu_count() or 1
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f"{MAX_WORKERS_ENV} must be an integer, got {value!r}")
    if workers < 1:
        raise ValueError(f"{MAX_WORKERS_ENV} must be >= 1, got {workers}")
    return workers


def map_ordered(func, items, workers=None):
    """
    Apply func to every item, results returned in submission order

    Every task must derive its randomness from its own arguments so the output
    does not depend on the worker count.

    :param func: callable taking one item
    :param items: iterable of items
    :param workers: thread count, defaults to max_workers()
    :return: list of results
    """
    items = list(items)
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    logging.debug(f"Dispatching {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))

import os
import threading
import unittest
from unittest import mock

from utils import parallel


class MaxWorkersTest(unittest.TestCase):
    def test_reads_environment(self):
        with mock.patch.dict(os.environ, {parallel.MAX_WORKERS_ENV: "3"}):
            self.assertEqual(parallel.max_workers(), 3)

    def test_falls_back_on_cpu_count(self):
        with mock.patch.dict(os.environ, {parallel.MAX_WORKERS_ENV: ""}):
            self.assertGreaterEqual(parallel.max_workers(), 1)

    def test_invalid_values(self):
        for value in ("abc", "0", "-2"):
            with mock.patch.dict(os.environ, {parallel.MAX_WORKERS_ENV: value}):
                with self.assertRaises(ValueError, msg=value):
                    parallel.max_workers()


class MapOrderedTest(unittest.TestCase):
    def test_keeps_submission_order(self):
        items = list(range(50))

        sequential = parallel.map_ordered(lambda k: k * k, items, workers=1)
        threaded = parallel.map_ordered(lambda k: k * k, items, workers=4)

        self.assertEqual(sequential, [k * k for k in items])
        self.assertEqual(threaded, sequential)

    def test_single_worker_stays_on_caller_thread(self):
        caller = threading.get_ident()

        idents = parallel.map_ordered(lambda _: threading.get_ident(), range(5), workers=1)

        self.assertEqual(set(idents), {caller})

    def test_empty(self):
        self.assertEqual(parallel.map_ordered(len, [], workers=4), [])


if __name__ == "__main__":
    unittest.main()

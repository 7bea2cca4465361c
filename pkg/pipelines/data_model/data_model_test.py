import os
import tempfile
import unittest

import numpy as np

from data_model import data_model


def _write_text(folder, name, content):
    path = os.path.join(folder, name)
    with open(path, "w", encoding="utf-8") as out:
        out.write(content)
    return path


class DatasetTest(unittest.TestCase):
    def test_rejects_non_finite(self):
        with self.assertRaises(ValueError):
            data_model.Dataset(np.array([[1.0], [np.nan]]), np.array([1.0, 2.0]))

    def test_rejects_length_mismatch(self):
        with self.assertRaises(ValueError):
            data_model.Dataset(np.ones((3, 2)), np.ones(2))

    def test_is_read_only(self):
        d = data_model.Dataset(np.ones((2, 2)), np.ones(2))
        with self.assertRaises(ValueError):
            d.X[0, 0] = 5.0


class LoadCsvTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_extracts_response(self):
        path = _write_text(self.tmp.name, "small.csv", "a,b,shares\n1,2,10\n3,5,20\n4,1,30\n")

        d = data_model.load_csv(path, "shares")

        self.assertEqual((d.n, d.p), (3, 2))
        self.assertEqual(d.column_names, ("a", "b"))
        np.testing.assert_array_equal(d.y, [10.0, 20.0, 30.0])

    def test_response_by_index_and_drop_columns(self):
        path = _write_text(self.tmp.name, "news.csv", "url,timedelta,a,b,shares\nu1,7,1,2,10\nu2,8,3,5,20\nu3,9,4,1,30\n")

        d = data_model.load_csv(path, -1, drop_columns=data_model.NEWS_DROP_COLUMNS)

        self.assertEqual(d.column_names, ("a", "b"))

    def test_non_numeric_cell_names_row_and_column(self):
        path = _write_text(self.tmp.name, "bad.csv", "a,b,y\n1,2,3\n4,oops,6\n7,8,9\n")

        with self.assertRaises(data_model.IngestionError) as ctx:
            data_model.load_csv(path, "y")

        self.assertIn("row 2", str(ctx.exception))
        self.assertIn("'b'", str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(data_model.IngestionError):
            data_model.load_csv(os.path.join(self.tmp.name, "nope.csv"), "y")

    def test_missing_response(self):
        path = _write_text(self.tmp.name, "noresp.csv", "a,b\n1,2\n3,4\n")

        with self.assertRaises(data_model.IngestionError):
            data_model.load_csv(path, "shares")

    def test_constant_column_named(self):
        path = _write_text(self.tmp.name, "const.csv", "a,flat,y\n1,5,3\n2,5,6\n3,5,9\n")

        with self.assertRaises(data_model.IngestionError) as ctx:
            data_model.load_csv(path, "y")

        self.assertIn("flat", str(ctx.exception))

    def test_write_then_load_is_bit_identical(self):
        rng = np.random.default_rng(11)
        d = data_model.Dataset(rng.standard_normal((100, 5)) * 1e3, rng.standard_normal(100))
        path = os.path.join(self.tmp.name, "round.csv")

        data_model.write_csv(d, path)
        loaded = data_model.load_csv(path, "y")

        np.testing.assert_array_equal(loaded.X, d.X)
        np.testing.assert_array_equal(loaded.y, d.y)


class StandardizeTest(unittest.TestCase):
    def test_three_points(self):
        d = data_model.Dataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3))

        out, stats = data_model.standardize(d)

        np.testing.assert_allclose(out.X[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(stats.column_means, [2.0])
        np.testing.assert_allclose(stats.column_scales, [1.0])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        once, _ = data_model.standardize(data_model.Dataset(rng.standard_normal((40, 3)), rng.standard_normal(40)))

        twice, _ = data_model.standardize(once)

        np.testing.assert_allclose(twice.X, once.X, atol=1e-12)

    def test_moments(self):
        rng = np.random.default_rng(5)
        d = data_model.Dataset(rng.standard_normal((50, 4)) * 7.0 + 3.0, rng.standard_normal(50))

        out, _ = data_model.standardize(d)

        self.assertTrue(np.all(np.abs(out.X.mean(axis=0)) < 1e-12))
        np.testing.assert_allclose(out.X.std(axis=0, ddof=1), np.ones(4), atol=1e-12)
        np.testing.assert_array_equal(out.y, d.y)

    def test_constant_column(self):
        d = data_model.Dataset(np.array([[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]), np.zeros(3))

        with self.assertRaises(ValueError):
            data_model.standardize(d)

    def test_apply_to_test_rows(self):
        rng = np.random.default_rng(9)
        train = data_model.Dataset(rng.standard_normal((30, 2)), rng.standard_normal(30))
        _, stats = data_model.standardize(train)

        again = data_model.apply_standardization(train, stats)

        np.testing.assert_allclose(again.X.mean(axis=0), 0.0, atol=1e-12)


class SplitTest(unittest.TestCase):
    def setUp(self):
        self.d = data_model.Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))

    def test_cardinality(self):
        s = data_model.split(self.d, 0.7, seed=1)

        self.assertEqual(len(s.train_indices), 7)
        self.assertEqual(len(s.test_indices), 3)
        self.assertEqual(sorted(np.concatenate([s.train_indices, s.test_indices]).tolist()), list(range(10)))

    def test_deterministic(self):
        first = data_model.split(self.d, 0.7, seed=4)
        second = data_model.split(self.d, 0.7, seed=4)

        np.testing.assert_array_equal(first.train_indices, second.train_indices)

    def test_degenerate_fraction(self):
        with self.assertRaises(ValueError):
            data_model.split(self.d, 0.01, seed=0)

    def test_frequency(self):
        d = data_model.Dataset(np.ones((1000, 1)), np.ones(1000))
        hits = np.zeros(1000)
        for seed in range(100):
            hits[data_model.split(d, 0.7, seed=seed).train_indices] += 1

        # each index in train ~70% of the time; averaged to stay well inside +-5 points
        self.assertLess(abs(hits.mean() / 100 - 0.7), 0.05)
        self.assertLess(np.mean(np.abs(hits / 100 - 0.7) > 0.15), 0.01)


if __name__ == "__main__":
    unittest.main()

import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from bench_cli import bench_cli
from data_model import data_model
from leverage import leverage
from samplers import samplers
from simgen import simgen
from theory import theory

ROPT = samplers.Strategy.ROPT
ROPT_ACC = samplers.Strategy.ROPT_ACC
RUNIF = samplers.Strategy.RUNIF
RLEV = samplers.Strategy.RLEV


def _small_spec(**kwargs):
    defaults = dict(
        sim=simgen.SimConfig(n=2000, p=10, q=5, case=1, seed=1),
        methods=(ROPT,),
        r_grid=(50, 100),
        replicates=3,
        seed=7,
    )
    defaults.update(kwargs)
    return bench_cli.ExperimentSpec(**defaults)


def _read_bytes(path):
    with open(path, "rb") as infile:
        return infile.read()


class ExperimentSpecTest(unittest.TestCase):
    def test_defaults(self):
        spec = bench_cli.ExperimentSpec()

        self.assertEqual(spec.r_grid, (100, 200, 400, 800, 1600, 3200, 6400))
        self.assertEqual(spec.replicates, 20)
        self.assertEqual(len(spec.methods), 6)
        self.assertIs(spec.lambda_policy, bench_cli.LambdaPolicy.GCV)

    def test_parses_tags(self):
        spec = _small_spec(methods=("ropt-acc", "RUNIF"), lambda_policy="k-fold")

        self.assertEqual(spec.methods, (ROPT_ACC, RUNIF))
        self.assertIs(spec.lambda_policy, bench_cli.LambdaPolicy.KFOLD)

    def test_invalid(self):
        for kwargs in (
            {"r_grid": (100, 50)},
            {"r_grid": ()},
            {"replicates": 0},
            {"lambda_policy": "fixed"},
            {"methods": ("ROPT", "ROPT")},
            {"source": "csv"},
            {"reference_lambda": -1.0},
        ):
            with self.assertRaises(ValueError, msg=str(kwargs)):
                _small_spec(**kwargs)


class RunSimulationTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.methods = (ROPT_ACC, ROPT, RLEV, RUNIF)
        cls.reports = {}
        for case in range(1, 7):
            spec = bench_cli.ExperimentSpec(
                sim=simgen.SimConfig(n=10000, p=20, q=5 if case <= 3 else 10, case=case, seed=case),
                methods=cls.methods,
                r_grid=(100, 400, 1600),
                replicates=20,
                seed=11,
            )
            cls.reports[case] = bench_cli.run_simulation(spec)

    def _mean_mse(self, case):
        aggregates = self.reports[case].aggregates()
        return aggregates[aggregates["metric"] == bench_cli.MSE_TRUE].set_index(["method", "r"])["mean"]

    def test_approximate_plan_matches_exact_plan(self):
        for case in self.reports:
            mse = self._mean_mse(case)
            for r in (100, 400, 1600):
                ratio = mse[("ROPT", r)] / mse[("ROPT_ACC", r)]
                self.assertLess(ratio, 1.5, f"case {case} r={r}")
                self.assertGreater(ratio, 1 / 1.5, f"case {case} r={r}")

    def test_optimal_plan_leads_at_small_r(self):
        wins = []
        for case in self.reports:
            mse = self._mean_mse(case)
            if mse[("ROPT", 100)] < min(mse[("RUNIF", 100)], mse[("RLEV", 100)]):
                wins.append(case)

        self.assertGreaterEqual(len(wins), 4, f"ROPT ahead at r=100 in cases {wins}")

    def test_methods_agree_at_large_r(self):
        for case in self.reports:
            mse = self._mean_mse(case)
            values = [mse[(method.value, 1600)] for method in self.methods]

            self.assertLessEqual(max(values), 2 * min(values), f"case {case}")

    def test_record_layout(self):
        records = self.reports[1].records

        self.assertEqual(list(records.columns), bench_cli.RECORD_COLUMNS)
        self.assertEqual(len(records), 4 * 3 * 20 * 3)
        self.assertEqual(
            set(records["metric"]), {bench_cli.MSE_TRUE, bench_cli.MSE_FULL, bench_cli.LAMBDA_TILDE}
        )

    def test_error_shrinks_with_r(self):
        for report in self.reports.values():
            self.assertEqual(bench_cli.trend_violations(report), [])

    def test_lambda_tilde_approaches_reference(self):
        gaps = bench_cli.lambda_gaps(self.reports[1]).set_index(["method", "r"])["gap"]

        for method in ("ROPT", "ROPT_ACC"):
            self.assertLess(gaps[(method, 1600)], gaps[(method, 100)])

    def test_same_seed_same_report(self):
        spec = _small_spec(methods=tuple(samplers.Strategy), replicates=1)

        first = bench_cli.run_simulation(spec, workers=1)
        second = bench_cli.run_simulation(spec, workers=1)

        pd.testing.assert_frame_equal(first.records, second.records)

    def test_byte_identical_for_any_worker_count(self):
        spec = _small_spec(methods=tuple(samplers.Strategy), lambda_policy="kfold")

        with tempfile.TemporaryDirectory() as folder:
            paths = []
            for workers in (1, 4):
                path = os.path.join(folder, f"run{workers}", "report.csv")
                bench_cli.emit_report(bench_cli.run_simulation(spec, workers=workers), "csv", path)
                paths.append(path)
            summaries = [path.replace("report.csv", "report_summary.csv") for path in paths]

            self.assertEqual(_read_bytes(paths[0]), _read_bytes(paths[1]))
            self.assertEqual(_read_bytes(summaries[0]), _read_bytes(summaries[1]))

    def test_uniform_full_size_draw_tracks_reference_fit(self):
        spec = _small_spec(methods=(RUNIF,), r_grid=(2000,), replicates=20, lambda_policy="fixed", fixed_lambda=5.0)
        data = bench_cli.prepare_simulation(spec)

        report = bench_cli.run_prepared(spec, data)

        mse = report.records[report.records["metric"] == bench_cli.MSE_FULL]["value"].mean()
        expected = np.trace(theory.build_report(data.train, samplers.plan_runif(2000), 5.0, 2000).amse)
        self.assertEqual(data.lam, 5.0)
        self.assertGreater(mse, 0.5 * expected)
        self.assertLess(mse, 2.0 * expected)
        self.assertLess(mse, 0.05 * np.sum(data.beta_full ** 2))

    def test_r_above_n(self):
        with self.assertRaises(ValueError):
            bench_cli.run_simulation(_small_spec(r_grid=(100, 3000)))

    def test_expected_trace_ordering_over_the_six_cases(self):
        for case in range(1, 7):
            q = 5 if case <= 3 else 10
            d, _ = simgen.generate(simgen.SimConfig(n=10000, p=20, q=q, case=case, seed=case))
            train, _ = data_model.standardize(d)
            profile = leverage.exact_ridge_leverage(train, 1.0)
            objective = {
                method: theory.expected_trace_objective(train, profile, samplers.build_plan(method, train, 1.0), 100)
                for method in (ROPT, RLEV, RUNIF)
            }

            self.assertLess(objective[ROPT], objective[RUNIF], f"case {case}")
            self.assertLess(objective[ROPT], objective[RLEV], f"case {case}")

    def test_theory_diagnostics(self):
        spec = _small_spec()
        data = bench_cli.prepare_simulation(spec)

        report = bench_cli.theory_diagnostics(spec, data)

        self.assertEqual(report.r, 50)
        self.assertEqual(report.strategy, "ROPT_ACC")
        self.assertAlmostEqual(report.lam, data.lam)


class RunRealdataTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.folder = tempfile.TemporaryDirectory()
        cls.path = os.path.join(cls.folder.name, "case2.csv")
        simgen.export_csv(simgen.SimConfig(n=20000, p=30, case=2, seed=21), cls.path)

    @classmethod
    def tearDownClass(cls):
        cls.folder.cleanup()

    def _spec(self, **kwargs):
        defaults = dict(
            source="csv", csv_path=self.path, response="y", drop_columns=(), methods=(ROPT, RUNIF), seed=3
        )
        defaults.update(kwargs)
        return bench_cli.ExperimentSpec(**defaults)

    def test_small_subsample_advantage(self):
        report = bench_cli.run_realdata(self._spec(r_grid=(100,), replicates=20))
        records = report.records

        medians = records[records["metric"] == bench_cli.MSE_FULL].groupby("method")["value"].median()
        self.assertLess(medians["ROPT"], medians["RUNIF"])

        test_errors = records[records["metric"] == bench_cli.TEST_ERROR].groupby("method")["value"].median()
        self.assertEqual(report.metadata["n_train"], 14000)
        self.assertEqual(report.metadata["n_test"], 6000)
        self.assertTrue(np.all(report.metadata["full_test_error"] <= test_errors.values))
        self.assertNotIn(bench_cli.MSE_TRUE, set(records["metric"]))

    def test_subsample_larger_than_training(self):
        with self.assertRaisesRegex(ValueError, "subsample size exceeds training size"):
            bench_cli.run_realdata(self._spec(r_grid=(14000,), replicates=1))

    def test_missing_file(self):
        with self.assertRaises(data_model.IngestionError):
            bench_cli.run_realdata(self._spec(csv_path=os.path.join(self.folder.name, "absent.csv")))


class EmitReportTest(unittest.TestCase):
    def test_empty_method_list(self):
        report = bench_cli.run_simulation(_small_spec(methods=()))

        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "empty.csv")
            bench_cli.emit_report(report, "csv", path)
            loaded = bench_cli.load_report(path)
            with open(path, encoding="utf-8") as infile:
                header = infile.read().strip()

        self.assertEqual(header, ",".join(bench_cli.RECORD_COLUMNS))
        self.assertEqual(len(loaded.records), 0)
        self.assertTrue(loaded.aggregates().empty)

    def test_round_trip(self):
        report = bench_cli.run_simulation(_small_spec(methods=(ROPT, samplers.Strategy.IBOSS)))

        with tempfile.TemporaryDirectory() as folder:
            for fmt in ("csv", "json"):
                path = os.path.join(folder, f"report.{fmt}")
                bench_cli.emit_report(report, fmt, path)
                loaded = bench_cli.load_report(path)

                pd.testing.assert_frame_equal(loaded.aggregates(), report.aggregates(), check_dtype=False)
                self.assertEqual(loaded.metadata["reference_lambda"], report.metadata["reference_lambda"])
                self.assertEqual(list(loaded.records.columns), bench_cli.RECORD_COLUMNS)

    def test_summary_has_log_columns(self):
        aggregates = bench_cli.run_simulation(_small_spec()).aggregates()

        np.testing.assert_allclose(aggregates["log_r"], np.log(aggregates["r"].astype(float)))
        self.assertIn("log_mean", aggregates.columns)

    def test_unknown_format(self):
        report = bench_cli.run_simulation(_small_spec(methods=()))

        with tempfile.TemporaryDirectory() as folder:
            with self.assertRaises(ValueError):
                bench_cli.emit_report(report, "xml", os.path.join(folder, "report.xml"))


class PlanTimingTest(unittest.TestCase):
    def test_exact_plan_costs_more(self):
        frame = bench_cli.plan_timing_scan((20000, 80000), p=50)

        self.assertEqual(list(frame.columns), ["n", "ropt_seconds", "exact_seconds"])
        self.assertTrue(np.all(frame[["ropt_seconds", "exact_seconds"]].values > 0))
        self.assertGreater(frame["exact_seconds"].iloc[-1], frame["ropt_seconds"].iloc[-1])
        self.assertEqual(set(bench_cli.timing_slopes(frame)), {"ropt", "exact"})


if __name__ == "__main__":
    unittest.main()

"""
 Command line entry point of the subsampling benchmark

 Example usage:
    python pipelines/cli.py --source sim --case 3 --n 20000 --p 20 --r-grid 100,400,1600 --out output/case3.csv
    python pipelines/cli.py --source csv --csv-path OnlineNewsPopularity.csv --response shares --format json
"""
import argparse
import logging
import os
import sys

from bench_cli import bench_cli
from data_model import data_model
from samplers import samplers
from simgen import simgen
from tuning import tuning
from utils import file_ops


def __int_list(value):
    try:
        return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma separated integers, got '{value}'")


def __name_list(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def parse_args():
    parser = argparse.ArgumentParser(description="Optimal subsampling benchmark for large-sample ridge regression")
    parser.add_argument("--source", choices=["sim", "csv"], default="sim", help="Simulated cases or a CSV table.")
    parser.add_argument("--case", type=int, choices=sorted(simgen.CASES), default=1, help="Simulation case.")
    parser.add_argument("--n", type=int, default=simgen.DEFAULT_N, help="Simulated sample size.")
    parser.add_argument("--p", type=int, default=simgen.DEFAULT_P, help="Simulated dimension.")
    parser.add_argument("--q", type=int, default=None, help="Informative dimension, defaults to the case's.")
    parser.add_argument("--noise-sd", type=float, default=simgen.DEFAULT_NOISE_SD, help="Noise standard deviation.")
    parser.add_argument(
        "--r-grid",
        type=__int_list,
        default=bench_cli.DEFAULT_R_GRID,
        help="Comma separated subsample sizes (i.e: 100,200,400).",
    )
    parser.add_argument("--replicates", type=int, default=bench_cli.DEFAULT_REPLICATES, help="Replicates per size.")
    parser.add_argument(
        "--methods",
        type=__name_list,
        default=tuple(s.value for s in samplers.Strategy),
        help="Comma separated strategies among ROPT_ACC,ROPT,RLEV,RUNIF,OPT,IBOSS.",
    )
    parser.add_argument("--lambda-policy", choices=["gcv", "kfold", "fixed"], default="gcv", help="Subsample lambda.")
    parser.add_argument("--lambda", dest="fixed_lambda", type=float, default=None, help="Lambda of the fixed policy.")
    parser.add_argument("--kfold", type=int, default=tuning.DEFAULT_FOLDS, help="Folds of the kfold policy.")
    parser.add_argument("--grid-min", type=float, default=tuning.DEFAULT_GRID_MIN, help="Smallest grid lambda.")
    parser.add_argument("--grid-max", type=float, default=tuning.DEFAULT_GRID_MAX, help="Largest grid lambda.")
    parser.add_argument("--grid-size", type=int, default=tuning.DEFAULT_GRID_SIZE, help="Grid size.")
    parser.add_argument("--seed", type=int, default=0, help="Root seed.")
    parser.add_argument("--out", type=str, default=None, help="Report path, defaults to $RIDGESUB_OUTPUT_DIR/report.")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Report format.")
    parser.add_argument("--csv-path", type=str, default="", help="CSV table of the csv source.")
    parser.add_argument(
        "--response", type=str, default=data_model.NEWS_RESPONSE_COLUMN, help="Response column of the csv source."
    )
    parser.add_argument(
        "--drop-columns",
        type=__name_list,
        default=data_model.NEWS_DROP_COLUMNS,
        help="Comma separated non-predictive columns of the csv source.",
    )
    parser.add_argument(
        "--train-fraction", type=float, default=data_model.DEFAULT_TRAIN_FRACTION, help="Training share."
    )
    parser.add_argument(
        "--reference-lambda", type=float, default=None, help="Override the lambda of the full-sample reference fit."
    )
    parser.add_argument(
        "--diagnostics", action="store_true", help="Also write the asymptotic report of the ROPT-acc plan."
    )
    return parser


def build_spec(flags):
    """
    ExperimentSpec from parsed flags

    :raises ValueError: inconsistent flags
    """
    sim = simgen.SimConfig(n=flags.n, p=flags.p, q=flags.q, case=flags.case, noise_sd=flags.noise_sd, seed=flags.seed)
    return bench_cli.ExperimentSpec(
        source=flags.source,
        sim=sim,
        csv_path=flags.csv_path,
        response=flags.response,
        drop_columns=flags.drop_columns,
        methods=flags.methods,
        r_grid=flags.r_grid,
        replicates=flags.replicates,
        lambda_policy=flags.lambda_policy,
        fixed_lambda=flags.fixed_lambda,
        kfold=flags.kfold,
        grid=tuning.LambdaGrid.logspace(flags.grid_min, flags.grid_max, flags.grid_size),
        seed=flags.seed,
        train_fraction=flags.train_fraction,
        reference_lambda=flags.reference_lambda,
    )


def main(argv=None):
    logging.basicConfig(format="%(asctime)s %(levelname)s %(message)s")
    logging.getLogger().setLevel(logging.INFO)
    flags = parse_args().parse_args(argv)
    out = flags.out or os.path.join(bench_cli.default_output_dir(), f"report.{flags.format}")

    try:
        spec = build_spec(flags)
        data = bench_cli.prepare(spec)
        report = bench_cli.run_prepared(spec, data)
        bench_cli.emit_report(report, flags.format, out)
        bench_cli.trend_violations(report)
        if flags.diagnostics:
            diagnostics_path = file_ops.sibling_path(out, "_theory", ".json")
            file_ops.write_json(bench_cli.theory_diagnostics(spec, data).to_dict(), diagnostics_path)
    except (ValueError, OSError) as e:
        logging.error(f"Benchmark failed: {e}")
        return 1

    logging.info(f"Benchmark done, {len(report.records)} records")
    return 0


if __name__ == "__main__":
    sys.exit(main())

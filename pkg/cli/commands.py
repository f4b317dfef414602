import argparse
import logging
import os
import sys

import numpy as np

from cli import io
from estimation.diagnostics import eigen_spike_report, projection_quality, re_condition_sample
from estimation.estimators import (
    LASSO,
    METHODS,
    EstimatorOptions,
    LambdaRule,
    estimate_cce_pooled,
    estimate_hdcce,
    estimate_oracle,
)
from estimation.projection import hd_projection, oracle_projection, transform_panel
from estimation.spectral import (
    cross_sectional_means,
    default_tau,
    khat_threshold,
    ktilde_ratio,
    scree_table,
    spectral_summary,
)
from experiments.montecarlo import run_scenario
from experiments.report import ReportWriter
from experiments.scenarios import (
    DEFAULT_MASTER_SEED,
    DEFAULT_RUNS,
    LABELS,
    FULL_RUNS,
    PRESET_SETTINGS,
    ScenarioSpec,
    preset_scenarios,
)
from panel_data.errors import ConfigError, DataError, HdcceError, NumericError
from panel_data.simulate import SimulationConfig, simulate_panel


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

THREADS_ENV = "HDCCE_THREADS"
RE_SAMPLES = 1000

HD = "hd"
ORACLE = "oracle"
CCE = "cce"


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _name_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_data_args(parser):
    parser.add_argument("--data", default=".", help="Directory holding y.csv and x.csv (default: .)")
    parser.add_argument("--y", help="Response file (default: <data>/y.csv)")
    parser.add_argument("--x", help="Long-format regressor file (default: <data>/x.csv)")


def _load_panel(args):
    y_path = args.y or os.path.join(args.data, "y.csv")
    x_path = args.x or os.path.join(args.data, "x.csv")
    panel = io.read_panel(y_path, x_path)
    logger.info("loaded panel n=%d T=%d p=%d", panel.n, panel.T, panel.p)
    return panel


def _raw_columns(args, p):
    if args.raw_columns is None:
        return None
    cols = sorted(set(args.raw_columns))
    if not cols or cols[0] < 1 or cols[-1] > p:
        raise ConfigError(f"--raw-columns must lie in 1..{p}, got {args.raw_columns}")
    return tuple(j - 1 for j in cols)


def resolve_threads(requested):
    env = os.environ.get(THREADS_ENV)
    value = requested if env is None or env == "" else env
    try:
        threads = int(value)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from exc
    if threads < 1:
        raise ConfigError(f"thread count must be positive, got {threads}")
    return threads


def cmd_simulate(args, parser):
    values = {}
    if args.config:
        values = io.read_config(args.config)
    for name in ("n", "T", "d", "rho", "seed"):
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if args.beta is not None:
        values["beta"] = args.beta
    missing = [f"--{name}" for name in ("n", "T", "d") if name not in values]
    if missing:
        parser.error(f"the following arguments are required: {', '.join(missing)}")
    values.setdefault("seed", 0)

    config = SimulationConfig.from_dict(values).validate()
    panel, truth = simulate_panel(config)
    y_path, x_path = io.write_panel(panel, args.out)
    truth_path = io.write_truth(config, truth, os.path.join(args.out, "truth.json"))
    logger.info("wrote %s, %s, %s", y_path, x_path, truth_path)
    return EXIT_OK


def cmd_scree(args):
    panel = _load_panel(args)
    xbar = cross_sectional_means(panel.X)
    raw = _raw_columns(args, panel.p)
    if raw is not None:
        xbar = xbar[:, list(raw)]
    spectral = spectral_summary(xbar)
    table = scree_table(spectral)
    tau = default_tau(spectral.eigvals, args.alpha_tau)

    io.write_csv(table, sys.stdout)
    print()
    print(f"tau = {args.alpha_tau} * lambda_1 = {tau:.17g}")
    print(f"K_hat (threshold) = {khat_threshold(spectral.eigvals, tau)}")
    print(f"K_tilde (variance share) = {ktilde_ratio(spectral.eigvals, args.alpha_tau)}")
    if args.out:
        io.write_csv(table, args.out)
        logger.info("wrote %s", args.out)
    return EXIT_OK


def _lambda_rule(args):
    if args.fixed_lambda is not None:
        return LambdaRule.fixed(args.fixed_lambda)
    if args.effective_noise is not None:
        return LambdaRule.effective_noise(q=args.effective_noise, nsim=args.nsim, noise_sd=args.noise_sd)
    return LambdaRule.cv(args.cv)


def _fit_diagnostics(panel, report, opts, estimator, F, beta_true):
    rows = [("k_used", report.k_used), ("lambda_used", report.lambda_used)]
    rows += [(name, value) for name, value in report.diagnostics.items() if np.isscalar(value)]

    if estimator == HD:
        xbar = cross_sectional_means(panel.X)
        if opts.raw_columns is not None:
            xbar = xbar[:, list(opts.raw_columns)]
        spectral = spectral_summary(xbar)
        if 1 <= report.k_used < spectral.p:
            spike = eigen_spike_report(spectral, report.k_used)
            rows += [("gap_ratio", spike["gap_ratio"]), ("head_over_p", spike["head_over_p"])]
        proj = hd_projection(xbar, spectral, report.k_used)
    elif estimator == ORACLE:
        proj = oracle_projection(F)
    else:
        return rows

    if F is not None and estimator == HD:
        quality = projection_quality(proj, F)
        rows += [("projection_sym_err", quality["sym_err"]), ("projection_idem_err", quality["idem_err"])]

    support = np.flatnonzero(beta_true) if beta_true is not None else np.flatnonzero(report.beta_hat)
    if support.size:
        design = transform_panel(proj, panel).x_hat
        estimate = re_condition_sample(design, support, RE_SAMPLES, seed=opts.seed)
        rows += [("re_index_set", ";".join(str(j + 1) for j in estimate.index_set)),
                 ("re_phi_lower", estimate.phi_lower), ("re_samples", estimate.samples)]
    return rows


def cmd_estimate(args):
    panel = _load_panel(args)
    F = beta_true = None
    if args.truth:
        F, beta_true = io.read_truth(args.truth)
        if F.shape[0] != panel.T or beta_true.shape != (panel.p,):
            raise DataError(f"truth file {args.truth} does not match the panel (T={panel.T}, p={panel.p})")
    if args.estimator == ORACLE and F is None:
        raise ConfigError("--estimator oracle needs --truth")

    opts = EstimatorOptions(
        method=args.method,
        alpha_tau=args.alpha_tau,
        k_override=args.k,
        raw_columns=_raw_columns(args, panel.p),
        lambda_rule=_lambda_rule(args),
        seed=args.seed,
    )
    if args.estimator == HD:
        report = estimate_hdcce(panel, opts, F=F)
    elif args.estimator == ORACLE:
        report = estimate_oracle(panel, F, opts)
    else:
        report = estimate_cce_pooled(panel, augment_with_response=args.augment_response)

    fit_path, beta_path = io.write_fit(report, args.out, extra={"options": opts.to_dict()})
    logger.info("wrote %s, %s", fit_path, beta_path)
    if args.diagnostics:
        rows = _fit_diagnostics(panel, report, opts, args.estimator, F, beta_true)
        path = io.write_fit_diagnostics(rows, os.path.join(args.out, "diagnostics.csv"))
        logger.info("wrote %s", path)
    if not report.converged:
        logger.warning("the reported fit did not converge; see fit.json")
    return EXIT_OK


def cmd_mc(args):
    threads = resolve_threads(args.threads)
    runs = FULL_RUNS if args.full_runs else args.runs
    common = dict(
        estimators=tuple(args.estimators) if args.estimators else None,
        runs=runs,
        master_seed=args.seed,
        rho=args.rho,
        alpha_tau=args.alpha_tau,
        cv_folds=args.cv,
        diagnostics=args.diagnostics,
    )
    if args.p is not None:
        jobs = [(args.out, ScenarioSpec(args.scenario, args.n, args.T, args.p, **common))]
    else:
        if (args.scenario, args.n, args.T) not in PRESET_SETTINGS:
            raise ConfigError(f"--p is required: no preset setting for scenario {args.scenario} "
                              f"with (n, T) = ({args.n}, {args.T})")
        jobs = [(os.path.join(args.out, f"p{spec.p}"), spec)
                for spec in preset_scenarios(args.scenario, args.n, args.T, **common)]

    for _, spec in jobs:
        spec.validate()
    for out_dir, spec in jobs:
        report = run_scenario(spec, threads=threads)
        paths = ReportWriter(out_dir, threads=threads).save_all(report)
        logger.info("wrote %s", ", ".join(paths))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdcce",
        description="High-dimensional CCE estimation for panels with interactive fixed effects",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py simulate --n 50 --T 50 --d 4 --rho 0.25 --seed 7 --out data
  python main.py scree --data data
  python main.py estimate --data data --method lasso --cv 10 --out fit
  python main.py mc --scenario A --n 50 --T 50 --p 15 --runs 200 --seed 1 --estimators hd_ls,oracle_ls,cce
        """,
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Log warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Simulate a panel from the factor design")
    p_sim.add_argument("--config", help="JSON file with simulation options; flags override it")
    p_sim.add_argument("--n", type=int, help="Number of units")
    p_sim.add_argument("--T", type=int, help="Number of time periods")
    p_sim.add_argument("--d", type=int, help="Regressors per group, p = 3 + 3d")
    p_sim.add_argument("--rho", type=float, help="Pairwise loading correlation (default: 0.25)")
    p_sim.add_argument("--beta", type=_float_list, help="Comma-separated coefficients, length p")
    p_sim.add_argument("--seed", type=int, help="Master seed (default: 0)")
    p_sim.add_argument("--out", default=".", help="Output directory (default: .)")

    p_scree = sub.add_parser("scree", help="Print the eigenvalue table of the averaged regressors")
    _add_data_args(p_scree)
    p_scree.add_argument("--alpha-tau", type=float, default=0.05, help="Threshold share (default: 0.05)")
    p_scree.add_argument("--raw-columns", type=_int_list, help="1-based columns entering the averages")
    p_scree.add_argument("--out", help="Also write the table to this CSV file")

    p_est = sub.add_parser("estimate", help="Fit an estimator to a panel")
    _add_data_args(p_est)
    p_est.add_argument("--estimator", choices=(HD, ORACLE, CCE), default=HD, help="Pipeline (default: hd)")
    p_est.add_argument("--method", choices=METHODS, default=LASSO, help="Final step (default: lasso)")
    p_est.add_argument("--alpha-tau", type=float, default=0.05, help="Threshold share (default: 0.05)")
    p_est.add_argument("--k", type=int, help="Use this many factors instead of the estimated count")
    p_est.add_argument("--raw-columns", type=_int_list, help="1-based columns entering the averages")
    penalty = p_est.add_mutually_exclusive_group()
    penalty.add_argument("--cv", type=int, default=10, help="Cross-validation folds (default: 10)")
    penalty.add_argument("--lambda", dest="fixed_lambda", type=float, help="Fixed lasso penalty")
    penalty.add_argument("--effective-noise", type=float, metavar="Q",
                         help="Penalty from the Q-quantile of the simulated effective noise")
    p_est.add_argument("--nsim", type=int, default=1000, help="Effective-noise draws (default: 1000)")
    p_est.add_argument("--noise-sd", type=float, default=1.0,
                       help="Error standard deviation for the effective-noise draws (default: 1.0)")
    p_est.add_argument("--augment-response", action="store_true", help="CCE: add the averaged response")
    p_est.add_argument("--truth", help="truth.json from simulate, for the oracle and diagnostics")
    p_est.add_argument("--diagnostics", action="store_true", help="Also write diagnostics.csv")
    p_est.add_argument("--seed", type=int, default=0, help="Seed for folds and noise draws (default: 0)")
    p_est.add_argument("--out", default=".", help="Output directory (default: .)")

    p_mc = sub.add_parser("mc", help="Run a Monte Carlo scenario")
    p_mc.add_argument("--scenario", choices=LABELS, required=True)
    p_mc.add_argument("--n", type=int, required=True)
    p_mc.add_argument("--T", type=int, required=True)
    p_mc.add_argument("--p", type=int, help="Regressor count; omit to run every preset value")
    p_mc.add_argument("--runs", type=int, default=DEFAULT_RUNS, help=f"Runs (default: {DEFAULT_RUNS})")
    p_mc.add_argument("--full-runs", action="store_true", help=f"Use {FULL_RUNS} runs")
    p_mc.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED,
                      help=f"Master seed (default: {DEFAULT_MASTER_SEED})")
    p_mc.add_argument("--estimators", type=_name_list, help="Comma-separated estimator names")
    p_mc.add_argument("--rho", type=float, default=0.25, help="Loading correlation (default: 0.25)")
    p_mc.add_argument("--alpha-tau", type=float, default=0.05, help="Threshold share (default: 0.05)")
    p_mc.add_argument("--cv", type=int, default=10, help="Cross-validation folds (default: 10)")
    p_mc.add_argument("--threads", type=int, default=1, help=f"Worker threads; {THREADS_ENV} overrides")
    p_mc.add_argument("--diagnostics", action="store_true", help="Also write diagnostics.csv")
    p_mc.add_argument("--out", default="mc_out", help="Output directory (default: mc_out)")
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)

    try:
        if args.command == "simulate":
            return cmd_simulate(args, parser)
        if args.command == "scree":
            return cmd_scree(args)
        if args.command == "estimate":
            return cmd_estimate(args)
        return cmd_mc(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericError, HdcceError, np.linalg.LinAlgError) as exc:
        logger.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

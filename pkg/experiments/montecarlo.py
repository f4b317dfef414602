import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from estimation.diagnostics import eigen_spike_report, projection_quality
from estimation.estimators import (
    LASSO,
    LEAST_SQUARES,
    EstimatorOptions,
    LambdaRule,
    estimate_cce_pooled,
    estimate_hdcce,
    estimate_oracle,
)
from estimation.projection import hd_projection
from estimation.spectral import cross_sectional_means, default_tau, khat_threshold, spectral_summary
from experiments.scenarios import CCE, HD_LASSO, HD_LS, ORACLE_LASSO, ORACLE_LS
from panel_data import rng as streams
from panel_data.errors import DataError, HdcceError
from panel_data.simulate import simulate_panel


logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
L1_ROW = "l1"


@dataclass
class EstimatorOutcome:
    beta_hat: np.ndarray = None
    k_used: int = None
    lambda_used: float = None
    converged: bool = True
    degenerate: bool = False
    error: str = None

    @property
    def excluded(self):
        return self.error is not None or self.degenerate or not self.converged

    @property
    def reason(self):
        if self.error is not None:
            return self.error
        if self.degenerate:
            return "degenerate projection"
        return "did not converge" if not self.converged else None


@dataclass
class RunRecord:
    run: int
    seed: int
    k_hat: int
    outcomes: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


@dataclass
class McReport:
    spec: object
    beta: np.ndarray
    records: list

    @property
    def estimators(self):
        return self.spec.estimator_names

    def outcomes(self, estimator):
        return [(rec.run, rec.outcomes[estimator]) for rec in self.records]

    def n_excluded(self, estimator):
        return sum(outcome.excluded for _, outcome in self.outcomes(estimator))

    def deviations_frame(self):
        rows = []
        for rec in self.records:
            for name in self.estimators:
                outcome = rec.outcomes[name]
                if outcome.excluded:
                    continue
                for j in self.spec.coordinates:
                    rows.append((rec.run, name, j, outcome.beta_hat[j - 1] - self.beta[j - 1]))
        return pd.DataFrame(rows, columns=["run", "estimator", "j", "delta"])

    def diagnostics_frame(self):
        rows = [{"run": rec.run, "k_hat": rec.k_hat, **rec.diagnostics} for rec in self.records]
        return pd.DataFrame(rows)

    def head_selected_share(self, estimator, head=3):
        kept = [o.beta_hat for _, o in self.outcomes(estimator) if not o.excluded]
        if not kept:
            return float("nan")
        return float(np.mean([np.all(b[:head] != 0) for b in kept]))


def _quantile_row(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return dict.fromkeys(("q05", "q25", "median", "q75", "q95", "mean"), float("nan"))
    q = np.quantile(values, QUANTILES, method="linear")
    return {"q05": q[0], "q25": q[1], "median": q[2], "q75": q[3], "q95": q[4], "mean": float(values.mean())}


def summarize(report):
    """One row per (estimator, coordinate) plus an ``l1`` row for the full error."""
    if not report.records:
        raise DataError("cannot summarize an empty report")
    rows = []
    requested = len(report.records)
    for name in report.estimators:
        kept = [o.beta_hat for _, o in report.outcomes(name) if not o.excluded]
        n_runs = len(kept)
        n_excluded = requested - n_runs
        for j in report.spec.coordinates:
            est = np.array([b[j - 1] for b in kept])
            rows.append({
                "estimator": name,
                "coordinate": str(j),
                **_quantile_row(est - report.beta[j - 1]),
                "share_exact_zero": float(np.mean(est == 0.0)) if n_runs else float("nan"),
                "n_runs": n_runs,
                "n_excluded": n_excluded,
            })
        l1 = [np.abs(b - report.beta).sum() for b in kept]
        rows.append({
            "estimator": name,
            "coordinate": L1_ROW,
            **_quantile_row(l1),
            "share_exact_zero": float(np.mean([not np.any(b) for b in kept])) if n_runs else float("nan"),
            "n_runs": n_runs,
            "n_excluded": n_excluded,
        })
    return pd.DataFrame(rows, columns=[
        "estimator", "coordinate", "q05", "q25", "median", "q75", "q95", "mean",
        "share_exact_zero", "n_runs", "n_excluded",
    ])


class MonteCarloRunner:

    def __init__(self, spec, threads=1, log_interval=None):
        self.spec = spec.validate()
        self.threads = max(1, int(threads))
        self.log_interval = log_interval or max(1, spec.runs // 10)
        self.excluded = dict.fromkeys(spec.estimator_names, 0)

    def run_seed(self, run):
        return streams.derive_seed(self.spec.master_seed, streams.RUNS, run)

    def options(self, method, seed):
        if method == LEAST_SQUARES:
            return EstimatorOptions(method=LEAST_SQUARES, alpha_tau=self.spec.alpha_tau, seed=seed)
        return EstimatorOptions(alpha_tau=self.spec.alpha_tau, lambda_rule=LambdaRule.cv(self.spec.cv_folds),
                                seed=seed)

    def fit(self, name, panel, truth, seed):
        if name == HD_LASSO:
            return estimate_hdcce(panel, self.options(LASSO, seed))
        if name == HD_LS:
            return estimate_hdcce(panel, self.options(LEAST_SQUARES, seed))
        if name == ORACLE_LASSO:
            return estimate_oracle(panel, truth.F, self.options(LASSO, seed))
        if name == ORACLE_LS:
            return estimate_oracle(panel, truth.F, self.options(LEAST_SQUARES, seed))
        if name == CCE:
            return estimate_cce_pooled(panel)
        raise ValueError(f"unknown estimator {name!r}")

    def run_one(self, run):
        seed = self.run_seed(run)
        try:
            panel, truth = simulate_panel(self.spec.simulation_config(seed))
            xbar = cross_sectional_means(panel.X)
            spectral = spectral_summary(xbar)
            k_hat = khat_threshold(spectral.eigvals, default_tau(spectral.eigvals, self.spec.alpha_tau))
            diagnostics = self._diagnostics(xbar, spectral, k_hat, truth.F) if self.spec.diagnostics else {}
        except (HdcceError, np.linalg.LinAlgError) as exc:
            error = f"{type(exc).__name__}: {exc}"
            return RunRecord(run, seed, None, {name: EstimatorOutcome(error=error)
                                               for name in self.spec.estimator_names})
        record = RunRecord(run, seed, k_hat, diagnostics=diagnostics)

        for name in self.spec.estimator_names:
            try:
                fit = self.fit(name, panel, truth, seed)
            except (HdcceError, np.linalg.LinAlgError) as exc:
                record.outcomes[name] = EstimatorOutcome(error=f"{type(exc).__name__}: {exc}")
                continue
            record.outcomes[name] = EstimatorOutcome(
                beta_hat=fit.beta_hat,
                k_used=fit.k_used,
                lambda_used=fit.lambda_used,
                converged=fit.converged,
                degenerate=fit.degenerate,
            )
        return record

    def _diagnostics(self, xbar, spectral, k_hat, F):
        k = F.shape[1]
        out = {"gap_ratio": float("nan"), "head_over_p": float("nan"), "projection_ratio": float("nan")}
        if k < spectral.p:
            report = eigen_spike_report(spectral, k)
            out["gap_ratio"] = report["gap_ratio"]
            out["head_over_p"] = report["head_over_p"]
        if k_hat > 0:
            proj = hd_projection(xbar, spectral, k_hat)
            out["projection_ratio"] = projection_quality(proj, F)["ratio"]
        return out

    def run(self):
        spec = self.spec
        logger.info("scenario %s: n=%d T=%d p=%d, %d runs, estimators %s, %d thread(s)",
                    spec.label, spec.n, spec.T, spec.p, spec.runs, ",".join(spec.estimator_names),
                    self.threads)
        records = {}
        if self.threads == 1:
            for run in range(spec.runs):
                self._collect(records, self.run_one(run))
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(self.run_one, run) for run in range(spec.runs)]
                for future in as_completed(futures):
                    self._collect(records, future.result())

        report = McReport(spec, spec.simulation_config(0).beta_vector, [records[r] for r in range(spec.runs)])
        logger.info("scenario %s complete; exclusions %s", spec.label, self._format_exclusions())
        return report

    def _collect(self, records, record):
        records[record.run] = record
        for name, outcome in record.outcomes.items():
            if outcome.excluded:
                self.excluded[name] += 1
                logger.warning("run %d: %s excluded (%s)", record.run, name, outcome.reason)
        done = len(records)
        if done % self.log_interval == 0:
            logger.info("run %d/%d  exclusions: %s", done, self.spec.runs, self._format_exclusions())

    def _format_exclusions(self):
        return " | ".join(f"{name}:{count}" for name, count in self.excluded.items())


def run_scenario(spec, threads=1, log_interval=None):
    return MonteCarloRunner(spec, threads=threads, log_interval=log_interval).run()

"""Monte Carlo acceptance checks on the simulation design.

These take minutes to tens of minutes; run them with ``pytest -m slow``.
Worker threads default to the CPU count; HDCCE_THREADS overrides it.
"""
import functools
import itertools
import os

import numpy as np
import pytest

from cli.commands import resolve_threads
from estimation.diagnostics import eigen_spike_report, projection_quality
from estimation.estimators import estimate_cce_pooled
from estimation.projection import (
    classical_cce_projection,
    hd_projection,
    identity_projection,
    oracle_projection,
    transform_panel,
)
from estimation.solvers import cv_lambda, kkt_violation, lasso, lambda_max
from estimation.spectral import cross_sectional_means, default_tau, khat_threshold, spectral_summary
from experiments.montecarlo import L1_ROW, run_scenario, summarize
from experiments.report import ReportWriter
from experiments.scenarios import ScenarioSpec
from panel_data import rng as streams
from panel_data.dataset import PanelDataset
from panel_data.simulate import SimulationConfig, simulate_panel

pytestmark = pytest.mark.slow

THREADS = resolve_threads(os.cpu_count() or 1)


def row(summary, estimator, coordinate):
    mask = (summary["estimator"] == estimator) & (summary["coordinate"] == str(coordinate))
    return summary[mask].iloc[0]


def iqr(summary, estimator, coordinate):
    r = row(summary, estimator, coordinate)
    return r["q75"] - r["q25"]


def test_projection_algebra_on_random_panels(rng):
    for _ in range(100):
        T = int(rng.integers(5, 40))
        p = int(rng.integers(1, 12))
        X = rng.standard_normal((int(rng.integers(2, 20)), T, p))
        xbar = cross_sectional_means(X)
        spectral = spectral_summary(xbar)
        k = int(rng.integers(1, min(4, spectral.n_materialized) + 1))
        F = rng.standard_normal((T, 3))
        for proj, basis in ((hd_projection(xbar, spectral, k), xbar @ spectral.eigvecs[:, :k]),
                            (oracle_projection(F), F),
                            (classical_cce_projection(xbar), xbar)):
            mat = proj.mat
            assert np.max(np.abs(mat - mat.T)) <= 1e-8
            assert np.max(np.abs(mat @ mat - mat)) <= 1e-8
            assert np.max(np.abs(mat @ basis)) <= 1e-8 * max(1.0, np.abs(basis).max())
            assert np.trace(mat) == pytest.approx(T - proj.rank_removed, abs=1e-6)


def test_classical_cce_breaks_down_when_p_reaches_T(rng):
    for _ in range(50):
        T = int(rng.integers(3, 15))
        p = T + int(rng.integers(0, 10))
        panel = PanelDataset(rng.standard_normal((8, T)), rng.standard_normal((8, T, p)))
        assert np.max(np.abs(classical_cce_projection(cross_sectional_means(panel.X)).mat)) <= 1e-8
        with pytest.warns(RuntimeWarning):
            assert estimate_cce_pooled(panel).degenerate


@pytest.mark.parametrize("n, d, share", [(50, 4, 0.99), (100, 9, 1.0)])
def test_factor_count_is_consistent(n, d, share):
    hits = 0
    for r in range(200):
        seed = streams.derive_seed(1, streams.RUNS, r)
        panel, _ = simulate_panel(SimulationConfig(n=n, T=n, d=d, seed=seed))
        eigvals = spectral_summary(cross_sectional_means(panel.X)).eigvals
        hits += khat_threshold(eigvals, default_tau(eigvals, 0.05)) == 3
    assert hits / 200 >= share


def test_lasso_certificates_on_projected_panels():
    for r in range(50):
        panel, _ = simulate_panel(SimulationConfig(n=30, T=20, d=10, seed=r))
        xbar = cross_sectional_means(panel.X)
        spectral = spectral_summary(xbar)
        k = khat_threshold(spectral.eigvals, default_tau(spectral.eigvals, 0.05))
        transformed = transform_panel(hd_projection(xbar, spectral, k), panel)
        fit = lasso(transformed, 0.05 * lambda_max(transformed))
        assert fit.converged
        assert kkt_violation(transformed, fit.beta_hat, fit.lam) <= 1e-6


def test_lasso_matches_sign_pattern_oracle(rng):
    for _ in range(50):
        p = int(rng.integers(1, 9))
        n_obs = int(rng.integers(p + 2, 21))
        x = rng.standard_normal((n_obs, p))
        y = x[:, 0] + 0.5 * rng.standard_normal(n_obs)
        panel = transform_panel(identity_projection(1),
                                PanelDataset(y[:, None], x[:, None, :]))
        lam = rng.uniform(0.05, 0.8) * lambda_max(panel)
        fit = lasso(panel, lam, tol=1e-10)

        best = np.inf
        for signs in itertools.product((-1, 0, 1), repeat=p):
            signs = np.array(signs, dtype=float)
            active = np.flatnonzero(signs)
            b = np.zeros(p)
            if active.size:
                xa = x[:, active]
                b_active = np.linalg.solve(xa.T @ xa, xa.T @ y - 0.5 * n_obs * lam * signs[active])
                if np.any(np.sign(b_active) != signs[active]):
                    continue
                b[active] = b_active
            r = y - x @ b
            best = min(best, r @ r / n_obs + lam * np.abs(b).sum())
        assert abs(fit.objective - best) <= 1e-6


def test_feasible_least_squares_tracks_the_oracle():
    spec = ScenarioSpec("A", 50, 50, 15, estimators=("hd_ls", "oracle_ls"), runs=500)
    summary = summarize(run_scenario(spec, threads=THREADS))
    for j in spec.coordinates:
        assert abs(row(summary, "hd_ls", j)["median"] - row(summary, "oracle_ls", j)["median"]) <= 0.03
        assert abs(row(summary, "oracle_ls", j)["median"]) <= 0.03
        assert 0.8 <= iqr(summary, "hd_ls", j) / iqr(summary, "oracle_ls", j) <= 1.25


def test_classical_cce_deteriorates_as_p_grows():
    ratios = {}
    for p in (15, 45):
        spec = ScenarioSpec("A", 50, 50, p, estimators=("hd_ls", "cce"), runs=500)
        summary = summarize(run_scenario(spec, threads=THREADS))
        ratios[p] = iqr(summary, "cce", 1) / iqr(summary, "hd_ls", 1)
    assert ratios[15] <= 1.3
    assert ratios[45] >= 1.5


def test_lasso_signatures_in_scenario_b():
    spec = ScenarioSpec("B", 50, 50, 300, estimators=("hd_lasso",), runs=500)
    report = run_scenario(spec, threads=THREADS)
    summary = summarize(report)
    assert row(summary, "hd_lasso", 1)["median"] < 0
    for j in spec.coordinates[1:]:
        assert row(summary, "hd_lasso", j)["share_exact_zero"] >= 0.5
    assert report.head_selected_share("hd_lasso") >= 0.95


@pytest.mark.parametrize("T, p, null_zero_share", [(10, 600, 0.0), (50, 3000, 0.9)])
def test_scenario_c_is_feasible(T, p, null_zero_share):
    spec = ScenarioSpec("C", 50, T, p, estimators=("hd_lasso", "oracle_lasso"), runs=100)
    report = run_scenario(spec, threads=THREADS)
    for name in spec.estimator_names:
        assert all(outcome.error is None for _, outcome in report.outcomes(name))
    summary = summarize(report)
    assert abs(row(summary, "hd_lasso", 1)["median"] - row(summary, "oracle_lasso", 1)["median"]) <= 0.05
    assert row(summary, "hd_lasso", 4 + spec.d)["share_exact_zero"] >= null_zero_share


def test_error_shrinks_with_sample_size():
    medians = {}
    for n in (50, 100):
        spec = ScenarioSpec("custom", n, n, 15, estimators=("hd_lasso",), runs=200)
        medians[n] = row(summarize(run_scenario(spec, threads=THREADS)), "hd_lasso", L1_ROW)["median"]
    assert 0.3 <= medians[100] / medians[50] <= 0.85


def test_scenario_a_lasso_keeps_the_head():
    spec = ScenarioSpec("A", 50, 50, 15, estimators=("hd_lasso", "oracle_lasso"), runs=200)
    report = run_scenario(spec, threads=THREADS)
    assert report.head_selected_share("hd_lasso") >= 0.95
    assert row(summarize(report), "oracle_lasso", 1)["median"] < 0


def test_feasible_lasso_approaches_the_oracle():
    gaps = {}
    for n in (50, 100, 200):
        spec = ScenarioSpec("custom", n, n, 15, estimators=("hd_lasso", "oracle_lasso"), runs=100)
        summary = summarize(run_scenario(spec, threads=THREADS))
        gaps[n] = row(summary, "hd_lasso", L1_ROW)["median"] - row(summary, "oracle_lasso", L1_ROW)["median"]
    assert all(gap >= -0.02 for gap in gaps.values())
    assert abs(gaps[200]) <= abs(gaps[50])


@functools.lru_cache(maxsize=None)
def spectral_medians(n, runs=100):
    gap, head, ratio = [], [], []
    for r in range(runs):
        seed = streams.derive_seed(2, streams.RUNS, r)
        panel, truth = simulate_panel(SimulationConfig(n=n, T=n, d=4, seed=seed))
        xbar = cross_sectional_means(panel.X)
        spectral = spectral_summary(xbar)
        spike = eigen_spike_report(spectral, 3)
        gap.append(spike["gap_ratio"])
        head.append(spike["head_over_p"])
        k = khat_threshold(spectral.eigvals, default_tau(spectral.eigvals, 0.05))
        ratio.append(projection_quality(hd_projection(xbar, spectral, k), truth.F)["ratio"])
    return {"gap_ratio": np.median(gap), "head_over_p": np.median(head), "projection_ratio": np.median(ratio)}


def test_eigenvalue_gap_widens_with_n():
    small, large = spectral_medians(50), spectral_medians(100)
    assert small["gap_ratio"] >= 5
    assert large["gap_ratio"] > small["gap_ratio"]


def test_leading_eigenvalues_stay_proportional_to_p():
    small, large = spectral_medians(50), spectral_medians(100)
    assert small["head_over_p"] > 0
    assert large["head_over_p"] >= 0.7 * small["head_over_p"]


def test_factor_residual_shrinks_with_n():
    small, large = spectral_medians(50), spectral_medians(100)
    assert small["projection_ratio"] <= 0.15
    assert large["projection_ratio"] < small["projection_ratio"]


def test_penalty_on_pure_noise_stays_large():
    upper = 0
    for r in range(50):
        config = SimulationConfig(n=30, T=20, d=2, beta=(0.0,) * 9, seed=r)
        panel, truth = simulate_panel(config)
        result = cv_lambda(transform_panel(oracle_projection(truth.F), panel), folds=10, seed=r)
        upper += int(np.flatnonzero(result.lambda_grid == result.lambda_star)[0]) < len(result.lambda_grid) // 2
    assert upper / 50 >= 0.8


def test_reports_are_byte_identical_across_thread_counts(tmp_path):
    spec = ScenarioSpec("A", 50, 50, 15, estimators=("hd_lasso", "hd_ls", "cce"), runs=40)
    paths = []
    for threads in (1, max(THREADS, 2)):
        writer = ReportWriter(str(tmp_path / f"t{threads}"), threads=threads)
        report = run_scenario(spec, threads=threads)
        paths.append((writer.save_deviations_csv(report), writer.save_summary_csv(summarize(report))))
    for first, second in zip(*paths):
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()

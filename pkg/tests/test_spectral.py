import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from estimation.spectral import (
    cross_sectional_means,
    default_tau,
    khat_threshold,
    ktilde_ratio,
    scree_table,
    spectral_summary,
)
from panel_data.errors import ConfigError, DataError


def test_means_of_single_unit_are_the_unit(rng):
    X = rng.standard_normal((1, 5, 3))
    assert np.array_equal(cross_sectional_means(X), X[0])


def test_means_cancel_for_opposite_units():
    a = np.full((4, 2), 1.7)
    assert np.array_equal(cross_sectional_means(np.stack([a, -a])), np.zeros((4, 2)))


def test_means_match_loop(rng):
    X = rng.standard_normal((3, 2, 2))
    expected = np.zeros((2, 2))
    for t in range(2):
        for j in range(2):
            expected[t, j] = sum(X[i, t, j] for i in range(3)) / 3
    assert np.allclose(cross_sectional_means(X), expected, atol=1e-12)


def test_means_reject_wrong_rank():
    with pytest.raises(DataError):
        cross_sectional_means(np.zeros((3, 4)))


def test_identity_averages():
    spectral = spectral_summary(np.eye(2))
    assert np.allclose(spectral.sigma_hat, 0.5 * np.eye(2))
    assert np.allclose(spectral.eigvals, [0.5, 0.5])


def test_rank_one_averages():
    spectral = spectral_summary(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert np.allclose(spectral.sigma_hat, [[1.0, 0.0], [0.0, 0.0]])
    assert np.allclose(spectral.eigvals, [1.0, 0.0])
    assert np.allclose(spectral.eigvecs[:, 0], [1.0, 0.0])


def test_eigenvalues_match_characteristic_polynomial(rng):
    xbar = rng.standard_normal((6, 4))
    spectral = spectral_summary(xbar)
    roots = np.sort(np.roots(np.poly(xbar.T @ xbar / 6)).real)[::-1]
    assert np.allclose(spectral.eigvals, roots, atol=1e-8)


def test_summary_invariants(rng):
    xbar = rng.standard_normal((30, 8)) @ rng.standard_normal((8, 8))
    spectral = spectral_summary(xbar)
    vals, vecs = spectral.eigvals, spectral.eigvecs
    assert np.all(np.diff(vals) <= 0)
    assert np.all(vals >= 0)
    assert np.allclose(vecs.T @ vecs, np.eye(8), atol=1e-8)
    assert np.max(np.abs(spectral.reconstruct() - spectral.sigma_hat)) <= 1e-8 * vals[0]


def test_sign_convention(rng):
    spectral = spectral_summary(rng.standard_normal((12, 5)))
    for k in range(5):
        vec = spectral.eigvecs[:, k]
        assert vec[np.argmax(np.abs(vec))] > 0


def test_wide_averages_use_rank_bound(rng):
    T, p = 6, 20
    xbar = rng.standard_normal((T, p))
    spectral = spectral_summary(xbar)
    assert spectral.n_materialized == T
    assert np.array_equal(spectral.eigvals[T:], np.zeros(p - T))
    dense = np.sort(np.linalg.eigvalsh(xbar.T @ xbar / T))[::-1]
    assert np.allclose(spectral.eigvals[:T], dense[:T], atol=1e-8 * dense[0])
    assert np.max(np.abs(spectral.reconstruct() - spectral.sigma_hat)) <= 1e-8 * dense[0]


def test_non_finite_averages_are_rejected():
    xbar = np.ones((3, 2))
    xbar[1, 1] = np.inf
    with pytest.raises(DataError):
        spectral_summary(xbar)


def test_threshold_counts():
    eigvals = np.array([10, 8, 6, 0.1, 0.05])
    assert khat_threshold(eigvals, 0.5) == 3
    assert khat_threshold(eigvals, 11.0) == 0
    assert khat_threshold(eigvals, 6.0) == 3


def test_threshold_needs_positive_tau():
    with pytest.raises(ConfigError):
        khat_threshold(np.array([1.0]), 0.0)


@settings(max_examples=50, deadline=None)
@given(
    eigvals=st.lists(st.floats(0, 1e3), min_size=1, max_size=20),
    taus=st.tuples(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3)),
)
def test_threshold_is_nonincreasing_in_tau(eigvals, taus):
    eigvals = np.sort(eigvals)[::-1]
    low, high = sorted(taus)
    assert khat_threshold(eigvals, low) >= khat_threshold(eigvals, high)


def test_default_tau():
    assert default_tau(np.array([10.0, 1.0]), 0.05) == pytest.approx(0.5)
    assert default_tau(np.array([200.0, 3.0]), 0.01) == pytest.approx(2.0)
    eigvals = np.array([4.0, 4.0, 1.0])
    assert khat_threshold(eigvals, default_tau(eigvals, 1.0)) == 2


def test_default_tau_rejects_zero_spectrum():
    with pytest.raises(DataError):
        default_tau(np.zeros(3), 0.05)


def test_variance_share_rule():
    assert ktilde_ratio(np.array([97.0, 2.0, 1.0]), 0.05) == 1
    assert ktilde_ratio(np.array([50.0, 45.0, 5.0]), 0.05) == 2
    assert ktilde_ratio(np.ones(7), 0.05) == int(np.ceil(0.95 * 7))


@settings(max_examples=50, deadline=None)
@given(
    eigvals=st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=20),
    alphas=st.tuples(st.floats(0.001, 0.999), st.floats(0.001, 0.999)),
)
def test_variance_share_rule_grows_as_alpha_shrinks(eigvals, alphas):
    eigvals = np.sort(eigvals)[::-1]
    small, large = sorted(alphas)
    assert ktilde_ratio(eigvals, small) >= ktilde_ratio(eigvals, large)


def test_variance_share_rule_rejects_zero_spectrum():
    with pytest.raises(DataError):
        ktilde_ratio(np.zeros(2), 0.05)


def test_scree_table(rng):
    table = scree_table(spectral_summary(rng.standard_normal((10, 4))))
    assert list(table.columns) == ["k", "eigval", "share", "cumshare"]
    assert list(table["k"]) == [1, 2, 3, 4]
    assert table["cumshare"].iloc[-1] == pytest.approx(1.0)


def test_factor_spikes_on_simulated_panel(scenario_a_panel):
    panel, _ = scenario_a_panel
    spectral = spectral_summary(cross_sectional_means(panel.X))
    assert spectral.eigvals[2] / spectral.eigvals[3] >= 5
    assert khat_threshold(spectral.eigvals, default_tau(spectral.eigvals, 0.05)) == 3

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg

from panel_data.errors import ConfigError, DataError


logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-10
SHARE_SLACK = 1e-12


@dataclass(frozen=True)
class SpectralSummary:
    sigma_hat: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def p(self):
        return self.sigma_hat.shape[0]

    @property
    def n_materialized(self):
        return self.eigvecs.shape[1]

    def reconstruct(self):
        m = self.n_materialized
        return (self.eigvecs * self.eigvals[:m]) @ self.eigvecs.T


def cross_sectional_means(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise DataError(f"expected an n x T x p regressor array, got shape {X.shape}")
    if X.shape[0] < 1:
        raise DataError("need at least one unit to average over")
    return X.mean(axis=0)


def _fix_signs(vecs):
    # Largest-magnitude entry positive; argmax picks the lowest index on ties.
    if vecs.size == 0:
        return vecs
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def spectral_summary(xbar):
    xbar = np.asarray(xbar, dtype=float)
    if xbar.ndim != 2 or min(xbar.shape) < 1:
        raise DataError(f"expected a nonempty T x p matrix of averages, got shape {xbar.shape}")
    if not np.all(np.isfinite(xbar)):
        raise DataError("cross-sectional averages contain non-finite entries")

    T, p = xbar.shape
    sigma_hat = xbar.T @ xbar / T
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)

    if p > T:
        # Rank is at most T: only the min(p, T) leading pairs exist numerically.
        _, s, vt = linalg.svd(xbar, full_matrices=False)
        eigvals = np.zeros(p)
        eigvals[:len(s)] = s ** 2 / T
        eigvecs = vt.T
    else:
        vals, vecs = linalg.eigh(sigma_hat)
        eigvals = vals[::-1].copy()
        eigvecs = vecs[:, ::-1]

    top = max(eigvals[0], 0.0)
    floor = -CLAMP_TOL * top
    if np.any(eigvals < floor):
        warnings.warn(
            f"moment matrix has eigenvalue {eigvals.min():.3e} below the clamping floor {floor:.3e}",
            RuntimeWarning,
        )
    eigvals = np.maximum(eigvals, 0.0)

    return SpectralSummary(sigma_hat, eigvals, _fix_signs(np.ascontiguousarray(eigvecs)))


def khat_threshold(eigvals, tau):
    if not tau > 0:
        raise ConfigError(f"threshold tau must be positive, got {tau}")
    return int(np.count_nonzero(np.asarray(eigvals) >= tau))


def default_tau(eigvals, alpha):
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    top = float(np.max(eigvals)) if len(eigvals) else 0.0
    if top <= 0:
        raise DataError("all-zero spectrum: no threshold can be formed")
    return alpha * top


def ktilde_ratio(eigvals, alpha):
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    eigvals = np.asarray(eigvals, dtype=float)
    total = eigvals.sum()
    if total <= 0:
        raise DataError("all-zero spectrum: variance shares are undefined")
    shares = np.cumsum(eigvals) / total
    return int(np.argmax(shares >= 1.0 - alpha - SHARE_SLACK)) + 1


def scree_table(spectral):
    eigvals = spectral.eigvals
    total = eigvals.sum()
    share = eigvals / total if total > 0 else np.zeros_like(eigvals)
    return pd.DataFrame({
        "k": np.arange(1, len(eigvals) + 1),
        "eigval": eigvals,
        "share": share,
        "cumshare": np.cumsum(share),
    })

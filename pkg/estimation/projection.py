import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from panel_data.dataset import TransformedPanel
from panel_data.errors import ConfigError, DataError


logger = logging.getLogger(__name__)

RANK_TOL = 1e-10

HD_CCE = "hd_cce"
ORACLE = "oracle"
CLASSICAL_CCE = "classical_cce"
IDENTITY = "identity"


@dataclass(frozen=True)
class ProjectionMatrix:
    """Symmetric idempotent T x T matrix annihilating the span of ``basis``."""

    mat: np.ndarray
    kind: str
    basis: np.ndarray
    rank_removed: int
    k: int = field(default=None)
    identity_fallback: bool = False

    @property
    def T(self):
        return self.mat.shape[0]

    @property
    def is_null(self):
        return self.rank_removed >= self.T

    def label(self):
        if self.kind == HD_CCE:
            return f"{HD_CCE}(K={self.k})"
        if self.kind == ORACLE:
            return f"{ORACLE}(K={self.k})"
        return self.kind


def _orthonormal_range(basis):
    T = basis.shape[0]
    if basis.size == 0:
        return np.zeros((T, 0))
    u, s, _ = linalg.svd(basis, full_matrices=False)
    if s[0] == 0:
        return np.zeros((T, 0))
    # Same cut as eigenvalues of B'B below RANK_TOL * largest.
    keep = s ** 2 > RANK_TOL * s[0] ** 2
    return u[:, keep]


def _annihilator(basis, kind, k=None):
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2:
        raise DataError(f"projection basis must be a T x m matrix, got shape {basis.shape}")
    q = _orthonormal_range(basis)
    mat = np.eye(basis.shape[0]) - q @ q.T
    mat = 0.5 * (mat + mat.T)
    return ProjectionMatrix(mat, kind, basis, int(q.shape[1]), k)


def identity_projection(T):
    return ProjectionMatrix(np.eye(T), IDENTITY, np.zeros((T, 0)), 0, 0)


def hd_projection(xbar, spectral, k_hat, raw_columns=None):
    xbar = np.asarray(xbar, dtype=float)
    if raw_columns is not None:
        xbar = xbar[:, list(raw_columns)]
    T, p = xbar.shape
    if spectral.p != p:
        raise DataError(f"spectral summary is for p={spectral.p} columns but averages have {p}")
    if k_hat < 0 or k_hat > min(p, T):
        raise ConfigError(f"k_hat must lie in [0, min(p, T)] = [0, {min(p, T)}], got {k_hat}")

    if k_hat == 0:
        warnings.warn("no factors detected; projecting away nothing", RuntimeWarning)
        logger.warning("K_hat = 0, using the identity projection")
        return ProjectionMatrix(np.eye(T), HD_CCE, np.zeros((T, 0)), 0, 0, identity_fallback=True)

    w_hat = xbar @ spectral.eigvecs[:, :k_hat]
    return _annihilator(w_hat, HD_CCE, k=int(k_hat))


def oracle_projection(F):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1:
        raise DataError(f"factor matrix must be T x K with T >= 1, got shape {F.shape}")
    return _annihilator(F, ORACLE, k=F.shape[1])


def classical_cce_projection(xbar):
    return _annihilator(xbar, CLASSICAL_CCE)


def transform_panel(proj, panel):
    if proj.T != panel.T:
        raise DataError(f"projection is {proj.T} x {proj.T} but the panel has T={panel.T}")
    n, T, p = panel.X.shape
    y_hat = (panel.Y @ proj.mat).reshape(n * T)
    x_hat = np.matmul(proj.mat, panel.X).reshape(n * T, p)
    return TransformedPanel(y_hat, x_hat, n, T)

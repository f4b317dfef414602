from dataclasses import dataclass

import numpy as np

from panel_data.errors import DataError


def _first_bad_cell(arr):
    idx = np.argwhere(~np.isfinite(arr))[0]
    return tuple(int(i) + 1 for i in idx)


@dataclass(frozen=True)
class PanelDataset:
    """Responses Y (n x T) and regressors X (n x T x p)."""

    Y: np.ndarray
    X: np.ndarray

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def T(self):
        return self.X.shape[1]

    @property
    def p(self):
        return self.X.shape[2]

    def validate(self):
        if self.X.ndim != 3:
            raise DataError(f"X must be n x T x p, got shape {self.X.shape}")
        if self.Y.shape != self.X.shape[:2]:
            raise DataError(f"Y shape {self.Y.shape} does not match X shape {self.X.shape}")
        if not np.all(np.isfinite(self.Y)):
            unit, time = _first_bad_cell(self.Y)
            raise DataError(f"non-finite response at (unit={unit}, time={time})")
        if not np.all(np.isfinite(self.X)):
            unit, time, j = _first_bad_cell(self.X)
            raise DataError(f"non-finite regressor at (unit={unit}, time={time}, j={j})")
        return self


@dataclass(frozen=True)
class FactorStructure:
    """Latent simulation truth behind a PanelDataset."""

    F: np.ndarray
    gamma: np.ndarray
    Gamma: np.ndarray
    Z: np.ndarray
    eps: np.ndarray

    @property
    def K(self):
        return self.F.shape[1]

    def common_component(self):
        return self.gamma @ self.F.T


@dataclass(frozen=True)
class TransformedPanel:
    """Projected panel stacked unit-major: rows i*T .. i*T + T - 1 belong to unit i."""

    y_hat: np.ndarray
    x_hat: np.ndarray
    n: int
    T: int

    @property
    def p(self):
        return self.x_hat.shape[1]

    @property
    def n_obs(self):
        return self.n * self.T

    def unit_rows(self, units):
        units = np.asarray(units, dtype=np.int64)
        return (units[:, None] * self.T + np.arange(self.T)[None, :]).ravel()

    def subset(self, units):
        rows = self.unit_rows(units)
        return TransformedPanel(self.y_hat[rows], self.x_hat[rows], len(units), self.T)

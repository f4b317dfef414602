import logging
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import linalg

from panel_data import rng as streams
from panel_data.errors import ConfigError, DataError, NumericError


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10000
PINV_RTOL = 1e-10
GRID_POINTS = 50
GRID_RATIO = 1e-3


@dataclass
class LassoFit:
    beta_hat: np.ndarray
    lam: float
    objective: float
    active_set: np.ndarray
    iterations: int
    converged: bool
    zero_columns: tuple = ()
    rank_deficient: bool = False
    history: np.ndarray = field(default=None, repr=False)


@dataclass
class CvResult:
    lambda_grid: np.ndarray
    cv_errors: np.ndarray
    lambda_star: float
    fold_assignment: np.ndarray
    fold_errors: np.ndarray = field(default=None, repr=False)
    n_unconverged: int = 0


@nb.njit(cache=True, nogil=True)
def _kkt_kernel(x, resid, beta, lam):
    n_obs, p = x.shape
    worst = 0.0
    for j in range(p):
        dot = 0.0
        for i in range(n_obs):
            dot += x[i, j] * resid[i]
        grad = -2.0 * dot / n_obs
        if beta[j] == 0.0:
            gap = abs(grad) - lam
        elif beta[j] > 0.0:
            gap = abs(grad + lam)
        else:
            gap = abs(grad - lam)
        if gap > worst:
            worst = gap
    return worst


@nb.njit(cache=True, nogil=True)
def _cd_kernel(x, y, beta, col_sq, lam, tol, kkt_tol, max_iter, history):
    n_obs, p = x.shape
    half_pen = 0.5 * n_obs * lam
    resid = y.copy()
    active = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        if beta[j] != 0.0:
            active[j] = True
            for i in range(n_obs):
                resid[i] -= x[i, j] * beta[j]

    full_sweep = True
    converged = False
    sweeps = 0
    while sweeps < max_iter:
        max_change = 0.0
        for j in range(p):
            if not full_sweep and not active[j]:
                continue
            old = beta[j]
            if col_sq[j] == 0.0:
                # Column carries no data: the penalty alone decides.
                if lam > 0.0 and old != 0.0:
                    beta[j] = 0.0
                    if abs(old) > max_change:
                        max_change = abs(old)
                continue

            rho = col_sq[j] * old
            for i in range(n_obs):
                rho += x[i, j] * resid[i]
            if rho > half_pen:
                new = (rho - half_pen) / col_sq[j]
            elif rho < -half_pen:
                new = (rho + half_pen) / col_sq[j]
            else:
                new = 0.0

            diff = new - old
            if diff != 0.0:
                for i in range(n_obs):
                    resid[i] -= x[i, j] * diff
                beta[j] = new
                if abs(diff) > max_change:
                    max_change = abs(diff)
            if full_sweep:
                active[j] = new != 0.0

        rss = 0.0
        for i in range(n_obs):
            rss += resid[i] * resid[i]
        l1 = 0.0
        bmax = 0.0
        for j in range(p):
            a = abs(beta[j])
            l1 += a
            if a > bmax:
                bmax = a
        history[sweeps] = rss / n_obs + lam * l1
        sweeps += 1

        if max_change <= tol * max(1.0, bmax):
            if full_sweep:
                if _kkt_kernel(x, resid, beta, lam) <= kkt_tol:
                    converged = True
                    break
            else:
                full_sweep = True
        elif full_sweep:
            full_sweep = False
    return sweeps, converged


def _design(panel):
    x = np.asfortranarray(panel.x_hat, dtype=np.float64)
    y = np.ascontiguousarray(panel.y_hat, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DataError(f"design {x.shape} and response {y.shape} do not line up")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("transformed panel contains non-finite values")
    return x, y


def _objective(x, y, beta, lam):
    resid = y - x @ beta
    return float(resid @ resid / len(y) + lam * np.abs(beta).sum())


def _lasso_arrays(x, y, col_sq, lam, tol, max_iter, warm_start):
    p = x.shape[1]
    if warm_start is None:
        beta = np.zeros(p)
    else:
        beta = np.array(warm_start, dtype=np.float64)
        if beta.shape != (p,):
            raise ConfigError(f"warm start has shape {beta.shape}, expected ({p},)")
    history = np.empty(max(int(max_iter), 1))
    sweeps, converged = _cd_kernel(x, y, beta, col_sq, float(lam), float(tol), float(tol),
                                   int(max_iter), history)
    zero_columns = tuple(int(j) for j in np.flatnonzero(col_sq == 0.0))
    if zero_columns and lam == 0.0:
        logger.debug("zero-variance columns %s left at their starting values", zero_columns)
    objective = float(history[sweeps - 1]) if sweeps else _objective(x, y, beta, lam)
    return LassoFit(
        beta_hat=beta,
        lam=float(lam),
        objective=objective,
        active_set=np.flatnonzero(beta),
        iterations=int(sweeps),
        converged=bool(converged),
        zero_columns=zero_columns,
        history=history[:sweeps].copy(),
    )


# (nT)^-1 ||y_hat - x_hat b||^2 + lam ||b||_1, columns not standardized
def lasso(panel, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, warm_start=None):
    if not lam >= 0:
        raise ConfigError(f"penalty must be nonnegative, got {lam}")
    x, y = _design(panel)
    fit = _lasso_arrays(x, y, (x ** 2).sum(axis=0), lam, tol, max_iter, warm_start)
    if not fit.converged:
        logger.warning("lasso did not converge at lambda=%.6g after %d sweeps", lam, fit.iterations)
    return fit


def lasso_path(panel, grid, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    x, y = _design(panel)
    col_sq = (x ** 2).sum(axis=0)
    fits = []
    beta = None
    for lam in grid:
        fit = _lasso_arrays(x, y, col_sq, lam, tol, max_iter, beta)
        beta = fit.beta_hat
        fits.append(fit)
    return fits


def least_squares(panel):
    x, y = _design(panel)
    n_obs, p = x.shape
    if p > n_obs:
        warnings.warn(f"least squares with p={p} > nT={n_obs}; returning the minimum-norm solution",
                      RuntimeWarning)
    gram = x.T @ x
    gram = 0.5 * (gram + gram.T)
    if not np.any(gram):
        beta, rank = np.zeros(p), 0
    else:
        try:
            inv, rank = linalg.pinvh(gram, rtol=PINV_RTOL, return_rank=True)
        except linalg.LinAlgError as exc:
            raise NumericError(f"normal equations could not be solved: {exc}") from exc
        beta = inv @ (x.T @ y)
    rank_deficient = rank < p
    if rank_deficient:
        warnings.warn(f"design has rank {rank} < p={p}", RuntimeWarning)
    return LassoFit(
        beta_hat=beta,
        lam=0.0,
        objective=_objective(x, y, beta, 0.0),
        active_set=np.flatnonzero(beta),
        iterations=0,
        converged=True,
        rank_deficient=bool(rank_deficient),
    )


def lambda_max(panel):
    x, y = _design(panel)
    return float(2.0 * np.max(np.abs(x.T @ y)) / len(y)) if x.shape[1] else 0.0


def lambda_grid(lam_max, num=GRID_POINTS, ratio=GRID_RATIO):
    if not lam_max > 0:
        raise DataError("response is orthogonal to every column; no penalty grid exists")
    return np.geomspace(lam_max, ratio * lam_max, num)


def kkt_violation(panel, beta, lam):
    x, y = panel.x_hat, panel.y_hat
    beta = np.asarray(beta, dtype=float)
    grad = 2.0 * x.T @ (x @ beta - y) / len(y)
    gap = np.where(beta == 0.0,
                   np.maximum(np.abs(grad) - lam, 0.0),
                   np.abs(grad + lam * np.sign(beta)))
    return float(gap.max()) if gap.size else 0.0


def cv_lambda(panel, folds=10, grid=None, seed=0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    if folds < 2:
        raise ConfigError(f"need at least 2 folds, got {folds}")
    if panel.n < folds:
        raise ConfigError(f"fewer units ({panel.n}) than folds ({folds})")
    if grid is None:
        grid = lambda_grid(lambda_max(panel))
    else:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) > 0):
            raise ConfigError("penalty grid must be a nonempty descending sequence of positives")

    order = streams.stream(seed, streams.FOLDS).permutation(panel.n)
    assignment = np.empty(panel.n, dtype=np.int64)
    assignment[order] = np.arange(panel.n) % folds

    fold_errors = np.zeros((folds, len(grid)))
    unconverged = 0
    for fold in range(folds):
        held = np.flatnonzero(assignment == fold)
        train = panel.subset(np.flatnonzero(assignment != fold))
        test = panel.subset(held)
        for l, fit in enumerate(lasso_path(train, grid, tol, max_iter)):
            resid = test.y_hat - test.x_hat @ fit.beta_hat
            fold_errors[fold, l] = resid @ resid / test.n_obs
            unconverged += not fit.converged

    if unconverged:
        logger.warning("%d of %d cross-validation fits did not converge", unconverged, folds * len(grid))
    cv_errors = fold_errors.mean(axis=0)
    best = int(np.argmin(cv_errors))
    return CvResult(grid, cv_errors, float(grid[best]), assignment, fold_errors, unconverged)


def effective_noise_lambda(panel, q=0.95, nsim=1000, noise_sd=1.0, seed=0, chunk=250):
    if not 0 < q < 1:
        raise ConfigError(f"quantile level must lie in (0, 1), got {q}")
    if nsim < 1 or noise_sd <= 0:
        raise ConfigError("nsim must be positive and noise_sd must be positive")
    if nsim < 100:
        warnings.warn(f"effective-noise quantile from only {nsim} draws", RuntimeWarning)

    x, _ = _design(panel)
    n_obs = x.shape[0]
    gen = streams.stream(seed, streams.EFFECTIVE_NOISE)
    draws = np.empty(nsim)
    for start in range(0, nsim, chunk):
        m = min(chunk, nsim - start)
        eps = gen.normal(0.0, noise_sd, size=(n_obs, m))
        draws[start:start + m] = 4.0 * np.abs(x.T @ eps).max(axis=0) / n_obs
    return float(np.quantile(draws, q, method="linear"))


def theoretical_lambda(n, T, p, h_n=1.0, regime="large_T", theta=8.0):
    """Reference penalty rate, for scaling checks only (h_n has no data-driven value)."""
    if regime == "large_T":
        return h_n * np.log(n * p * T) / min(n, np.sqrt(n * T))
    if regime == "small_T":
        return h_n * (n ** 2 * p) ** (1.0 / theta) * np.sqrt(np.log(p) / n)
    raise ConfigError(f"unknown regime {regime!r}; use 'large_T' or 'small_T'")

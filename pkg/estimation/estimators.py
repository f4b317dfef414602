import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from estimation.diagnostics import projection_quality
from estimation.projection import (
    classical_cce_projection,
    hd_projection,
    oracle_projection,
    transform_panel,
)
from estimation.solvers import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    cv_lambda,
    effective_noise_lambda,
    lasso,
    least_squares,
)
from estimation.spectral import (
    cross_sectional_means,
    default_tau,
    khat_threshold,
    ktilde_ratio,
    spectral_summary,
)
from panel_data.errors import ConfigError


logger = logging.getLogger(__name__)

LASSO = "lasso"
LEAST_SQUARES = "ls"
METHODS = (LASSO, LEAST_SQUARES)

FIXED = "fixed"
CV = "cv"
EFFECTIVE_NOISE = "effective_noise"

EIGVAL_HEAD = 10


@dataclass(frozen=True)
class LambdaRule:
    kind: str = CV
    value: float = None
    folds: int = 10
    q: float = 0.95
    nsim: int = 1000
    noise_sd: float = 1.0

    @classmethod
    def fixed(cls, value):
        return cls(kind=FIXED, value=float(value))

    @classmethod
    def cv(cls, folds=10):
        return cls(kind=CV, folds=int(folds))

    @classmethod
    def effective_noise(cls, q=0.95, nsim=1000, noise_sd=1.0):
        return cls(kind=EFFECTIVE_NOISE, q=float(q), nsim=int(nsim), noise_sd=float(noise_sd))

    def validate(self):
        if self.kind == FIXED:
            if self.value is None or not self.value >= 0:
                raise ConfigError(f"fixed penalty must be a nonnegative number, got {self.value}")
        elif self.kind == CV:
            if self.folds < 2:
                raise ConfigError(f"cross-validation needs at least 2 folds, got {self.folds}")
        elif self.kind == EFFECTIVE_NOISE:
            if not 0 < self.q < 1:
                raise ConfigError(f"effective-noise quantile must lie in (0, 1), got {self.q}")
            if not self.noise_sd > 0:
                raise ConfigError(f"effective-noise scale must be positive, got {self.noise_sd}")
        else:
            raise ConfigError(f"unknown penalty rule {self.kind!r}")
        return self


@dataclass(frozen=True)
class EstimatorOptions:
    method: str = LASSO
    alpha_tau: float = 0.05
    k_override: int = None
    raw_columns: tuple = None
    lambda_rule: LambdaRule = field(default_factory=LambdaRule)
    seed: int = 0
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def validate(self, p=None):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 < self.alpha_tau < 1:
            raise ConfigError(f"alpha_tau must lie in (0, 1), got {self.alpha_tau}")
        if self.k_override is not None and self.k_override < 0:
            raise ConfigError(f"k_override must be nonnegative, got {self.k_override}")
        if self.raw_columns is not None:
            if len(self.raw_columns) == 0:
                raise ConfigError("raw_columns is empty")
            if p is not None and not all(0 <= j < p for j in self.raw_columns):
                raise ConfigError(f"raw_columns {list(self.raw_columns)} out of range for p={p}")
        if self.method == LASSO:
            self.lambda_rule.validate()
        return self

    def to_dict(self):
        out = asdict(self)
        if self.raw_columns is not None:
            out["raw_columns"] = [int(j) for j in self.raw_columns]
        return out


@dataclass
class FitReport:
    beta_hat: np.ndarray
    method: str
    k_used: int
    lambda_used: float
    projection_kind: str
    converged: bool = True
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "method": self.method,
            "beta_hat": [float(b) for b in self.beta_hat],
            "k_used": int(self.k_used),
            "lambda_used": float(self.lambda_used),
            "projection_kind": self.projection_kind,
            "converged": bool(self.converged),
            "degenerate": bool(self.degenerate),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def beta_frame(self):
        return pd.DataFrame({"j": np.arange(1, len(self.beta_hat) + 1), "beta_hat": self.beta_hat})


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


def _method_tag(prefix, opts):
    return f"{prefix}_{opts.method}"


def _fit_transformed(transformed, opts):
    info = {}
    if opts.method == LEAST_SQUARES:
        fit = least_squares(transformed)
        info["rank_deficient"] = fit.rank_deficient
        return fit, 0.0, info

    rule = opts.lambda_rule
    if rule.kind == FIXED:
        lam = rule.value
    elif rule.kind == CV:
        cv = cv_lambda(transformed, folds=rule.folds, seed=opts.seed, tol=opts.tol, max_iter=opts.max_iter)
        lam = cv.lambda_star
        info["cv_folds"] = rule.folds
        info["cv_grid_position"] = int(np.flatnonzero(cv.lambda_grid == lam)[0])
        info["cv_unconverged"] = cv.n_unconverged
    else:
        lam = effective_noise_lambda(transformed, q=rule.q, nsim=rule.nsim, noise_sd=rule.noise_sd,
                                     seed=opts.seed)
        info["effective_noise_q"] = rule.q

    fit = lasso(transformed, lam, tol=opts.tol, max_iter=opts.max_iter)
    info["iterations"] = fit.iterations
    info["active_set"] = [int(j) + 1 for j in fit.active_set]
    if fit.zero_columns:
        info["zero_columns"] = [int(j) + 1 for j in fit.zero_columns]
    return fit, lam, info


def estimate_hdcce(panel, opts=None, F=None):
    opts = (opts or EstimatorOptions()).validate(panel.p)
    panel.validate()

    xbar = cross_sectional_means(panel.X)
    if opts.raw_columns is not None:
        xbar = xbar[:, list(opts.raw_columns)]
    spectral = spectral_summary(xbar)
    tau = default_tau(spectral.eigvals, opts.alpha_tau)
    k_hat = khat_threshold(spectral.eigvals, tau)
    k_used = k_hat if opts.k_override is None else int(opts.k_override)

    proj = hd_projection(xbar, spectral, k_used)
    transformed = transform_panel(proj, panel)
    fit, lam, info = _fit_transformed(transformed, opts)

    diagnostics = {
        "tau": tau,
        "k_hat": k_hat,
        "k_tilde": ktilde_ratio(spectral.eigvals, opts.alpha_tau),
        "eigval_head": spectral.eigvals[:EIGVAL_HEAD],
        "rank_removed": proj.rank_removed,
        "identity_fallback": proj.identity_fallback,
        **info,
    }
    if F is not None:
        diagnostics["projection_ratio"] = projection_quality(proj, F)["ratio"]
    logger.debug("hd-cce fit: k_hat=%d tau=%.4g lambda=%.4g", k_hat, tau, lam)
    return FitReport(fit.beta_hat, _method_tag("hd", opts), k_used, lam, proj.label(),
                     converged=fit.converged, diagnostics=diagnostics)


def estimate_oracle(panel, F, opts=None):
    opts = (opts or EstimatorOptions()).validate(panel.p)
    panel.validate()
    proj = oracle_projection(F)
    fit, lam, info = _fit_transformed(transform_panel(proj, panel), opts)
    diagnostics = {"rank_removed": proj.rank_removed, **info}
    return FitReport(fit.beta_hat, _method_tag("oracle", opts), int(np.shape(F)[1]), lam, proj.label(),
                     converged=fit.converged, diagnostics=diagnostics)


def estimate_cce_pooled(panel, augment_with_response=False):
    panel.validate()
    basis = cross_sectional_means(panel.X)
    if augment_with_response:
        basis = np.column_stack([panel.Y.mean(axis=0), basis])
    proj = classical_cce_projection(basis)
    diagnostics = {"rank_removed": proj.rank_removed, "augment_with_response": augment_with_response}

    if proj.is_null:
        warnings.warn("averages span the whole time dimension; the CCE projection is the null matrix",
                      RuntimeWarning)
        return FitReport(np.zeros(panel.p), "cce", proj.rank_removed, 0.0, proj.label(),
                         degenerate=True, diagnostics=diagnostics)

    fit = least_squares(transform_panel(proj, panel))
    diagnostics["rank_deficient"] = fit.rank_deficient
    return FitReport(fit.beta_hat, "cce", proj.rank_removed, 0.0, proj.label(), diagnostics=diagnostics)

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from panel_data import rng as streams
from panel_data.dataset import FactorStructure, PanelDataset
from panel_data.errors import ConfigError


logger = logging.getLogger(__name__)

HEAD_REGRESSORS = 3
LOADING_HEAD = 12


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    T: int
    d: int
    rho: float = 0.25
    K: int = 3
    ar_coef: float = 0.5
    innov_var: float = 0.75
    z_var_head: float = 1.0
    z_var_tail: float = 1.5
    beta: tuple = field(default=None)
    seed: int = 0

    @property
    def p(self):
        return HEAD_REGRESSORS + 3 * self.d

    @property
    def loading_dim(self):
        return LOADING_HEAD + 3 * self.d

    @property
    def beta_vector(self):
        if self.beta is None:
            beta = np.zeros(self.p)
            beta[:HEAD_REGRESSORS] = 1.0
            return beta
        return np.asarray(self.beta, dtype=float)

    @property
    def stationary_var(self):
        return self.innov_var / (1.0 - self.ar_coef ** 2)

    def validate(self):
        for name in ("n", "T"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.d < 0:
            raise ConfigError(f"d must be nonnegative, got {self.d}")
        if self.K != 3:
            raise ConfigError(f"the loading design is fixed to K=3 factors, got K={self.K}")
        if not abs(self.ar_coef) < 1.0:
            raise ConfigError(f"ar_coef must lie in (-1, 1) for a stationary factor, got {self.ar_coef}")
        if self.innov_var <= 0 or self.z_var_head <= 0 or self.z_var_tail <= 0:
            raise ConfigError("variances must be positive")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if len(self.beta_vector) != self.p:
            raise ConfigError(f"beta has length {len(self.beta_vector)}, expected p={self.p}")
        lower = -1.0 / (self.loading_dim - 1)
        if not lower < self.rho < 1.0:
            raise ConfigError(
                f"rho={self.rho} makes the loading covariance singular or indefinite; "
                f"need {lower:.6g} < rho < 1"
            )
        return self

    def to_dict(self):
        out = asdict(self)
        out["beta"] = [float(b) for b in self.beta_vector]
        out["p"] = self.p
        return out

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        values.pop("p", None)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown simulation options: {', '.join(unknown)}")
        if values.get("beta") is not None:
            values["beta"] = tuple(float(b) for b in values["beta"])
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def mean_loading_matrix(d):
    if d < 0:
        raise ConfigError(f"d must be nonnegative, got {d}")
    gamma_bar = np.zeros((HEAD_REGRESSORS + 3 * d, 3))
    gamma_bar[:3, :3] = 0.5 * np.eye(3)
    for k in range(3):
        gamma_bar[3 + k * d:3 + (k + 1) * d, k] = 1.0
    return gamma_bar


def loading_mean_vector(d):
    return np.concatenate([np.ones(3), (0.5 * np.eye(3)).ravel(), np.ones(3 * d)])


def loading_covariance(dim, rho):
    return (1.0 - rho) * np.eye(dim) + rho * np.ones((dim, dim))


def _draw_loadings(config, gen):
    mu = loading_mean_vector(config.d)
    dim = config.loading_dim
    if config.rho >= 0:
        common = gen.standard_normal((config.n, 1))
        own = gen.standard_normal((config.n, dim))
        return mu + np.sqrt(config.rho) * common + np.sqrt(1.0 - config.rho) * own
    try:
        chol = linalg.cholesky(loading_covariance(dim, config.rho), lower=True)
    except linalg.LinAlgError as exc:
        raise ConfigError(f"loading covariance is not positive definite for rho={config.rho}") from exc
    return mu + gen.standard_normal((config.n, dim)) @ chol.T


def _unpack_loadings(G, d):
    n = G.shape[0]
    gamma = G[:, :3]
    Gamma = np.zeros((n, HEAD_REGRESSORS + 3 * d, 3))
    Gamma[:, :3, :] = G[:, 3:LOADING_HEAD].reshape(n, 3, 3)
    for k in range(3):
        block = G[:, LOADING_HEAD + k * d:LOADING_HEAD + (k + 1) * d]
        Gamma[:, 3 + k * d:3 + (k + 1) * d, k] = block
    return gamma, Gamma


def simulate_factors(config):
    gen = streams.stream(config.seed, streams.FACTORS)
    shocks = gen.standard_normal((config.T, config.K))
    F = np.empty_like(shocks)
    # Start from the stationary law so no burn-in is needed.
    F[0] = np.sqrt(config.stationary_var) * shocks[0]
    innov_sd = np.sqrt(config.innov_var)
    for t in range(1, config.T):
        F[t] = config.ar_coef * F[t - 1] + innov_sd * shocks[t]
    return F


def simulate_panel(config, z_scale=1.0):
    config.validate()
    F = simulate_factors(config)

    G = _draw_loadings(config, streams.stream(config.seed, streams.LOADINGS))
    gamma, Gamma = _unpack_loadings(G, config.d)

    z_sd = np.full(config.p, np.sqrt(config.z_var_tail))
    z_sd[:HEAD_REGRESSORS] = np.sqrt(config.z_var_head)
    Z = streams.stream(config.seed, streams.IDIOSYNCRATIC).standard_normal((config.n, config.T, config.p))
    Z = z_scale * Z * z_sd
    eps = streams.stream(config.seed, streams.ERRORS).standard_normal((config.n, config.T))

    X = np.einsum("tk,ijk->itj", F, Gamma) + Z
    Y = X @ config.beta_vector + gamma @ F.T + eps

    logger.debug("simulated panel n=%d T=%d p=%d seed=%d", config.n, config.T, config.p, config.seed)
    return PanelDataset(Y, X), FactorStructure(F, gamma, Gamma, Z, eps)

import logging
from dataclasses import asdict, dataclass, field

from panel_data.errors import ConfigError
from panel_data.simulate import HEAD_REGRESSORS, SimulationConfig


logger = logging.getLogger(__name__)

HD_LASSO = "hd_lasso"
HD_LS = "hd_ls"
ORACLE_LASSO = "oracle_lasso"
ORACLE_LS = "oracle_ls"
CCE = "cce"
ESTIMATORS = (HD_LASSO, HD_LS, ORACLE_LASSO, ORACLE_LS, CCE)

CUSTOM = "custom"
LABELS = ("A", "B", "C", CUSTOM)

DEFAULT_RUNS = 200
FULL_RUNS = 1000
DEFAULT_MASTER_SEED = 1

# p values per (scenario, n, T)
PRESET_SETTINGS = {
    ("A", 50, 10): (3, 6, 9),
    ("B", 50, 10): (30, 150, 300),
    ("C", 50, 10): (600,),
    ("A", 50, 50): (15, 30, 45),
    ("B", 50, 50): (150, 300, 900),
    ("C", 50, 50): (3000,),
}

DEFAULT_ESTIMATORS = {
    "A": (HD_LS, ORACLE_LS, CCE),
    "B": (HD_LASSO, ORACLE_LASSO, HD_LS, ORACLE_LS),
    "C": (HD_LASSO, ORACLE_LASSO),
    CUSTOM: (HD_LASSO, ORACLE_LASSO),
}


def regime_of(n, T, p):
    if p < T:
        return "A"
    if p < n * T:
        return "B"
    return "C"


def representative_coordinates(d):
    """1-based coordinates reported per estimator: one per regressor group."""
    if d == 0:
        return (1,)
    return (1, 4, 4 + d, 4 + 2 * d)


@dataclass(frozen=True)
class ScenarioSpec:
    label: str
    n: int
    T: int
    p: int
    estimators: tuple = None
    runs: int = DEFAULT_RUNS
    master_seed: int = DEFAULT_MASTER_SEED
    rho: float = 0.25
    alpha_tau: float = 0.05
    cv_folds: int = 10
    diagnostics: bool = False
    beta: tuple = field(default=None)

    @property
    def d(self):
        return (self.p - HEAD_REGRESSORS) // 3

    @property
    def estimator_names(self):
        if self.estimators is None:
            return DEFAULT_ESTIMATORS[self.label if self.label in DEFAULT_ESTIMATORS else CUSTOM]
        return tuple(self.estimators)

    @property
    def coordinates(self):
        return representative_coordinates(self.d)

    def simulation_config(self, seed):
        return SimulationConfig(n=self.n, T=self.T, d=self.d, rho=self.rho, beta=self.beta, seed=seed)

    def validate(self):
        if self.label not in LABELS:
            raise ConfigError(f"scenario label must be one of {LABELS}, got {self.label!r}")
        if self.n < 1 or self.T < 1:
            raise ConfigError(f"n and T must be positive, got n={self.n}, T={self.T}")
        if self.p < HEAD_REGRESSORS or (self.p - HEAD_REGRESSORS) % 3:
            raise ConfigError(f"p must be 3 + 3d for some d >= 0, got p={self.p}")
        if self.runs < 1:
            raise ConfigError(f"runs must be positive, got {self.runs}")
        if self.master_seed < 0:
            raise ConfigError(f"master seed must be nonnegative, got {self.master_seed}")
        names = self.estimator_names
        if not names:
            raise ConfigError("estimator list is empty")
        unknown = [name for name in names if name not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; choose from {', '.join(ESTIMATORS)}")
        if len(set(names)) != len(names):
            raise ConfigError(f"estimator list has duplicates: {list(names)}")
        if self.label != CUSTOM:
            regime = regime_of(self.n, self.T, self.p)
            if regime != self.label:
                raise ConfigError(
                    f"(n, T, p) = ({self.n}, {self.T}, {self.p}) lies in regime {regime}, "
                    f"not scenario {self.label}"
                )
        if any(name in (HD_LASSO, ORACLE_LASSO) for name in names) and self.n < self.cv_folds:
            raise ConfigError(f"cross-validation needs n >= {self.cv_folds} units, got n={self.n}")
        self.simulation_config(0).validate()
        return self

    def to_dict(self):
        out = asdict(self)
        out["estimators"] = list(self.estimator_names)
        out["d"] = self.d
        out["coordinates"] = list(self.coordinates)
        if self.beta is not None:
            out["beta"] = [float(b) for b in self.beta]
        return out


def preset_scenarios(label, n, T, **kwargs):
    key = (label, n, T)
    if key not in PRESET_SETTINGS:
        known = ", ".join(f"{k[0]}({k[1]},{k[2]})" for k in PRESET_SETTINGS)
        raise ConfigError(f"no preset setting for scenario {label} with (n, T) = ({n}, {T}); known: {known}")
    return [ScenarioSpec(label, n, T, p, **kwargs) for p in PRESET_SETTINGS[key]]

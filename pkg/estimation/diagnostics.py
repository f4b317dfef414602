from dataclasses import dataclass, field

import numpy as np

from panel_data import rng as streams
from panel_data.errors import ConfigError, DataError


CONE_FACTOR = 3.0


@dataclass(frozen=True)
class REEstimate:
    index_set: tuple
    phi_lower: float
    samples: int
    phi_samples: np.ndarray = field(repr=False, default=None)

    def violations_at(self, phis):
        phis = np.atleast_1d(np.asarray(phis, dtype=float))
        return {float(phi): int(np.count_nonzero(self.phi_samples < phi)) for phi in phis}


# Minimum over sampled cone directions, so an upper bound on the true constant.
def re_condition_sample(design, index_set, samples, seed=0):
    A = np.asarray(design, dtype=float)
    if A.ndim != 2:
        raise DataError(f"design must be a 2-d matrix, got shape {A.shape}")
    n_obs, p = A.shape
    index = sorted({int(i) for i in index_set})
    if not index:
        raise ConfigError("restricted eigenvalue index set is empty")
    if index[0] < 0 or index[-1] >= p:
        raise ConfigError(f"index set {index} out of range for p={p}")
    if samples < 1:
        raise ConfigError(f"samples must be positive, got {samples}")
    rest = np.setdiff1d(np.arange(p), index)

    gen = streams.stream(seed, streams.RE_SAMPLING)
    b = np.zeros((samples, p))
    b_in = gen.standard_normal((samples, len(index)))
    l1_in = np.abs(b_in).sum(axis=1)
    b[:, index] = b_in
    if rest.size:
        direction = gen.standard_normal((samples, rest.size))
        u = gen.uniform(size=samples)
        scale = u * CONE_FACTOR * l1_in / np.abs(direction).sum(axis=1)
        b[:, rest] = direction * scale[:, None]

    quad = ((b @ A.T) ** 2).sum(axis=1) / n_obs
    phi = np.sqrt(len(index) * quad) / l1_in
    return REEstimate(tuple(index), float(phi.min()), int(samples), phi)


def projection_quality(proj, F):
    mat = proj.mat if hasattr(proj, "mat") else np.asarray(proj, dtype=float)
    F = np.asarray(F, dtype=float)
    if F.shape[0] != mat.shape[0]:
        raise DataError(f"factor matrix has {F.shape[0]} rows, projection is {mat.shape[0]} x {mat.shape[0]}")
    f_norm = np.linalg.norm(F)
    return {
        "ratio": float(np.linalg.norm(mat @ F) / f_norm) if f_norm > 0 else 0.0,
        "sym_err": float(np.max(np.abs(mat - mat.T))),
        "idem_err": float(np.max(np.abs(mat @ mat - mat))),
    }


def eigen_spike_report(spectral, k):
    eigvals = spectral.eigvals
    p = len(eigvals)
    if not 1 <= k < p:
        raise ConfigError(f"k must lie in [1, p-1] = [1, {p - 1}], got {k}")
    following = eigvals[k]
    return {
        "head": [float(v) for v in eigvals[:k]],
        "gap_ratio": float("inf") if following == 0 else float(eigvals[k - 1] / following),
        "head_over_p": float(eigvals[k - 1] / p),
    }

"""File formats.

y.csv   headerless n x T matrix of responses
x.csv   long format with header ``unit,time,j,value``; indices are 1-based
truth.json  simulation config plus the latent F, gamma and Gamma
fit.json / beta.csv  estimator output
"""
import json
import os

import numpy as np
import pandas as pd

from experiments.report import write_csv, write_json
from panel_data.dataset import PanelDataset
from panel_data.errors import ConfigError, DataError


X_COLUMNS = ["unit", "time", "j", "value"]


def _read_csv(filepath, **kwargs):
    try:
        return pd.read_csv(filepath, **kwargs)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {filepath}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exc:
        raise DataError(f"could not parse {filepath}: {exc}") from exc


def write_panel(panel, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    n, T, p = panel.X.shape
    unit, time, j = np.meshgrid(np.arange(1, n + 1), np.arange(1, T + 1), np.arange(1, p + 1), indexing="ij")
    x_long = pd.DataFrame({
        "unit": unit.ravel(),
        "time": time.ravel(),
        "j": j.ravel(),
        "value": panel.X.ravel(),
    })
    y_path = write_csv(pd.DataFrame(panel.Y), os.path.join(out_dir, "y.csv"), header=False)
    x_path = write_csv(x_long, os.path.join(out_dir, "x.csv"))
    return y_path, x_path


def read_y(filepath):
    frame = _read_csv(filepath, header=None)
    try:
        return frame.to_numpy(dtype=float)
    except ValueError as exc:
        raise DataError(f"{filepath} has non-numeric cells: {exc}") from exc


def read_x(filepath, n, T):
    frame = _read_csv(filepath)
    if list(frame.columns) != X_COLUMNS:
        raise DataError(f"{filepath} must have header {','.join(X_COLUMNS)}, got {','.join(map(str, frame.columns))}")
    try:
        idx = frame[["unit", "time", "j"]].to_numpy(dtype=np.int64)
        values = frame["value"].to_numpy(dtype=float)
    except ValueError as exc:
        raise DataError(f"{filepath} has non-numeric cells: {exc}") from exc
    if len(frame) == 0:
        raise DataError(f"{filepath} has no rows")

    p = int(idx[:, 2].max())
    bad = (idx[:, 0] < 1) | (idx[:, 0] > n) | (idx[:, 1] < 1) | (idx[:, 1] > T) | (idx[:, 2] < 1)
    if np.any(bad):
        u, t, j = idx[np.argmax(bad)]
        raise DataError(f"x.csv index (unit={u}, time={t}, j={j}) outside the {n} x {T} response panel")

    X = np.full((n, T, p), np.nan)
    seen = np.zeros((n, T, p), dtype=bool)
    pos = (idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1)
    if np.count_nonzero(np.bincount(np.ravel_multi_index(pos, (n, T, p))) > 1):
        raise DataError(f"{filepath} lists some (unit, time, j) cell more than once")
    X[pos] = values
    seen[pos] = True
    if not seen.all():
        u, t, j = (int(i) + 1 for i in np.argwhere(~seen)[0])
        raise DataError(f"{filepath} is incomplete: no value for (unit={u}, time={t}, j={j})")
    return X


def read_panel(y_path, x_path):
    Y = read_y(y_path)
    if Y.ndim != 2 or Y.size == 0:
        raise DataError(f"{y_path} must hold an n x T matrix")
    n, T = Y.shape
    return PanelDataset(Y, read_x(x_path, n, T)).validate()


def write_truth(config, truth, filepath):
    data = {
        "config": config.to_dict(),
        "dims": {"n": config.n, "T": config.T, "p": config.p, "K": truth.K},
        "beta": [float(b) for b in config.beta_vector],
        "F": truth.F.tolist(),
        "gamma": truth.gamma.tolist(),
        "Gamma": truth.Gamma.tolist(),
    }
    return write_json(data, filepath)


def read_truth(filepath):
    try:
        with open(filepath, "r") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {filepath}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"could not parse {filepath}: {exc}") from exc
    if "F" not in data or "beta" not in data:
        raise DataError(f"{filepath} is not a truth file (needs 'F' and 'beta')")
    F = np.asarray(data["F"], dtype=float)
    if F.ndim != 2:
        raise DataError(f"{filepath}: F must be a T x K matrix")
    return F, np.asarray(data["beta"], dtype=float)


def write_fit(report, out_dir, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    data = report.to_dict()
    if extra:
        data.update(extra)
    fit_path = write_json(data, os.path.join(out_dir, "fit.json"))
    beta_path = write_csv(report.beta_frame(), os.path.join(out_dir, "beta.csv"))
    return fit_path, beta_path


def write_fit_diagnostics(rows, filepath):
    return write_csv(pd.DataFrame(rows, columns=["name", "value"]), filepath)


def read_config(filepath):
    try:
        with open(filepath, "r") as f:
            values = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file: {filepath}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"could not parse {filepath}: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"{filepath} must hold a JSON object")
    values.pop("p", None)
    return values

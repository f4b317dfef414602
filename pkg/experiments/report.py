import json
import os
import platform

import numba
import numpy as np
import pandas as pd
import scipy

import estimation
from experiments.montecarlo import L1_ROW, summarize


FLOAT_FORMAT = "%.17g"
LINE_TERMINATOR = "\n"


def write_csv(frame, filepath, header=True):
    frame.to_csv(filepath, index=False, header=header, float_format=FLOAT_FORMAT,
                 lineterminator=LINE_TERMINATOR)
    return filepath


def write_json(data, filepath):
    with open(filepath, "w", newline=LINE_TERMINATOR) as f:
        json.dump(data, f, indent=2, allow_nan=False)
        f.write(LINE_TERMINATOR)
    return filepath


def library_versions():
    return {
        "hdcce": estimation.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "numba": numba.__version__,
    }


class ReportWriter:

    def __init__(self, out_dir, threads=1):
        self.out_dir = out_dir
        self.threads = threads
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, name):
        return os.path.join(self.out_dir, name)

    def save_deviations_csv(self, report):
        return write_csv(report.deviations_frame(), self._path("deviations.csv"))

    def save_summary_csv(self, summary):
        return write_csv(summary, self._path("summary.csv"))

    def save_diagnostics_csv(self, report):
        return write_csv(report.diagnostics_frame(), self._path("diagnostics.csv"))

    def save_meta_json(self, report):
        meta = {
            "scenario": report.spec.to_dict(),
            "threads": self.threads,
            "beta": [float(b) for b in report.beta],
            "quantile_method": "linear",
            "exclusions": {name: report.n_excluded(name) for name in report.estimators},
            "versions": library_versions(),
        }
        return write_json(meta, self._path("meta.json"))

    def save_summary(self, report, summary):
        spec = report.spec
        k_hats = np.array([rec.k_hat for rec in report.records if rec.k_hat is not None])
        n_failed = len(report.records) - len(k_hats)

        filepath = self._path("summary.txt")
        with open(filepath, "w") as f:
            f.write("=" * 60 + "\n")
            f.write("HD-CCE MONTE CARLO SUMMARY\n")
            f.write("=" * 60 + "\n\n")

            f.write(f"Scenario: {spec.label}  (n={spec.n}, T={spec.T}, p={spec.p}, d={spec.d})\n")
            f.write(f"Runs: {spec.runs}  Master seed: {spec.master_seed}\n")
            f.write(f"Coordinates: {', '.join(str(j) for j in spec.coordinates)}\n\n")

            f.write("FACTOR COUNT:\n")
            f.write("-" * 40 + "\n")
            for k in np.unique(k_hats):
                share = np.count_nonzero(k_hats == k) / len(report.records) * 100
                f.write(f"  K_hat={k}: {share:.1f}% of runs\n")
            if n_failed:
                f.write(f"  no panel: {n_failed} run(s)\n")

            f.write("\nEXCLUSIONS:\n")
            f.write("-" * 40 + "\n")
            for name in report.estimators:
                f.write(f"  {name.upper()}: {report.n_excluded(name)} of {spec.runs}\n")

            f.write("\nMEDIAN DEVIATIONS:\n")
            f.write("-" * 40 + "\n")
            for name in report.estimators:
                rows = summary[summary["estimator"] == name]
                cells = [f"j={row.coordinate}:{row.median:+.4f}" for row in rows.itertuples()
                         if row.coordinate != L1_ROW]
                l1 = rows[rows["coordinate"] == L1_ROW]["median"].iloc[0]
                f.write(f"  {name.upper()}: {'  '.join(cells)}  l1:{l1:.4f}\n")

            f.write("\n" + "=" * 60 + "\n")

        return filepath

    def save_all(self, report):
        summary = summarize(report)
        paths = [
            self.save_deviations_csv(report),
            self.save_summary_csv(summary),
            self.save_meta_json(report),
            self.save_summary(report, summary),
        ]
        if report.spec.diagnostics:
            paths.append(self.save_diagnostics_csv(report))
        return paths

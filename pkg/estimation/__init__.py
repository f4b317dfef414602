# Estimation module - spectral step, projections, solvers and the estimator pipelines
__version__ = "0.1.0"

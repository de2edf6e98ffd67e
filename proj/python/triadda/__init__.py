"""Ensemble statistical data assimilation for quadratic SDE systems.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from triadda._core import (  # noqa: F401
    H_m,
    H_v,
    ModelSpec,
    TriadParams,
    bilinear_B,
    build_triad_spec,
    calibrate_noise,
    default_noise,
    drift_cov,
    drift_mean,
    empirical_moments,
    gain_cov,
    gain_mean,
    grad_H_m,
    grad_H_v,
    lyapunov_exponents,
    make_observations,
    mean_coupling_L,
    pearson_correlation,
    regime_params,
    regime_spec,
    relative_entropy,
    rmse_series,
    run_enkf,
    run_filter,
    run_forecast,
    run_truth,
    set_num_threads,
)

__all__ = [
    "H_m",
    "H_v",
    "ModelSpec",
    "TriadParams",
    "bilinear_B",
    "build_triad_spec",
    "calibrate_noise",
    "default_noise",
    "drift_cov",
    "drift_mean",
    "empirical_moments",
    "gain_cov",
    "gain_mean",
    "grad_H_m",
    "grad_H_v",
    "lyapunov_exponents",
    "make_observations",
    "mean_coupling_L",
    "pearson_correlation",
    "regime_params",
    "regime_spec",
    "relative_entropy",
    "rmse_series",
    "run_enkf",
    "run_filter",
    "run_forecast",
    "run_truth",
    "set_num_threads",
]

#pragma once

#include "triadda/filter.hpp"

namespace triadda {

// Constant-gain ensemble Kalman filter baseline: deterministic gain
// K = C^{ZH} Gamma^-2 from the particle/observation cross-covariance
// (divisor N) and zero drift.
Eigen::MatrixXd enkf_gain(const RowMatrixXd& particles,
                          const Eigen::MatrixXd& H_values, double gamma);

// Same forecast loop as run_filter with the EnKF update: per-particle
// innovation with H(Z^i), one shared gain, no drift term.
RunOutput run_enkf(const ModelSpec& spec, const StatState& init,
                   const ObservationSeries& obs, const FilterConfig& cfg);

}  // namespace triadda

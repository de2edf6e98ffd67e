#pragma once

#include <cstdint>
#include <vector>

#include "triadda/forecast.hpp"
#include "triadda/observation.hpp"
#include "triadda/series.hpp"

namespace triadda {

struct FilterConfig {
  std::int64_t n_samples = 100;
  double dt = 1e-3;
  double dt_obs = 1e-3;
  double t_final = 10.0;
  double epsilon_inv = 0.1;
  NoiseAmplitudes noise;
  // Remark-1 style stabilization: replace the bracketed per-particle factors
  // with their ensemble averages.  stabilize_innovation controls whether the
  // averaging also applies to the innovation term or only to the dt terms.
  bool stabilized = false;
  bool stabilize_innovation = true;
  int s = 3;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times = {5.0};

  void validate(int d) const;
};

// State-dependent Kalman gain for the mean block,
// K^m = 1/2 z (Hm - Hm_bar)^T Gamma_m^-2  (d x s).
Eigen::MatrixXd gain_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& Hm,
                          const Eigen::VectorXd& Hm_bar, double gamma_m);

// Covariance-block gain, K^v = 1/3 z (Hv - Hv_bar)^T Gamma_v^-2  (d x s^2).
Eigen::MatrixXd gain_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& Hv_flat,
                         const Eigen::VectorXd& Hv_bar_flat, double gamma_v);

// Compensating drifts, a^m = 1/4 z (Hm - Hm_bar)^T Gamma_m^-2 (3 Hm - Hm_bar)
// and a^v = 1/9 z (Hv - Hv_bar)^T Gamma_v^-2 (4 Hv - Hv_bar).
Eigen::VectorXd drift_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& Hm,
                           const Eigen::VectorXd& Hm_bar, double gamma_m);
Eigen::VectorXd drift_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& Hv_flat,
                          const Eigen::VectorXd& Hv_bar_flat, double gamma_v);

// Combined analysis update applied in place to every particle: the mean block
// 1/2 [Z H'^T G^-2](du_obs - du_model) + dt/2 [Z H'^T G^-2] Hbar
// + dt/4 [Z H'^T G^-2 H'] and the covariance block with coefficients
// 1/3, dt/3, dt/9.  With stabilized = true the bracketed factors are replaced
// by their ensemble averages before application.  Throws
// FilterDivergenceError when an update goes non-finite.
void analysis_update(const ModelSpec& spec, RowMatrixXd& particles,
                     const Eigen::VectorXd& du_model,
                     const Eigen::MatrixXd& dR_model,
                     const Eigen::VectorXd& du_obs,
                     const Eigen::MatrixXd& dR_obs,
                     const Eigen::VectorXd& Hm_bar, const Eigen::MatrixXd& Hv_bar,
                     const NoiseAmplitudes& noise, double dt, bool stabilized,
                     bool stabilize_innovation = true,
                     UpdateDiagnostics* diag = nullptr, double t_context = 0.0,
                     std::int64_t step_context = -1);

// Full high-order assimilation run: forecast with the coupled model, apply the
// analysis update whenever an observation increment is received.
RunOutput run_filter(const ModelSpec& spec, const StatState& init,
                     const ObservationSeries& obs, const FilterConfig& cfg);

}  // namespace triadda

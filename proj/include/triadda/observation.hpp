#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "triadda/model.hpp"
#include "triadda/series.hpp"

namespace triadda {

// Nonlinear observation functions induced by the quadratic coupling.  The
// first s mean components and the leading s x s covariance block are the
// observed quantities; H^m is homogeneous of degree 2 and H^v of degree 3.

// H^m_k(z) = sum_{p,q} gamma_kpq z_p z_q, k < s.
Eigen::VectorXd H_m(const ModelSpec& spec, const Eigen::VectorXd& z, int s);

// H^v_{kl}(z) = sum_{p,q} gamma_kpq z_p z_q z_l + gamma_lpq z_p z_q z_k.
Eigen::MatrixXd H_v(const ModelSpec& spec, const Eigen::VectorXd& z, int s);

// Analytic Jacobians: grad_H_m is s x d with entry (k, j) = d_j H^m_k;
// grad_H_v is s^2 x d with rows indexed row-major, flat(k, l) = k*s + l.
Eigen::MatrixXd grad_H_m(const ModelSpec& spec, const Eigen::VectorXd& z, int s);
Eigen::MatrixXd grad_H_v(const ModelSpec& spec, const Eigen::VectorXd& z, int s);

// Row-major flattening used whenever H^v and covariance increments are
// treated as length-s^2 vectors.
Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& m);

struct NoiseAmplitudes {
  double gamma_m = 0.0;  // Gamma_m = gamma_m * I_s
  double gamma_v = 0.0;  // Gamma_v = gamma_v * I_{s^2}
};

// Time-indexed observation increments of the leading statistical moments.
// Entry j covers the window ((j)*dt_obs, (j+1)*dt_obs]; times stores the
// receipt time at the window end.
struct ObservationSeries {
  double dt_obs = 0.0;
  int s = 0;
  std::vector<double> times;
  RowMatrixXd d_ubar;   // n_obs x s
  RowMatrixXd d_R_flat; // n_obs x s*s

  std::size_t size() const { return times.size(); }
  Eigen::VectorXd d_ubar_at(std::size_t j) const {
    return d_ubar.row(static_cast<Eigen::Index>(j));
  }
  Eigen::MatrixXd d_R_at(std::size_t j) const {
    Eigen::MatrixXd m(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b)
        m(a, b) = d_R_flat(static_cast<Eigen::Index>(j), a * s + b);
    return m;
  }
};

// Increments of the truth mean and covariance restricted to the first s
// modes, emitted at multiples of dt_obs (which must be an integer multiple of
// the series' dt).
ObservationSeries make_observations(const StatSeries& truth, double dt_obs, int s);

struct CalibrationResult {
  NoiseAmplitudes noise;
  std::int64_t n_samples = 0;
  int n_reps = 0;
  double t_final = 0.0;
  double dt = 0.0;
  double skip_fraction = 0.0;  // leading transient excluded from the average
};

// Estimate the finite-ensemble observation noise amplitudes by running
// n_reps independent N-sample forecasts against a reference truth and
// averaging E||y^N_t - y_t||^2 / t over the trajectory (first 5% skipped),
// separately for the mean and covariance blocks.  When `reference` is null a
// Monte-Carlo truth of size mc_size is generated internally.
CalibrationResult calibrate_noise(const ModelSpec& spec,
                                  const Eigen::VectorXd& init_mean,
                                  const Eigen::VectorXd& init_var,
                                  std::int64_t n_samples, int n_reps, double T,
                                  double dt, std::uint64_t seed,
                                  double epsilon_inv = 0.1,
                                  const StatSeries* reference = nullptr,
                                  std::int64_t mc_size = 100000);

}  // namespace triadda

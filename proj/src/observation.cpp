#include "triadda/observation.hpp"

#include <cmath>
#include <sstream>

#include "triadda/errors.hpp"
#include "triadda/forecast.hpp"
#include "triadda/rng.hpp"
#include "triadda/truth.hpp"

namespace triadda {

namespace {

void check_obs_dims(const ModelSpec& spec, const Eigen::VectorXd& z, int s,
                    const char* fn) {
  if (z.size() != spec.d)
    throw ContractError(std::string(fn) + ": z must have size d");
  if (s < 1 || s > spec.d)
    throw ContractError(std::string(fn) + ": need 1 <= s <= d");
}

}  // namespace

Eigen::VectorXd H_m(const ModelSpec& spec, const Eigen::VectorXd& z, int s) {
  check_obs_dims(spec, z, s, "H_m");
  const int d = spec.d;
  Eigen::VectorXd out(s);
  for (int k = 0; k < s; ++k) {
    double acc = 0.0;
    const double* g = &spec.gamma[static_cast<std::size_t>(k) * d * d];
    for (int p = 0; p < d; ++p) {
      const double zp = z[p];
      for (int q = 0; q < d; ++q) acc += g[p * d + q] * zp * z[q];
    }
    out[k] = acc;
  }
  return out;
}

Eigen::MatrixXd H_v(const ModelSpec& spec, const Eigen::VectorXd& z, int s) {
  check_obs_dims(spec, z, s, "H_v");
  Eigen::VectorXd hm = H_m(spec, z, s);
  Eigen::MatrixXd out(s, s);
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l) out(k, l) = hm[k] * z[l] + hm[l] * z[k];
  return out;
}

Eigen::MatrixXd grad_H_m(const ModelSpec& spec, const Eigen::VectorXd& z, int s) {
  check_obs_dims(spec, z, s, "grad_H_m");
  const int d = spec.d;
  Eigen::MatrixXd out(s, d);
  // d_j H^m_k = gamma_kjq z_q + gamma_kpj z_p = 2 (gamma_k z)_j for the
  // symmetrized tensor.
  for (int k = 0; k < s; ++k) {
    const double* g = &spec.gamma[static_cast<std::size_t>(k) * d * d];
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int q = 0; q < d; ++q) acc += g[j * d + q] * z[q];
      out(k, j) = 2.0 * acc;
    }
  }
  return out;
}

Eigen::MatrixXd grad_H_v(const ModelSpec& spec, const Eigen::VectorXd& z, int s) {
  check_obs_dims(spec, z, s, "grad_H_v");
  const int d = spec.d;
  Eigen::VectorXd hm = H_m(spec, z, s);
  Eigen::MatrixXd dhm = grad_H_m(spec, z, s);
  Eigen::MatrixXd out(s * s, d);
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l) {
      const int row = k * s + l;
      for (int j = 0; j < d; ++j) {
        double acc = dhm(k, j) * z[l] + dhm(l, j) * z[k];
        if (j == l) acc += hm[k];
        if (j == k) acc += hm[l];
        out(row, j) = acc;
      }
    }
  return out;
}

Eigen::VectorXd flatten_rowmajor(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.rows() * m.cols());
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[at++] = m(i, j);
  return out;
}

ObservationSeries make_observations(const StatSeries& truth, double dt_obs, int s) {
  const int d = truth.dim();
  if (s < 1 || s > d) throw ContractError("make_observations: need 1 <= s <= d");
  if (!(truth.dt > 0.0) || truth.size() < 2)
    throw ConfigError("make_observations: truth series is empty");
  const double ratio = dt_obs / truth.dt;
  const std::int64_t stride = std::llround(ratio);
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw ConfigError("make_observations: dt_obs must be an integer multiple of dt");
  const std::int64_t last = static_cast<std::int64_t>(truth.size()) - 1;
  const std::int64_t n_obs = last / stride;
  if (n_obs < 1)
    throw ConfigError("make_observations: series shorter than one observation window");

  ObservationSeries obs;
  obs.dt_obs = dt_obs;
  obs.s = s;
  obs.times.resize(static_cast<std::size_t>(n_obs));
  obs.d_ubar.resize(n_obs, s);
  obs.d_R_flat.resize(n_obs, s * s);
  for (std::int64_t j = 0; j < n_obs; ++j) {
    const std::size_t i0 = static_cast<std::size_t>(j * stride);
    const std::size_t i1 = static_cast<std::size_t>((j + 1) * stride);
    obs.times[static_cast<std::size_t>(j)] = truth.times[i1];
    for (int a = 0; a < s; ++a)
      obs.d_ubar(j, a) = truth.mean(static_cast<Eigen::Index>(i1), a) -
                         truth.mean(static_cast<Eigen::Index>(i0), a);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b)
        obs.d_R_flat(j, a * s + b) =
            truth.cov_flat(static_cast<Eigen::Index>(i1), a * d + b) -
            truth.cov_flat(static_cast<Eigen::Index>(i0), a * d + b);
  }
  return obs;
}

CalibrationResult calibrate_noise(const ModelSpec& spec,
                                  const Eigen::VectorXd& init_mean,
                                  const Eigen::VectorXd& init_var,
                                  std::int64_t n_samples, int n_reps, double T,
                                  double dt, std::uint64_t seed,
                                  double epsilon_inv, const StatSeries* reference,
                                  std::int64_t mc_size) {
  if (n_reps < 4) throw ContractError("calibrate_noise: need n_reps >= 4");

  TruthSeries own_truth;
  if (!reference) {
    own_truth = run_truth(spec, init_mean, init_var, dt, T, mc_size,
                          derive_seed(seed, 0x7472757468ULL), {});
    reference = &own_truth.stats;
  }
  const StatSeries& truth = *reference;
  const int d = truth.dim();
  const std::size_t steps = truth.size();
  if (steps < 4) throw CalibrationError("calibrate_noise: reference too short");
  for (std::size_t i = 0; i < steps; ++i)
    if (!std::isfinite(truth.m3[i]) || !truth.mean.row(static_cast<Eigen::Index>(i)).allFinite())
      throw CalibrationError("calibrate_noise: reference truth is degenerate");

  std::vector<double> err_m(steps, 0.0), err_v(steps, 0.0);
  StatState init{init_mean, Eigen::MatrixXd(init_var.asDiagonal())};
  for (int rep = 0; rep < n_reps; ++rep) {
    ForecastConfig cfg;
    cfg.dt = dt;
    cfg.epsilon_inv = epsilon_inv;
    cfg.n_samples = n_samples;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(rep) + 1);
    RunOutput run = run_forecast(spec, init, cfg, T, {});
    if (run.stats.size() != steps)
      throw CalibrationError("calibrate_noise: grid mismatch with reference");
    for (std::size_t i = 0; i < steps; ++i) {
      err_m[i] += (run.stats.mean.row(static_cast<Eigen::Index>(i)) -
                   truth.mean.row(static_cast<Eigen::Index>(i)))
                      .squaredNorm();
      err_v[i] += (run.stats.cov_flat.row(static_cast<Eigen::Index>(i)) -
                   truth.cov_flat.row(static_cast<Eigen::Index>(i)))
                      .squaredNorm();
    }
  }

  // E||y^N_t - y_t||^2 ~ t Gamma^2, averaged over the window with the
  // leading transient excluded.
  const double skip_fraction = 0.05;
  const std::size_t first = std::max<std::size_t>(1, static_cast<std::size_t>(
      std::ceil(skip_fraction * static_cast<double>(steps - 1))));
  double gm2 = 0.0, gv2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = first; i < steps; ++i) {
    const double t = truth.times[i];
    if (!(t > 0.0)) continue;
    gm2 += err_m[i] / (static_cast<double>(n_reps) * t);
    gv2 += err_v[i] / (static_cast<double>(n_reps) * t);
    ++count;
  }
  if (count == 0) throw CalibrationError("calibrate_noise: empty averaging window");

  CalibrationResult out;
  out.noise.gamma_m = std::sqrt(gm2 / static_cast<double>(count));
  out.noise.gamma_v = std::sqrt(gv2 / static_cast<double>(count));
  out.n_samples = n_samples;
  out.n_reps = n_reps;
  out.t_final = T;
  out.dt = dt;
  out.skip_fraction = skip_fraction;
  (void)d;
  return out;
}

}  // namespace triadda

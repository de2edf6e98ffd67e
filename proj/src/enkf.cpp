#include "triadda/enkf.hpp"

#include <cmath>
#include <sstream>

#include "da_loop.hpp"
#include "kernels.hpp"
#include "triadda/errors.hpp"
#include "triadda/parallel.hpp"

namespace triadda {

Eigen::MatrixXd enkf_gain(const RowMatrixXd& particles,
                          const Eigen::MatrixXd& H_values, double gamma) {
  const std::int64_t n = particles.rows();
  if (n < 2) throw ContractError("enkf_gain: need at least 2 samples");
  if (H_values.rows() != n)
    throw ContractError("enkf_gain: particle/observation row mismatch");
  if (!(gamma > 0.0))
    throw ContractError("enkf_gain: noise amplitude must be positive");
  const int d = static_cast<int>(particles.cols());
  const int m = static_cast<int>(H_values.cols());

  // Means and cross sums in one deterministic blockwise pass.
  const int width = m + d * m;
  const std::int64_t nb = num_blocks(n);
  std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * width;
    for (std::int64_t i = lo; i < hi; ++i) {
      for (int k = 0; k < m; ++k) acc[k] += H_values(i, k);
      for (int a = 0; a < d; ++a)
        for (int k = 0; k < m; ++k)
          acc[m + a * m + k] += particles(i, a) * H_values(i, k);
    }
  });
  std::vector<double> totals(static_cast<std::size_t>(width));
  pairwise_combine(partials.data(), nb, width, totals.data());
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd h_bar(m);
  for (int k = 0; k < m; ++k) h_bar[k] = totals[static_cast<std::size_t>(k)] * inv_n;
  Eigen::VectorXd z_bar = Eigen::VectorXd::Zero(d);
  for (std::int64_t i = 0; i < n; ++i) z_bar += particles.row(i).transpose();
  z_bar *= inv_n;
  // E^N[Z (H - Hbar)^T] = E^N[Z H^T] - Zbar Hbar^T.
  Eigen::MatrixXd gain(d, m);
  for (int a = 0; a < d; ++a)
    for (int k = 0; k < m; ++k)
      gain(a, k) = totals[static_cast<std::size_t>(m + a * m + k)] * inv_n -
                   z_bar[a] * h_bar[k];
  return gain / (gamma * gamma);
}

RunOutput run_enkf(const ModelSpec& spec, const StatState& init,
                   const ObservationSeries& obs, const FilterConfig& cfg) {
  cfg.validate(spec.d);
  if (obs.s != cfg.s)
    throw ContractError("run_enkf: observation series has different s");
  if (std::abs(obs.dt_obs - cfg.dt_obs) > 1e-12)
    throw ContractError("run_enkf: observation series has different dt_obs");

  detail::DaLoopConfig dl;
  dl.dt = cfg.dt;
  dl.t_final = cfg.t_final;
  dl.epsilon_inv = cfg.epsilon_inv;
  dl.n_samples = cfg.n_samples;
  dl.seed = cfg.seed;
  dl.snapshot_times = cfg.snapshot_times;

  const int s = cfg.s;
  const int d = spec.d;
  const double inv_gm2 = 1.0 / (cfg.noise.gamma_m * cfg.noise.gamma_m);
  const double inv_gv2 = 1.0 / (cfg.noise.gamma_v * cfg.noise.gamma_v);

  detail::AnalysisHook hook =
      [&, s, d, inv_gm2, inv_gv2](
          RowMatrixXd& particles, const Eigen::VectorXd& du_model,
          const Eigen::MatrixXd& dR_model, const Eigen::VectorXd& du_obs,
          const Eigen::MatrixXd& dR_obs, double dt_window, double t,
          std::int64_t step) {
        const std::int64_t n = particles.rows();
        const detail::RawSpec rs = detail::raw_view(spec);
        Eigen::MatrixXd hm_vals(n, s), hv_vals(n, s * s);
        for_each_block(n, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
          double hm_full[detail::kMaxDim];
          for (std::int64_t i = lo; i < hi; ++i) {
            const double* z = particles.data() + i * d;
            if (d == 3)
              detail::h_m_eval<3>(rs, z, hm_full);
            else
              detail::h_m_eval<0>(rs, z, hm_full);
            for (int k = 0; k < s; ++k) hm_vals(i, k) = hm_full[k];
            for (int k = 0; k < s; ++k)
              for (int l = 0; l < s; ++l)
                hv_vals(i, k * s + l) = hm_full[k] * z[l] + hm_full[l] * z[k];
          }
        });
        // Gains from the prior forecast ensemble; gamma^-2 folded in below to
        // reuse the cross-covariances for the centered innovations.
        const Eigen::MatrixXd cross_m = enkf_gain(particles, hm_vals, 1.0);
        const Eigen::MatrixXd cross_v = enkf_gain(particles, hv_vals, 1.0);
        const Eigen::MatrixXd K_m = cross_m * inv_gm2;
        const Eigen::MatrixXd K_v = cross_v * inv_gv2;
        const Eigen::VectorXd innov_m = du_obs - du_model.head(s);
        const Eigen::VectorXd innov_v =
            flatten_rowmajor(dR_obs - dR_model.topLeftCorner(s, s));
        Eigen::VectorXd hm_bar = Eigen::VectorXd::Zero(s);
        Eigen::VectorXd hv_bar = Eigen::VectorXd::Zero(s * s);
        for (std::int64_t i = 0; i < n; ++i) {
          hm_bar += hm_vals.row(i).transpose();
          hv_bar += hv_vals.row(i).transpose();
        }
        hm_bar /= static_cast<double>(n);
        hv_bar /= static_cast<double>(n);

        const std::int64_t nb = num_blocks(n);
        std::vector<double> partials(static_cast<std::size_t>(nb * 2), 0.0);
        std::vector<double> maxima(static_cast<std::size_t>(nb), 0.0);
        detail::BadIndex bad;
        for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
          double* acc = partials.data() + b * 2;
          double& mx = maxima[static_cast<std::size_t>(b)];
          for (std::int64_t i = lo; i < hi; ++i) {
            double* z = particles.data() + i * d;
            Eigen::VectorXd im = innov_m;
            Eigen::VectorXd iv = innov_v;
            for (int k = 0; k < s; ++k)
              im[k] -= (hm_vals(i, k) - hm_bar[k]) * dt_window;
            for (int k = 0; k < s * s; ++k)
              iv[k] -= (hv_vals(i, k) - hv_bar[k]) * dt_window;
            const Eigen::VectorXd um = K_m * im;
            const Eigen::VectorXd uv = K_v * iv;
            bool finite = true;
            for (int a = 0; a < d; ++a) {
              z[a] += um[a] + uv[a];
              if (!std::isfinite(z[a])) finite = false;
              mx = std::max(mx, std::abs(z[a]));
            }
            acc[0] += um.squaredNorm();
            acc[1] += uv.squaredNorm();
            if (!finite) bad.note(i);
          }
        });
        const std::int64_t bad_index = bad.value.load();
        if (bad_index >= 0) {
          std::ostringstream os;
          os << "EnKF update produced non-finite sample (particle " << bad_index
             << ")";
          throw FilterDivergenceError(os.str(), t, step, bad_index);
        }
        std::vector<double> totals(2);
        pairwise_combine(partials.data(), nb, 2, totals.data());
        UpdateDiagnostics diag;
        diag.t = t;
        diag.mean_block_rms = std::sqrt(totals[0] / static_cast<double>(n));
        diag.cov_block_rms = std::sqrt(totals[1] / static_cast<double>(n));
        double mx = 0.0;
        for (double m : maxima) mx = std::max(mx, m);
        diag.max_abs_state = mx;
        return diag;
      };
  return detail::run_da_loop(spec, init, dl, &obs, hook, "enkf");
}

}  // namespace triadda

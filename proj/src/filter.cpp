#include "triadda/filter.hpp"

#include <cmath>
#include <sstream>

#include "da_loop.hpp"
#include "kernels.hpp"
#include "triadda/errors.hpp"
#include "triadda/parallel.hpp"

namespace triadda {

namespace {

void check_gamma(double gamma, const char* fn) {
  if (!(gamma > 0.0))
    throw ContractError(std::string(fn) + ": noise amplitude must be positive");
}

}  // namespace

void FilterConfig::validate(int d) const {
  if (n_samples < 2) throw ContractError("FilterConfig: need at least 2 samples");
  if (!(dt > 0.0) || !(dt_obs > 0.0) || !(t_final > 0.0))
    throw ContractError("FilterConfig: dt, dt_obs, t_final must be positive");
  const double ratio = dt_obs / dt;
  const std::int64_t k = std::llround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9)
    throw ContractError("FilterConfig: dt_obs must be an integer multiple of dt");
  if (!(noise.gamma_m > 0.0) || !(noise.gamma_v > 0.0))
    throw ContractError("FilterConfig: noise amplitudes must be positive");
  if (s < 1 || s > d) throw ContractError("FilterConfig: need 1 <= s <= d");
  if (epsilon_inv < 0.0)
    throw ContractError("FilterConfig: epsilon_inv must be nonnegative");
}

Eigen::MatrixXd gain_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& Hm,
                          const Eigen::VectorXd& Hm_bar, double gamma_m) {
  check_gamma(gamma_m, "gain_mean");
  if (Hm.size() != Hm_bar.size())
    throw ContractError("gain_mean: H and Hbar sizes differ");
  return (0.5 / (gamma_m * gamma_m)) * z * (Hm - Hm_bar).transpose();
}

Eigen::MatrixXd gain_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& Hv_flat,
                         const Eigen::VectorXd& Hv_bar_flat, double gamma_v) {
  check_gamma(gamma_v, "gain_cov");
  if (Hv_flat.size() != Hv_bar_flat.size())
    throw ContractError("gain_cov: H and Hbar sizes differ");
  return (1.0 / (3.0 * gamma_v * gamma_v)) * z * (Hv_flat - Hv_bar_flat).transpose();
}

Eigen::VectorXd drift_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& Hm,
                           const Eigen::VectorXd& Hm_bar, double gamma_m) {
  check_gamma(gamma_m, "drift_mean");
  const double w =
      (Hm - Hm_bar).dot(3.0 * Hm - Hm_bar) / (4.0 * gamma_m * gamma_m);
  return w * z;
}

Eigen::VectorXd drift_cov(const Eigen::VectorXd& z, const Eigen::VectorXd& Hv_flat,
                          const Eigen::VectorXd& Hv_bar_flat, double gamma_v) {
  check_gamma(gamma_v, "drift_cov");
  const double w = (Hv_flat - Hv_bar_flat).dot(4.0 * Hv_flat - Hv_bar_flat) /
                   (9.0 * gamma_v * gamma_v);
  return w * z;
}

namespace {

using detail::BadIndex;
using detail::kMaxDim;
using detail::RawSpec;

// Per-particle H evaluations restricted to the observed modes, written into
// stack buffers: hm (s) and the row-major flattened hv (s^2).
template <int DD>
inline void observed_h(const RawSpec& rs, int s, const double* z, double* hm_full,
                       double* hm, double* hv_flat) {
  detail::h_m_eval<DD>(rs, z, hm_full);
  for (int k = 0; k < s; ++k) hm[k] = hm_full[k];
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l)
      hv_flat[k * s + l] = hm_full[k] * z[l] + hm_full[l] * z[k];
}

struct BlockMeans {
  Eigen::VectorXd Hm_bar;       // s
  Eigen::VectorXd Hv_bar_flat;  // s^2
};

// Ensemble means of H^m and H^v over the observed modes (deterministic
// blockwise reduction).
BlockMeans observation_means(const ModelSpec& spec, const RowMatrixXd& particles,
                             int s) {
  const RawSpec rs = detail::raw_view(spec);
  const int d = spec.d;
  const std::int64_t n = particles.rows();
  const int width = s + s * s;
  const std::int64_t nb = num_blocks(n);
  std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
  const double* data = particles.data();
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * width;
    double hm_full[kMaxDim], hm[kMaxDim], hv[kMaxDim * kMaxDim];
    for (std::int64_t i = lo; i < hi; ++i) {
      const double* z = data + i * d;
      if (d == 3)
        observed_h<3>(rs, s, z, hm_full, hm, hv);
      else
        observed_h<0>(rs, s, z, hm_full, hm, hv);
      for (int k = 0; k < s; ++k) acc[k] += hm[k];
      for (int k = 0; k < s * s; ++k) acc[s + k] += hv[k];
    }
  });
  std::vector<double> totals(static_cast<std::size_t>(width));
  pairwise_combine(partials.data(), nb, width, totals.data());
  BlockMeans out;
  out.Hm_bar.resize(s);
  out.Hv_bar_flat.resize(s * s);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int k = 0; k < s; ++k) out.Hm_bar[k] = totals[static_cast<std::size_t>(k)] * inv_n;
  for (int k = 0; k < s * s; ++k)
    out.Hv_bar_flat[k] = totals[static_cast<std::size_t>(s + k)] * inv_n;
  return out;
}

}  // namespace

void analysis_update(const ModelSpec& spec, RowMatrixXd& particles,
                     const Eigen::VectorXd& du_model,
                     const Eigen::MatrixXd& dR_model,
                     const Eigen::VectorXd& du_obs,
                     const Eigen::MatrixXd& dR_obs,
                     const Eigen::VectorXd& Hm_bar, const Eigen::MatrixXd& Hv_bar,
                     const NoiseAmplitudes& noise, double dt, bool stabilized,
                     bool stabilize_innovation, UpdateDiagnostics* diag,
                     double t_context, std::int64_t step_context) {
  const int d = spec.d;
  const int s = static_cast<int>(du_obs.size());
  if (s < 1 || s > d || s > kMaxDim)
    throw ContractError("analysis_update: observed mode count out of range");
  if (du_model.size() != s || dR_model.rows() != s || dR_model.cols() != s ||
      dR_obs.rows() != s || dR_obs.cols() != s || Hm_bar.size() != s ||
      Hv_bar.rows() != s || Hv_bar.cols() != s)
    throw ContractError("analysis_update: increment dimensions inconsistent with s");
  if (particles.cols() != d)
    throw ContractError("analysis_update: particle dimension mismatch");
  check_gamma(noise.gamma_m, "analysis_update");
  check_gamma(noise.gamma_v, "analysis_update");

  const double inv_gm2 = 1.0 / (noise.gamma_m * noise.gamma_m);
  const double inv_gv2 = 1.0 / (noise.gamma_v * noise.gamma_v);
  const Eigen::VectorXd innov_m = du_obs - du_model;
  const Eigen::VectorXd innov_v = flatten_rowmajor(dR_obs - dR_model);
  const Eigen::VectorXd hv_bar_flat = flatten_rowmajor(Hv_bar);

  const RawSpec rs = detail::raw_view(spec);
  const std::int64_t n = particles.rows();
  const std::int64_t nb = num_blocks(n);
  double* data = particles.data();

  // Stabilized variant: ensemble averages of the bracketed factors.
  // Width: A_m (d*s), A_v (d*s^2), b_m (d), b_v (d).
  Eigen::MatrixXd A_m, A_v;
  Eigen::VectorXd b_m, b_v;
  if (stabilized) {
    const int width = d * s + d * s * s + 2 * d;
    std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
    for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
      double* acc = partials.data() + b * width;
      double hm_full[kMaxDim], hm[kMaxDim], hv[kMaxDim * kMaxDim];
      for (std::int64_t i = lo; i < hi; ++i) {
        const double* z = data + i * d;
        if (d == 3)
          observed_h<3>(rs, s, z, hm_full, hm, hv);
        else
          observed_h<0>(rs, s, z, hm_full, hm, hv);
        double qm = 0.0, qv = 0.0;
        for (int k = 0; k < s; ++k) {
          hm[k] -= Hm_bar[k];
          qm += hm[k] * hm[k];
        }
        for (int k = 0; k < s * s; ++k) {
          hv[k] -= hv_bar_flat[k];
          qv += hv[k] * hv[k];
        }
        double* am = acc;
        double* av = acc + d * s;
        double* bm = av + d * s * s;
        double* bv = bm + d;
        for (int a = 0; a < d; ++a) {
          for (int k = 0; k < s; ++k) am[a * s + k] += z[a] * hm[k];
          for (int k = 0; k < s * s; ++k) av[a * s * s + k] += z[a] * hv[k];
          bm[a] += z[a] * qm;
          bv[a] += z[a] * qv;
        }
      }
    });
    std::vector<double> totals(static_cast<std::size_t>(width));
    pairwise_combine(partials.data(), nb, width, totals.data());
    const double inv_n = 1.0 / static_cast<double>(n);
    A_m.resize(d, s);
    A_v.resize(d, s * s);
    b_m.resize(d);
    b_v.resize(d);
    for (int a = 0; a < d; ++a) {
      for (int k = 0; k < s; ++k) A_m(a, k) = totals[static_cast<std::size_t>(a * s + k)] * inv_n;
      for (int k = 0; k < s * s; ++k)
        A_v(a, k) = totals[static_cast<std::size_t>(d * s + a * s * s + k)] * inv_n;
      b_m[a] = totals[static_cast<std::size_t>(d * s + d * s * s + a)] * inv_n;
      b_v[a] = totals[static_cast<std::size_t>(d * s + d * s * s + d + a)] * inv_n;
    }
  }

  Eigen::VectorXd shift_m, shift_v;
  if (stabilized) {
    shift_m = (0.5 * dt * inv_gm2) * (A_m * Hm_bar) + (0.25 * dt * inv_gm2) * b_m;
    shift_v = (dt / 3.0 * inv_gv2) * (A_v * hv_bar_flat) + (dt / 9.0 * inv_gv2) * b_v;
    if (stabilize_innovation) {
      shift_m += (0.5 * inv_gm2) * (A_m * innov_m);
      shift_v += (1.0 / 3.0 * inv_gv2) * (A_v * innov_v);
    }
  }

  // rms accumulators per block: sum |mean-block update|^2, |cov-block|^2, max|z|.
  std::vector<double> partials(static_cast<std::size_t>(nb * 2), 0.0);
  std::vector<double> maxima(static_cast<std::size_t>(nb), 0.0);
  BadIndex bad;
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * 2;
    double& mx = maxima[static_cast<std::size_t>(b)];
    double hm_full[kMaxDim], hm[kMaxDim], hv[kMaxDim * kMaxDim];
    for (std::int64_t i = lo; i < hi; ++i) {
      double* z = data + i * d;
      double dm = 0.0, dv = 0.0;  // squared block displacements
      if (!stabilized || !stabilize_innovation) {
        if (d == 3)
          observed_h<3>(rs, s, z, hm_full, hm, hv);
        else
          observed_h<0>(rs, s, z, hm_full, hm, hv);
      }
      if (stabilized) {
        double coef_m = 0.0, coef_v = 0.0;
        if (!stabilize_innovation) {
          double sm = 0.0, sv = 0.0;
          for (int k = 0; k < s; ++k) sm += (hm[k] - Hm_bar[k]) * innov_m[k];
          for (int k = 0; k < s * s; ++k)
            sv += (hv[k] - hv_bar_flat[k]) * innov_v[k];
          coef_m = 0.5 * sm * inv_gm2;
          coef_v = sv * inv_gv2 / 3.0;
        }
        for (int a = 0; a < d; ++a) {
          const double um = shift_m[a] + z[a] * coef_m;
          const double uv = shift_v[a] + z[a] * coef_v;
          z[a] += um + uv;
          dm += um * um;
          dv += uv * uv;
        }
        acc[0] += dm;
        acc[1] += dv;
      } else {
        double sm = 0.0, qm = 0.0, bm = 0.0;
        for (int k = 0; k < s; ++k) {
          const double hp = hm[k] - Hm_bar[k];
          sm += hp * innov_m[k];
          bm += hp * Hm_bar[k];
          qm += hp * hp;
        }
        double sv = 0.0, qv = 0.0, bv = 0.0;
        for (int k = 0; k < s * s; ++k) {
          const double hp = hv[k] - hv_bar_flat[k];
          sv += hp * innov_v[k];
          bv += hp * hv_bar_flat[k];
          qv += hp * hp;
        }
        const double coef_m = inv_gm2 * (0.5 * sm + 0.5 * dt * bm + 0.25 * dt * qm);
        const double coef_v = inv_gv2 * (sv / 3.0 + dt / 3.0 * bv + dt / 9.0 * qv);
        double norm2 = 0.0;
        for (int a = 0; a < d; ++a) norm2 += z[a] * z[a];
        dm = coef_m * coef_m * norm2;
        dv = coef_v * coef_v * norm2;
        const double scale = 1.0 + coef_m + coef_v;
        for (int a = 0; a < d; ++a) z[a] *= scale;
        acc[0] += dm;
        acc[1] += dv;
      }
      bool finite = true;
      for (int a = 0; a < d; ++a) {
        if (!std::isfinite(z[a])) finite = false;
        const double az = std::abs(z[a]);
        if (az > mx) mx = az;
      }
      if (!finite) bad.note(i);
    }
  });
  const std::int64_t bad_index = bad.value.load();
  if (bad_index >= 0) {
    std::ostringstream os;
    os << "analysis update produced non-finite sample (particle " << bad_index
       << ")";
    throw FilterDivergenceError(os.str(), t_context, step_context, bad_index);
  }
  if (diag) {
    std::vector<double> totals(2);
    pairwise_combine(partials.data(), nb, 2, totals.data());
    const double inv_n = 1.0 / static_cast<double>(n);
    diag->mean_block_rms = std::sqrt(totals[0] * inv_n);
    diag->cov_block_rms = std::sqrt(totals[1] * inv_n);
    double mx = 0.0;
    for (double m : maxima) mx = std::max(mx, m);
    diag->max_abs_state = mx;
  }
}

RunOutput run_filter(const ModelSpec& spec, const StatState& init,
                     const ObservationSeries& obs, const FilterConfig& cfg) {
  cfg.validate(spec.d);
  if (obs.s != cfg.s)
    throw ContractError("run_filter: observation series has different s");
  if (std::abs(obs.dt_obs - cfg.dt_obs) > 1e-12)
    throw ContractError("run_filter: observation series has different dt_obs");

  detail::DaLoopConfig dl;
  dl.dt = cfg.dt;
  dl.t_final = cfg.t_final;
  dl.epsilon_inv = cfg.epsilon_inv;
  dl.n_samples = cfg.n_samples;
  dl.seed = cfg.seed;
  dl.snapshot_times = cfg.snapshot_times;

  const int s = cfg.s;
  detail::AnalysisHook hook =
      [&](RowMatrixXd& particles, const Eigen::VectorXd& du_model,
          const Eigen::MatrixXd& dR_model, const Eigen::VectorXd& du_obs,
          const Eigen::MatrixXd& dR_obs, double dt_window, double t,
          std::int64_t step) {
        BlockMeans means = observation_means(spec, particles, s);
        Eigen::MatrixXd Hv_bar(s, s);
        for (int k = 0; k < s; ++k)
          for (int l = 0; l < s; ++l) Hv_bar(k, l) = means.Hv_bar_flat[k * s + l];
        UpdateDiagnostics diag;
        analysis_update(spec, particles, du_model.head(s),
                        dR_model.topLeftCorner(s, s), du_obs, dR_obs,
                        means.Hm_bar, Hv_bar, cfg.noise, dt_window,
                        cfg.stabilized, cfg.stabilize_innovation, &diag, t, step);
        return diag;
      };
  return detail::run_da_loop(spec, init, dl, &obs, hook, "highorder");
}

}  // namespace triadda

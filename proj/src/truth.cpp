#include "triadda/truth.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "kernels.hpp"
#include "triadda/errors.hpp"
#include "triadda/parallel.hpp"

namespace triadda {

namespace detail {

void stats_from_totals(const double* totals, int d, std::int64_t n,
                       Eigen::VectorXd& mean, Eigen::MatrixXd& cov, double& m3,
                       Eigen::MatrixXd* raw2_out) {
  const double inv_n = 1.0 / static_cast<double>(n);
  mean.resize(d);
  Eigen::MatrixXd raw2(d, d);
  int at = 0;
  for (int k = 0; k < d; ++k) mean[k] = totals[at++] * inv_n;
  for (int k = 0; k < d; ++k)
    for (int l = k; l < d; ++l) {
      raw2(k, l) = totals[at++] * inv_n;
      raw2(l, k) = raw2(k, l);
    }
  const double m3_raw = totals[at] * inv_n;
  cov = raw2 - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (d >= 3) {
    m3 = m3_raw - mean[0] * raw2(1, 2) - mean[1] * raw2(0, 2) -
         mean[2] * raw2(0, 1) + 2.0 * mean[0] * mean[1] * mean[2];
  } else {
    m3 = 0.0;
  }
  if (raw2_out) *raw2_out = raw2;
}

namespace {

// One RK4 + Euler-Maruyama step over a particle range, optionally fused with
// raw moment accumulation of the post-step state.
template <int DD>
void rk4_em_block(const RawSpec& s, double* data, std::int64_t lo,
                  std::int64_t hi, double dt, const double* sig_sqrt_dt,
                  ParticleRngs& rngs, double* stat_acc, BadIndex* bad) {
  const int d = DD > 0 ? DD : s.d;
  double u[kMaxDim], tmp[kMaxDim];
  double k1[kMaxDim], k2[kMaxDim], k3[kMaxDim], k4[kMaxDim];
  const double half = 0.5 * dt;
  const double sixth = dt / 6.0;
  for (std::int64_t i = lo; i < hi; ++i) {
    double* row = data + i * d;
    for (int k = 0; k < d; ++k) u[k] = row[k];
    drift_eval<DD>(s, u, k1);
    for (int k = 0; k < d; ++k) tmp[k] = u[k] + half * k1[k];
    drift_eval<DD>(s, tmp, k2);
    for (int k = 0; k < d; ++k) tmp[k] = u[k] + half * k2[k];
    drift_eval<DD>(s, tmp, k3);
    for (int k = 0; k < d; ++k) tmp[k] = u[k] + dt * k3[k];
    drift_eval<DD>(s, tmp, k4);
    NormalStream& stream = rngs.stream(i);
    for (int k = 0; k < d; ++k) {
      u[k] += sixth * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
      u[k] += sig_sqrt_dt[k] * stream.normal();
      row[k] = u[k];
    }
    if (bad && !row_finite<DD>(d, u)) bad->note(i);
    if (stat_acc) stat_accumulate<DD>(d, u, stat_acc);
  }
}

}  // namespace
}  // namespace detail

namespace {

using detail::BadIndex;
using detail::RawSpec;

void advance_truth(const ModelSpec& spec, RowMatrixXd& samples, double dt,
                   ParticleRngs& rngs, double* stat_totals, double t_next) {
  const RawSpec rs = detail::raw_view(spec);
  const int d = spec.d;
  if (d > detail::kMaxDim)
    throw ContractError("run_truth: state dimension exceeds integrator limit");
  std::vector<double> sig_sqrt_dt(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) sig_sqrt_dt[k] = spec.sigma[k] * std::sqrt(dt);

  const std::int64_t n = samples.rows();
  const int width = detail::stat_width(d);
  const std::int64_t nb = num_blocks(n);
  std::vector<double> partials;
  if (stat_totals) partials.assign(static_cast<std::size_t>(nb * width), 0.0);
  BadIndex bad;
  double* data = samples.data();
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = stat_totals ? partials.data() + b * width : nullptr;
    if (d == 3)
      detail::rk4_em_block<3>(rs, data, lo, hi, dt, sig_sqrt_dt.data(), rngs,
                              acc, &bad);
    else
      detail::rk4_em_block<0>(rs, data, lo, hi, dt, sig_sqrt_dt.data(), rngs,
                              acc, &bad);
  });
  const std::int64_t bad_index = bad.value.load();
  if (bad_index >= 0) {
    std::ostringstream os;
    os << "truth integration diverged at t = " << t_next << " (particle "
       << bad_index << ")";
    throw DivergenceError(os.str(), t_next, bad_index);
  }
  if (stat_totals) pairwise_combine(partials.data(), nb, width, stat_totals);
}

}  // namespace

EnsembleState step_rk4_em(const ModelSpec& spec, EnsembleState state, double dt,
                          ParticleRngs& rng) {
  if (!(dt > 0.0)) throw ContractError("step_rk4_em: dt must be positive");
  if (state.samples.cols() != spec.d)
    throw ContractError("step_rk4_em: sample dimension mismatch");
  advance_truth(spec, state.samples, dt, rng, nullptr, state.t + dt);
  state.t += dt;
  return state;
}

TruthSeries run_truth(const ModelSpec& spec, const Eigen::VectorXd& init_mean,
                      const Eigen::VectorXd& init_var, double dt, double T,
                      std::int64_t n_mc, std::uint64_t seed,
                      const std::vector<double>& snapshot_times) {
  const int d = spec.d;
  if (init_mean.size() != d || init_var.size() != d)
    throw ContractError("run_truth: initial moments must have size d");
  if ((init_var.array() < 0.0).any())
    throw ContractError("run_truth: initial variances must be nonnegative");
  if (n_mc < 100) throw ContractError("run_truth: need at least 100 particles");
  if (!(dt > 0.0)) throw ContractError("run_truth: dt must be positive");
  const std::int64_t steps = std::llround(T / dt);
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - T) > 0.5 * dt)
    throw ContractError("run_truth: T must be an integer multiple of dt");

  RowMatrixXd samples(n_mc, d);
  ParticleRngs rngs(seed, n_mc);
  std::vector<double> sd(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) sd[k] = std::sqrt(init_var[k]);
  for_each_block(n_mc, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      NormalStream& stream = rngs.stream(i);
      for (int k = 0; k < d; ++k)
        samples(i, k) = init_mean[k] + sd[k] * stream.normal();
    }
  });

  TruthSeries out;
  StatSeries& st = out.stats;
  st.dt = dt;
  st.times.resize(static_cast<std::size_t>(steps) + 1);
  st.mean.resize(steps + 1, d);
  st.cov_flat.resize(steps + 1, d * d);
  st.m3.resize(static_cast<std::size_t>(steps) + 1);

  const int width = detail::stat_width(d);
  std::vector<double> totals(static_cast<std::size_t>(width));
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double m3 = 0.0;

  auto record = [&](std::int64_t step_index) {
    st.times[static_cast<std::size_t>(step_index)] = static_cast<double>(step_index) * dt;
    st.mean.row(step_index) = mean.transpose();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) st.cov_flat(step_index, a * d + b) = cov(a, b);
    st.m3[static_cast<std::size_t>(step_index)] = m3;
  };
  auto snapshot_check = [&](double t) {
    for (double want : snapshot_times)
      if (std::abs(t - want) <= 0.5 * dt && !out.snapshots.count(want))
        out.snapshots.emplace(want, samples);
  };

  {
    // Initial statistics from a plain (non-fused) pass.
    const std::int64_t nb = num_blocks(n_mc);
    std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
    const double* data = samples.data();
    for_each_block(n_mc, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
      double* acc = partials.data() + b * width;
      for (std::int64_t i = lo; i < hi; ++i)
        detail::stat_accumulate<0>(d, data + i * d, acc);
    });
    pairwise_combine(partials.data(), nb, width, totals.data());
  }
  detail::stats_from_totals(totals.data(), d, n_mc, mean, cov, m3);
  record(0);
  snapshot_check(0.0);

  for (std::int64_t n = 0; n < steps; ++n) {
    const double t_next = static_cast<double>(n + 1) * dt;
    advance_truth(spec, samples, dt, rngs, totals.data(), t_next);
    detail::stats_from_totals(totals.data(), d, n_mc, mean, cov, m3);
    record(n + 1);
    snapshot_check(t_next);
  }
  return out;
}

}  // namespace triadda

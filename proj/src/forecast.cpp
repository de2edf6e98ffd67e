#include "triadda/forecast.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

#include "da_loop.hpp"
#include "kernels.hpp"
#include "triadda/errors.hpp"
#include "triadda/parallel.hpp"

namespace triadda {

Eigen::VectorXd h_m(const ModelSpec& spec, const StatState& stat) {
  if (stat.u_bar.size() != spec.d)
    throw ContractError("h_m: u_bar must have size d");
  return spec.Lambda * stat.u_bar + bilinear_B(spec, stat.u_bar, stat.u_bar) +
         spec.F;
}

Eigen::MatrixXd h_v(const ModelSpec& spec, const StatState& stat) {
  if (stat.R.rows() != spec.d || stat.R.cols() != spec.d)
    throw ContractError("h_v: R must be d x d");
  const RowMatrixXd L = mean_coupling_L(spec, stat.u_bar);
  const Eigen::MatrixXd A = L * stat.R;
  return A + A.transpose() + Eigen::MatrixXd(spec.Q_sigma);
}

namespace detail {

Eigen::VectorXd apply_gamma(const ModelSpec& spec, const Eigen::MatrixXd& M) {
  const int d = spec.d;
  Eigen::VectorXd out(d);
  for (int k = 0; k < d; ++k) {
    double acc = 0.0;
    const double* g = &spec.gamma[static_cast<std::size_t>(k) * d * d];
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) acc += g[m * d + n] * M(m, n);
    out[k] = acc;
  }
  return out;
}

namespace {

// Contribution layout: [raw stats | upper triangle of E^N H^v].
inline int forecast_width(int d) { return stat_width(d) + d * (d + 1) / 2; }

template <int DD>
void forecast_block(const RawSpec& s, double* data, std::int64_t lo,
                    std::int64_t hi, double dt, const double* L,
                    const double* gR, const double* sig_sqrt_dt,
                    ParticleRngs* rngs, double* acc, BadIndex* bad) {
  const int d = DD > 0 ? DD : s.d;
  double z[kMaxDim], hm[kMaxDim], dz[kMaxDim];
  for (std::int64_t i = lo; i < hi; ++i) {
    double* row = data + i * d;
    for (int k = 0; k < d; ++k) z[k] = row[k];
    h_m_eval<DD>(s, z, hm);
    if (acc) {
      stat_accumulate<DD>(d, z, acc);
      double* hv = acc + stat_width(d);
      int at = 0;
      for (int k = 0; k < d; ++k)
        for (int l = k; l < d; ++l) hv[at++] += hm[k] * z[l] + hm[l] * z[k];
    }
    if (rngs) {
      for (int k = 0; k < d; ++k) {
        const double* lrow = L + k * d;
        double a = hm[k] - gR[k];
        for (int l = 0; l < d; ++l) a += lrow[l] * z[l];
        dz[k] = a;
      }
      NormalStream& stream = rngs->stream(i);
      for (int k = 0; k < d; ++k) {
        z[k] += dt * dz[k] + sig_sqrt_dt[k] * stream.normal();
        row[k] = z[k];
      }
      if (bad && !row_finite<DD>(d, z)) bad->note(i);
    }
  }
}

void decode_stats(const ModelSpec& spec, const double* totals, std::int64_t n,
                  StepStats& out) {
  const int d = spec.d;
  stats_from_totals(totals, d, n, out.mean_z, out.raw2, out.m3, nullptr);
  // stats_from_totals returns the covariance; re-derive the raw second moment.
  out.raw2 += out.mean_z * out.mean_z.transpose();
  out.raw2 = 0.5 * (out.raw2 + out.raw2.transpose()).eval();
  const double* hv = totals + stat_width(d);
  out.mean_Hv.resize(d, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  int at = 0;
  for (int k = 0; k < d; ++k)
    for (int l = k; l < d; ++l) {
      out.mean_Hv(k, l) = hv[at++] * inv_n;
      out.mean_Hv(l, k) = out.mean_Hv(k, l);
    }
}

void forecast_pass(const ModelSpec& spec, RowMatrixXd& particles,
                   const StatState* stat, double dt, ParticleRngs* rngs,
                   StepStats& stats, double t_next) {
  const int d = spec.d;
  if (d > kMaxDim)
    throw ContractError("forecast: state dimension exceeds integrator limit");
  const RawSpec rs = raw_view(spec);
  const std::int64_t n = particles.rows();
  const int width = forecast_width(d);
  const std::int64_t nb = num_blocks(n);
  std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);

  RowMatrixXd L;
  Eigen::VectorXd gR;
  std::vector<double> sig_sqrt_dt;
  if (rngs) {
    L = mean_coupling_L(spec, stat->u_bar);
    gR = apply_gamma(spec, stat->R);
    sig_sqrt_dt.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) sig_sqrt_dt[k] = spec.sigma[k] * std::sqrt(dt);
  }
  BadIndex bad;
  double* data = particles.data();
  const double* Lp = rngs ? L.data() : nullptr;
  const double* gRp = rngs ? gR.data() : nullptr;
  const double* sp = rngs ? sig_sqrt_dt.data() : nullptr;
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * width;
    if (d == 3)
      forecast_block<3>(rs, data, lo, hi, dt, Lp, gRp, sp, rngs, acc, &bad);
    else
      forecast_block<0>(rs, data, lo, hi, dt, Lp, gRp, sp, rngs, acc, &bad);
  });
  const std::int64_t bad_index = bad.value.load();
  if (bad_index >= 0) {
    std::ostringstream os;
    os << "forecast diverged at t = " << t_next << " (particle " << bad_index
       << ")";
    throw DivergenceError(os.str(), t_next, bad_index);
  }
  std::vector<double> totals(static_cast<std::size_t>(width));
  pairwise_combine(partials.data(), nb, width, totals.data());
  decode_stats(spec, totals.data(), n, stats);
}

RowMatrixXd init_fluctuations(const ModelSpec& spec, const Eigen::MatrixXd& R0,
                              std::int64_t n, ParticleRngs& rngs) {
  const int d = spec.d;
  bool diagonal = true;
  for (int a = 0; a < d && diagonal; ++a)
    for (int b = 0; b < d; ++b)
      if (a != b && R0(a, b) != 0.0) {
        diagonal = false;
        break;
      }
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(d, d);
  if (diagonal) {
    for (int a = 0; a < d; ++a) {
      if (R0(a, a) < 0.0)
        throw ContractError("initial covariance has negative variance");
      chol(a, a) = std::sqrt(R0(a, a));
    }
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(R0);
    if (llt.info() != Eigen::Success)
      throw ContractError("initial covariance is not positive definite");
    chol = llt.matrixL();
  }
  RowMatrixXd z(n, d);
  for_each_block(n, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    double xi[kMaxDim];
    for (std::int64_t i = lo; i < hi; ++i) {
      NormalStream& stream = rngs.stream(i);
      for (int k = 0; k < d; ++k) xi[k] = stream.normal();
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b <= a; ++b) acc += chol(a, b) * xi[b];
        z(i, a) = acc;
      }
    }
  });
  return z;
}

}  // namespace

void measure_stats(const ModelSpec& spec, const RowMatrixXd& particles,
                   StepStats& out) {
  RowMatrixXd& mutable_particles = const_cast<RowMatrixXd&>(particles);
  forecast_pass(spec, mutable_particles, nullptr, 0.0, nullptr, out, 0.0);
}

void advance_particles(const ModelSpec& spec, RowMatrixXd& particles,
                       const StatState& stat, double dt, ParticleRngs& rngs,
                       StepStats& stats, double t_next) {
  forecast_pass(spec, particles, &stat, dt, &rngs, stats, t_next);
}

RunOutput run_da_loop(const ModelSpec& spec, const StatState& init,
                      const DaLoopConfig& cfg, const ObservationSeries* obs,
                      const AnalysisHook& hook, const char* method_name) {
  const int d = spec.d;
  if (init.u_bar.size() != d || init.R.rows() != d || init.R.cols() != d)
    throw ContractError("run: initial state dimension mismatch");
  if (cfg.n_samples < 2) throw ContractError("run: need at least 2 samples");
  if (!(cfg.dt > 0.0)) throw ContractError("run: dt must be positive");
  const std::int64_t steps = std::llround(cfg.t_final / cfg.dt);
  if (steps < 1 ||
      std::abs(static_cast<double>(steps) * cfg.dt - cfg.t_final) > 0.5 * cfg.dt)
    throw ContractError("run: t_final must be an integer multiple of dt");

  std::int64_t k_obs = 0;
  if (obs) {
    const double ratio = obs->dt_obs / cfg.dt;
    k_obs = std::llround(ratio);
    if (k_obs < 1 || std::abs(ratio - static_cast<double>(k_obs)) > 1e-9)
      throw ContractError("run: dt_obs must be an integer multiple of dt");
    const std::int64_t n_events = steps / k_obs;
    if (static_cast<std::int64_t>(obs->size()) < n_events)
      throw ContractError("run: observation series does not cover [0, T]");
    if (obs->s < 1 || obs->s > d)
      throw ContractError("run: observed mode count out of range");
  }

  RunOutput out;
  out.method = method_name;
  StatSeries& st = out.stats;
  st.dt = cfg.dt;
  st.times.resize(static_cast<std::size_t>(steps) + 1);
  st.mean.resize(steps + 1, d);
  st.cov_flat.resize(steps + 1, d * d);
  st.m3.resize(static_cast<std::size_t>(steps) + 1);

  ParticleRngs rngs(cfg.seed, cfg.n_samples);
  Eigen::MatrixXd R = 0.5 * (init.R + init.R.transpose());
  RowMatrixXd particles = init_fluctuations(spec, R, cfg.n_samples, rngs);
  Eigen::VectorXd u_bar = init.u_bar;

  Eigen::VectorXd du_acc = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd dR_acc = Eigen::MatrixXd::Zero(d, d);

  auto record = [&](std::int64_t idx, double t, double m3) {
    st.times[static_cast<std::size_t>(idx)] = t;
    st.mean.row(idx) = u_bar.transpose();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) st.cov_flat(idx, a * d + b) = R(a, b);
    st.m3[static_cast<std::size_t>(idx)] = m3;
  };
  auto snapshot_check = [&](double t) {
    for (double want : cfg.snapshot_times)
      if (std::abs(t - want) <= 0.5 * cfg.dt && !out.snapshots.count(want)) {
        RowMatrixXd composed = particles;
        composed.rowwise() += u_bar.transpose();
        out.snapshots.emplace(want, std::move(composed));
      }
  };

  StepStats ss;
  for (std::int64_t n = 0; n < steps; ++n) {
    const double t_n = static_cast<double>(n) * cfg.dt;
    const double t_next = static_cast<double>(n + 1) * cfg.dt;
    snapshot_check(t_n);
    StatState cur{u_bar, R};
    advance_particles(spec, particles, cur, cfg.dt, rngs, ss, t_next);
    record(n, t_n, ss.m3);

    const Eigen::VectorXd rhs_m = h_m(spec, cur) + apply_gamma(spec, ss.raw2);
    Eigen::MatrixXd rhs_R = h_v(spec, cur) + ss.mean_Hv;
    if (cfg.epsilon_inv != 0.0) rhs_R += cfg.epsilon_inv * (ss.raw2 - R);
    u_bar += cfg.dt * rhs_m;
    R += cfg.dt * rhs_R;
    R = 0.5 * (R + R.transpose()).eval();
    if (!u_bar.allFinite() || !R.allFinite())
      throw DivergenceError("statistical state diverged", t_next, -1);
    du_acc += cfg.dt * rhs_m;
    dR_acc += cfg.dt * rhs_R;

    if (obs && (n + 1) % k_obs == 0) {
      const std::int64_t j = (n + 1) / k_obs - 1;
      UpdateDiagnostics diag = hook(
          particles, du_acc, dR_acc, obs->d_ubar_at(static_cast<std::size_t>(j)),
          obs->d_R_at(static_cast<std::size_t>(j)),
          static_cast<double>(k_obs) * cfg.dt, t_next, n + 1);
      diag.t = t_next;
      if (!std::isfinite(diag.max_abs_state) ||
          diag.max_abs_state > cfg.guard_threshold) {
        std::ostringstream os;
        os << out.method << " update diverged at t = " << t_next
           << " (max |Z| = " << diag.max_abs_state << ")";
        throw FilterDivergenceError(os.str(), t_next, n + 1, -1);
      }
      out.diagnostics.push_back(diag);
      du_acc.setZero();
      dR_acc.setZero();
    }
  }
  measure_stats(spec, particles, ss);
  record(steps, static_cast<double>(steps) * cfg.dt, ss.m3);
  snapshot_check(static_cast<double>(steps) * cfg.dt);
  return out;
}

}  // namespace detail

std::pair<StatState, EnsembleState> step_forecast(const ModelSpec& spec,
                                                  const StatState& stat,
                                                  const EnsembleState& ens,
                                                  const ForecastConfig& cfg,
                                                  ParticleRngs& rng) {
  if (ens.samples.rows() != cfg.n_samples)
    throw ContractError("step_forecast: ensemble size differs from config");
  if (ens.samples.cols() != spec.d)
    throw ContractError("step_forecast: sample dimension mismatch");
  EnsembleState next{ens.t + cfg.dt, ens.samples};
  detail::StepStats ss;
  detail::advance_particles(spec, next.samples, stat, cfg.dt, rng, ss, next.t);
  StatState out;
  out.u_bar = stat.u_bar + cfg.dt * (h_m(spec, stat) +
                                     detail::apply_gamma(spec, ss.raw2));
  Eigen::MatrixXd rhs_R = h_v(spec, stat) + ss.mean_Hv;
  if (cfg.epsilon_inv != 0.0) rhs_R += cfg.epsilon_inv * (ss.raw2 - stat.R);
  out.R = stat.R + cfg.dt * rhs_R;
  out.R = 0.5 * (out.R + out.R.transpose()).eval();
  return {std::move(out), std::move(next)};
}

RunOutput run_forecast(const ModelSpec& spec, const StatState& init,
                       const ForecastConfig& cfg, double T,
                       const std::vector<double>& snapshot_times) {
  detail::DaLoopConfig dl;
  dl.dt = cfg.dt;
  dl.t_final = T;
  dl.epsilon_inv = cfg.epsilon_inv;
  dl.n_samples = cfg.n_samples;
  dl.seed = cfg.seed;
  dl.snapshot_times = snapshot_times;
  return detail::run_da_loop(spec, init, dl, nullptr, nullptr, "none");
}

}  // namespace triadda

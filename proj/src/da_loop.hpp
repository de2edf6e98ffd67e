#pragma once

// Internal driver shared by the plain forecast, the high-order filter and the
// EnKF baseline: the coupled forecast loop with an optional analysis hook
// fired at observation instants.

#include <functional>
#include <vector>

#include "triadda/forecast.hpp"
#include "triadda/observation.hpp"
#include "triadda/series.hpp"

namespace triadda::detail {

// Empirical statistics of the pre-step ensemble gathered during a fused
// advance pass.
struct StepStats {
  Eigen::VectorXd mean_z;   // E^N[Z]
  Eigen::MatrixXd raw2;     // E^N[Z Z^T]
  Eigen::MatrixXd mean_Hv;  // E^N[H^v(Z)] over all d modes
  double m3 = 0.0;          // centered triple product
};

// out_k = sum_{m,n} gamma_kmn M(m,n).
Eigen::VectorXd apply_gamma(const ModelSpec& spec, const Eigen::MatrixXd& M);

// Measure StepStats without advancing.
void measure_stats(const ModelSpec& spec, const RowMatrixXd& particles,
                   StepStats& out);

// Advance particles one Euler-Maruyama step of the conditional SDE
// dZ = [L(u_bar) Z + Q_v(Z x Z - R)] dt + sigma dW, filling `stats` from the
// pre-step ensemble.  Throws DivergenceError on non-finite results.
void advance_particles(const ModelSpec& spec, RowMatrixXd& particles,
                       const StatState& stat, double dt, ParticleRngs& rngs,
                       StepStats& stats, double t_next);

struct DaLoopConfig {
  double dt = 1e-3;
  double t_final = 10.0;
  double epsilon_inv = 0.1;
  std::int64_t n_samples = 100;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times = {5.0};
  double guard_threshold = 1e6;  // |Z| beyond this aborts a DA run
};

// Analysis hook applied at observation instants.  Receives the prior
// particles, the model increments accumulated over the window (full d), the
// observed increments (s block), the window length, time and step index.
using AnalysisHook = std::function<UpdateDiagnostics(
    RowMatrixXd& particles, const Eigen::VectorXd& du_model,
    const Eigen::MatrixXd& dR_model, const Eigen::VectorXd& du_obs,
    const Eigen::MatrixXd& dR_obs, double dt_window, double t,
    std::int64_t step)>;

RunOutput run_da_loop(const ModelSpec& spec, const StatState& init,
                      const DaLoopConfig& cfg, const ObservationSeries* obs,
                      const AnalysisHook& hook, const char* method_name);

}  // namespace triadda::detail

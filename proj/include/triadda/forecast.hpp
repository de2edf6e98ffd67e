#pragma once

#include <cstdint>
#include <vector>

#include "triadda/model.hpp"
#include "triadda/rng.hpp"
#include "triadda/series.hpp"
#include "triadda/truth.hpp"

namespace triadda {

// Statistical state of the coupled stochastic-statistical model.
struct StatState {
  Eigen::VectorXd u_bar;
  Eigen::MatrixXd R;
};

struct ForecastConfig {
  double dt = 1e-3;
  double epsilon_inv = 0.1;  // relaxation strength in the covariance equation
  std::int64_t n_samples = 100;
  std::uint64_t seed = 0;
};

// Deterministic part of the mean equation: Lambda u_bar + B(u_bar, u_bar) + F.
Eigen::VectorXd h_m(const ModelSpec& spec, const StatState& stat);

// Deterministic part of the covariance equation:
// L(u_bar) R + R L(u_bar)^T + Q_sigma.
Eigen::MatrixXd h_v(const ModelSpec& spec, const StatState& stat);

// One forward-Euler step of the coupled system.  All right-hand sides are
// evaluated at the pre-step state: the mean picks up the empirical H^m
// feedback, the covariance the H^v feedback plus the relaxation term
// epsilon_inv (E^N[Z Z^T] - R), and every particle follows the conditional
// linear-plus-quadratic flow with fresh noise.
std::pair<StatState, EnsembleState> step_forecast(const ModelSpec& spec,
                                                  const StatState& stat,
                                                  const EnsembleState& ens,
                                                  const ForecastConfig& cfg,
                                                  ParticleRngs& rng);

// Full forecast run without data assimilation.  Particles start i.i.d.
// N(0, R0); the recorded mean/covariance are the statistical states, M3 the
// centered particle triple product, snapshots the composed samples
// u_bar + Z^i.
RunOutput run_forecast(const ModelSpec& spec, const StatState& init,
                       const ForecastConfig& cfg, double T,
                       const std::vector<double>& snapshot_times = {5.0});

}  // namespace triadda

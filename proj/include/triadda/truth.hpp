#pragma once

#include <cstdint>
#include <vector>

#include "triadda/model.hpp"
#include "triadda/rng.hpp"
#include "triadda/series.hpp"

namespace triadda {

struct EnsembleState {
  double t = 0.0;
  RowMatrixXd samples;  // N x d, one particle per row

  std::int64_t size() const { return samples.rows(); }
};

// Advance every particle of the original SDE by one step: RK4 on the drift
// Lambda u + B(u,u) + F followed by the Euler-Maruyama noise increment
// sigma sqrt(dt) xi.  Throws DivergenceError when a particle goes non-finite.
EnsembleState step_rk4_em(const ModelSpec& spec, EnsembleState state, double dt,
                          ParticleRngs& rng);

// Large-ensemble direct Monte-Carlo reference run.  Particles start i.i.d.
// Gaussian with the given mean and diagonal variance; mean/covariance/M3 are
// recorded every step and raw sample snapshots at the requested times.
TruthSeries run_truth(const ModelSpec& spec, const Eigen::VectorXd& init_mean,
                      const Eigen::VectorXd& init_var, double dt, double T,
                      std::int64_t n_mc, std::uint64_t seed,
                      const std::vector<double>& snapshot_times = {5.0});

}  // namespace triadda

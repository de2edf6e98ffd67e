#pragma once

#include <map>
#include <string>
#include <vector>

#include "triadda/model.hpp"

namespace triadda {

// Time series of predicted statistics on a uniform grid.  cov_flat stores the
// full d x d matrix row-major per time entry; CSV output keeps only the upper
// triangle.
struct StatSeries {
  double dt = 0.0;
  std::vector<double> times;
  RowMatrixXd mean;      // T x d
  RowMatrixXd cov_flat;  // T x d*d
  std::vector<double> m3;

  int dim() const { return static_cast<int>(mean.cols()); }
  std::size_t size() const { return times.size(); }
  Eigen::VectorXd mean_at(std::size_t i) const { return mean.row(static_cast<Eigen::Index>(i)); }
  Eigen::MatrixXd cov_at(std::size_t i) const {
    const int d = dim();
    Eigen::MatrixXd c(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        c(a, b) = cov_flat(static_cast<Eigen::Index>(i), a * d + b);
    return c;
  }
  Eigen::VectorXd variance_at(std::size_t i) const {
    const int d = dim();
    Eigen::VectorXd v(d);
    for (int a = 0; a < d; ++a) v[a] = cov_flat(static_cast<Eigen::Index>(i), a * d + a);
    return v;
  }
};

using SnapshotMap = std::map<double, RowMatrixXd>;

struct TruthSeries {
  StatSeries stats;
  SnapshotMap snapshots;  // time -> N x d sample matrix
};

// Per-observation-event diagnostics of a filtering run.
struct UpdateDiagnostics {
  double t = 0.0;
  double mean_block_rms = 0.0;  // rms particle displacement from the mean block
  double cov_block_rms = 0.0;
  double max_abs_state = 0.0;
};

struct RunOutput {
  std::string method;  // "highorder" | "enkf" | "none"
  StatSeries stats;
  SnapshotMap snapshots;  // composed state samples u = u_bar + Z
  std::vector<UpdateDiagnostics> diagnostics;
};

}  // namespace triadda

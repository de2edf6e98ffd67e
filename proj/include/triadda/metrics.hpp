#pragma once

#include <vector>

#include "triadda/model.hpp"
#include "triadda/series.hpp"

namespace triadda {

// Root of the time-and-component averaged squared error between two aligned
// series (rows = times).  Throws AlignmentError on shape mismatch.
double rmse_series(const RowMatrixXd& pred, const RowMatrixXd& truth);

// RMSE of the mean / per-mode variance series of two runs.  Finer grids are
// subsampled when the steps differ by an integer ratio.
double rmse_mean(const StatSeries& pred, const StatSeries& truth);
double rmse_variance(const StatSeries& pred, const StatSeries& truth);

enum class RelEntropyMethod { gaussian, histogram };

struct RelEntropy {
  double value = 0.0;
  bool regularized = false;  // a degenerate variance was floored
};

// KL divergence of the truth sample distribution from the model sample
// distribution.  gaussian: closed form between moment-matched Gaussians,
// summed over the 1-D marginals.  histogram: discrete KL on a shared per-mode
// grid with additive regularization against empty bins.
RelEntropy relative_entropy(const RowMatrixXd& truth_samples,
                            const RowMatrixXd& model_samples,
                            RelEntropyMethod method = RelEntropyMethod::gaussian);

// Centered triple-product series recorded with the run.
std::vector<double> m3_series(const RunOutput& run);

double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b);

}  // namespace triadda

#include "triadda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "triadda/errors.hpp"

namespace triadda {

namespace {

// Subsample the finer of the two series so both live on the coarser grid.
// Returns the stride pair (stride_a, stride_b).
std::pair<std::int64_t, std::int64_t> common_grid(const StatSeries& a,
                                                  const StatSeries& b) {
  if (!(a.dt > 0.0) || !(b.dt > 0.0))
    throw AlignmentError("series without a time step");
  double ratio = a.dt >= b.dt ? a.dt / b.dt : b.dt / a.dt;
  const std::int64_t stride = std::llround(ratio);
  if (std::abs(ratio - static_cast<double>(stride)) > 1e-9)
    throw AlignmentError("time steps are not integer multiples");
  const std::int64_t sa = a.dt >= b.dt ? 1 : stride;
  const std::int64_t sb = a.dt >= b.dt ? stride : 1;
  const std::int64_t na = (static_cast<std::int64_t>(a.size()) - 1) / sa;
  const std::int64_t nb = (static_cast<std::int64_t>(b.size()) - 1) / sb;
  if (na != nb) throw AlignmentError("series cover different time windows");
  return {sa, sb};
}

}  // namespace

double rmse_series(const RowMatrixXd& pred, const RowMatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw AlignmentError("rmse_series: shape mismatch");
  if (pred.size() == 0) throw AlignmentError("rmse_series: empty series");
  const double sq = (pred - truth).squaredNorm() /
                    static_cast<double>(pred.rows() * pred.cols());
  return std::sqrt(sq);
}

double rmse_mean(const StatSeries& pred, const StatSeries& truth) {
  auto [sp, st] = common_grid(pred, truth);
  const std::int64_t n = (static_cast<std::int64_t>(pred.size()) - 1) / sp + 1;
  const int d = pred.dim();
  if (truth.dim() != d) throw AlignmentError("rmse_mean: dimension mismatch");
  RowMatrixXd a(n, d), b(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    a.row(i) = pred.mean.row(i * sp);
    b.row(i) = truth.mean.row(i * st);
  }
  return rmse_series(a, b);
}

double rmse_variance(const StatSeries& pred, const StatSeries& truth) {
  auto [sp, st] = common_grid(pred, truth);
  const std::int64_t n = (static_cast<std::int64_t>(pred.size()) - 1) / sp + 1;
  const int d = pred.dim();
  if (truth.dim() != d) throw AlignmentError("rmse_variance: dimension mismatch");
  RowMatrixXd a(n, d), b(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      a(i, k) = pred.cov_flat(i * sp, k * d + k);
      b(i, k) = truth.cov_flat(i * st, k * d + k);
    }
  }
  return rmse_series(a, b);
}

namespace {

constexpr double kVarFloor = 1e-10;
constexpr int kHistBins = 20;

RelEntropy gaussian_marginal_kl(const RowMatrixXd& p, const RowMatrixXd& q) {
  const int d = static_cast<int>(p.cols());
  RelEntropy out;
  for (int k = 0; k < d; ++k) {
    const double m1 = p.col(k).mean();
    const double m2 = q.col(k).mean();
    double v1 = (p.col(k).array() - m1).square().mean();
    double v2 = (q.col(k).array() - m2).square().mean();
    if (v1 < kVarFloor) {
      v1 += kVarFloor;
      out.regularized = true;
    }
    if (v2 < kVarFloor) {
      v2 += kVarFloor;
      out.regularized = true;
    }
    out.value +=
        0.5 * (v1 / v2 - 1.0 - std::log(v1 / v2) + (m2 - m1) * (m2 - m1) / v2);
  }
  return out;
}

RelEntropy histogram_kl(const RowMatrixXd& p, const RowMatrixXd& q) {
  const int d = static_cast<int>(p.cols());
  RelEntropy out;
  for (int k = 0; k < d; ++k) {
    const double lo = std::min(p.col(k).minCoeff(), q.col(k).minCoeff());
    const double hi = std::max(p.col(k).maxCoeff(), q.col(k).maxCoeff());
    double span = hi - lo;
    if (span <= 0) {
      out.regularized = true;
      continue;
    }
    std::vector<double> cp(kHistBins, 0.0), cq(kHistBins, 0.0);
    auto bin_of = [&](double x) {
      int b = static_cast<int>((x - lo) / span * kHistBins);
      return std::clamp(b, 0, kHistBins - 1);
    };
    for (Eigen::Index i = 0; i < p.rows(); ++i) cp[static_cast<std::size_t>(bin_of(p(i, k)))] += 1.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) cq[static_cast<std::size_t>(bin_of(q(i, k)))] += 1.0;
    const double np = static_cast<double>(p.rows());
    const double nq = static_cast<double>(q.rows());
    // Additive mass 1/(M*bins) keeps empty model bins off the log singularity.
    const double reg = 1.0 / (nq * kHistBins);
    double qnorm = 0.0;
    for (int b = 0; b < kHistBins; ++b) qnorm += cq[static_cast<std::size_t>(b)] / nq + reg;
    for (int b = 0; b < kHistBins; ++b) {
      const double pb = cp[static_cast<std::size_t>(b)] / np;
      if (pb <= 0) continue;
      const double qb = (cq[static_cast<std::size_t>(b)] / nq + reg) / qnorm;
      out.value += pb * std::log(pb / qb);
    }
  }
  return out;
}

}  // namespace

RelEntropy relative_entropy(const RowMatrixXd& truth_samples,
                            const RowMatrixXd& model_samples,
                            RelEntropyMethod method) {
  if (truth_samples.rows() < 10 || model_samples.rows() < 10)
    throw ContractError("relative_entropy: need at least 10 samples per set");
  if (truth_samples.cols() != model_samples.cols())
    throw ContractError("relative_entropy: dimension mismatch");
  return method == RelEntropyMethod::gaussian
             ? gaussian_marginal_kl(truth_samples, model_samples)
             : histogram_kl(truth_samples, model_samples);
}

std::vector<double> m3_series(const RunOutput& run) { return run.stats.m3; }

double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw AlignmentError("pearson_correlation: size mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace triadda

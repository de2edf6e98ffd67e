#include "triadda/moments.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#include "triadda/errors.hpp"
#include "triadda/parallel.hpp"

namespace triadda {

namespace {
int threads_setting = 0;

void pairwise_range(const double* partials, std::int64_t b0, std::int64_t b1,
                    int width, double* out) {
  if (b1 - b0 == 1) {
    std::memcpy(out, partials + b0 * width, sizeof(double) * width);
    return;
  }
  const std::int64_t mid = b0 + (b1 - b0) / 2;
  std::vector<double> right(static_cast<std::size_t>(width));
  pairwise_range(partials, b0, mid, width, out);
  pairwise_range(partials, mid, b1, width, right.data());
  for (int i = 0; i < width; ++i) out[i] += right[i];
}
}  // namespace

int num_threads() { return threads_setting; }
void set_num_threads(int n) { threads_setting = n < 0 ? 0 : n; }

void pairwise_combine(const double* partials, std::int64_t nblocks, int width,
                      double* out) {
  if (nblocks == 0) {
    std::memset(out, 0, sizeof(double) * width);
    return;
  }
  pairwise_range(partials, 0, nblocks, width, out);
}

namespace {

// One-pass raw sums: z (d), upper triangle of z z^T (d(d+1)/2), z1 z2 z3.
void raw_sums(const RowMatrixXd& samples, Eigen::VectorXd& mean,
              Eigen::MatrixXd& raw2, double& m3_raw) {
  const std::int64_t n = samples.rows();
  const int d = static_cast<int>(samples.cols());
  const int tri = d * (d + 1) / 2;
  const int width = d + tri + 1;
  const std::int64_t nb = num_blocks(n);
  std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
  const double* data = samples.data();
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * width;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double* z = data + i * d;
      int at = 0;
      for (int k = 0; k < d; ++k) acc[at++] += z[k];
      for (int k = 0; k < d; ++k)
        for (int l = k; l < d; ++l) acc[at++] += z[k] * z[l];
      acc[at] += (d >= 3) ? z[0] * z[1] * z[2] : 0.0;
    }
  });
  std::vector<double> total(static_cast<std::size_t>(width));
  pairwise_combine(partials.data(), nb, width, total.data());
  const double inv_n = 1.0 / static_cast<double>(n);
  mean.resize(d);
  raw2.resize(d, d);
  int at = 0;
  for (int k = 0; k < d; ++k) mean[k] = total[at++] * inv_n;
  for (int k = 0; k < d; ++k)
    for (int l = k; l < d; ++l) {
      raw2(k, l) = total[at++] * inv_n;
      raw2(l, k) = raw2(k, l);
    }
  m3_raw = total[at] * inv_n;
}

}  // namespace

void basic_moments(const RowMatrixXd& samples, Eigen::VectorXd& mean,
                   Eigen::MatrixXd& cov, double& m3) {
  Eigen::MatrixXd raw2;
  double m3_raw = 0.0;
  raw_sums(samples, mean, raw2, m3_raw);
  cov = raw2 - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (samples.cols() >= 3) {
    // E[(z1-m1)(z2-m2)(z3-m3)] expanded in raw moments.
    m3 = m3_raw - mean[0] * raw2(1, 2) - mean[1] * raw2(0, 2) -
         mean[2] * raw2(0, 1) + 2.0 * mean[0] * mean[1] * mean[2];
  } else {
    m3 = 0.0;
  }
}

Eigen::MatrixXd second_moment(const RowMatrixXd& samples) {
  Eigen::VectorXd mean;
  Eigen::MatrixXd raw2;
  double m3_raw = 0.0;
  raw_sums(samples, mean, raw2, m3_raw);
  return raw2;
}

Moments empirical_moments(const RowMatrixXd& samples) {
  const std::int64_t n = samples.rows();
  if (n < 2) throw ContractError("empirical_moments: need at least 2 samples");
  const int d = static_cast<int>(samples.cols());

  Moments mom;
  Eigen::MatrixXd raw2;
  raw_sums(samples, mom.mean, raw2, mom.m3_raw);
  mom.cov = raw2 - mom.mean * mom.mean.transpose();
  mom.cov = 0.5 * (mom.cov + mom.cov.transpose()).eval();
  if (d >= 3) {
    mom.m3 = mom.m3_raw - mom.mean[0] * raw2(1, 2) - mom.mean[1] * raw2(0, 2) -
             mom.mean[2] * raw2(0, 1) +
             2.0 * mom.mean[0] * mom.mean[1] * mom.mean[2];
  }

  // Centered third/fourth power sums for per-mode skewness and kurtosis.
  const std::int64_t nb = num_blocks(n);
  const int width = 2 * d;
  std::vector<double> partials(static_cast<std::size_t>(nb * width), 0.0);
  const double* data = samples.data();
  const Eigen::VectorXd mean = mom.mean;
  for_each_block(n, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double* acc = partials.data() + b * width;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double* z = data + i * d;
      for (int k = 0; k < d; ++k) {
        const double dz = z[k] - mean[k];
        const double dz2 = dz * dz;
        acc[k] += dz2 * dz;
        acc[d + k] += dz2 * dz2;
      }
    }
  });
  std::vector<double> total(static_cast<std::size_t>(width));
  pairwise_combine(partials.data(), nb, width, total.data());
  const double inv_n = 1.0 / static_cast<double>(n);
  mom.skew.resize(d);
  mom.kurt.resize(d);
  for (int k = 0; k < d; ++k) {
    const double var = mom.cov(k, k);
    const double sd = std::sqrt(var);
    mom.skew[k] = var > 0 ? total[k] * inv_n / (var * sd) : 0.0;
    mom.kurt[k] = var > 0 ? total[d + k] * inv_n / (var * var) : 0.0;
  }
  return mom;
}

}  // namespace triadda

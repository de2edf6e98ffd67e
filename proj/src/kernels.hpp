#pragma once

// Internal hot-loop kernels shared by the integrators.  Loops are templated
// on the compile-time dimension (DD > 0) with a runtime fallback (DD == 0) so
// the d = 3 triad path fully unrolls.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "triadda/model.hpp"

namespace triadda::detail {

inline constexpr int kMaxDim = 32;

struct RawSpec {
  int d = 0;
  const double* lambda = nullptr;  // row-major d x d
  const double* gamma = nullptr;   // d^3
  const double* F = nullptr;
  const double* sigma = nullptr;
};

inline RawSpec raw_view(const ModelSpec& spec) {
  return RawSpec{spec.d, spec.Lambda.data(), spec.gamma.data(), spec.F.data(),
                 spec.sigma.data()};
}

template <int DD>
inline void drift_eval(const RawSpec& s, const double* u, double* out) {
  const int d = DD > 0 ? DD : s.d;
  for (int k = 0; k < d; ++k) {
    double acc = s.F[k];
    const double* lrow = s.lambda + k * d;
    for (int l = 0; l < d; ++l) acc += lrow[l] * u[l];
    const double* gk = s.gamma + k * d * d;
    for (int m = 0; m < d; ++m) {
      const double um = u[m];
      const double* gm = gk + m * d;
      for (int n = 0; n < d; ++n) acc += gm[n] * um * u[n];
    }
    out[k] = acc;
  }
}

// H^m_k(z) = sum_{m,n} gamma_kmn z_m z_n for all d modes.
template <int DD>
inline void h_m_eval(const RawSpec& s, const double* z, double* out) {
  const int d = DD > 0 ? DD : s.d;
  for (int k = 0; k < d; ++k) {
    double acc = 0.0;
    const double* gk = s.gamma + k * d * d;
    for (int m = 0; m < d; ++m) {
      const double zm = z[m];
      const double* gm = gk + m * d;
      for (int n = 0; n < d; ++n) acc += gm[n] * zm * z[n];
    }
    out[k] = acc;
  }
}

// Raw statistic contribution: z (d), upper triangle of z z^T, z1 z2 z3.
inline int stat_width(int d) { return d + d * (d + 1) / 2 + 1; }

template <int DD>
inline void stat_accumulate(int d_runtime, const double* z, double* acc) {
  const int d = DD > 0 ? DD : d_runtime;
  int at = 0;
  for (int k = 0; k < d; ++k) acc[at++] += z[k];
  for (int k = 0; k < d; ++k)
    for (int l = k; l < d; ++l) acc[at++] += z[k] * z[l];
  acc[at] += (d >= 3) ? z[0] * z[1] * z[2] : 0.0;
}

// Decode combined raw totals into mean, covariance (divisor n) and the
// centered triple product.
void stats_from_totals(const double* totals, int d, std::int64_t n,
                       Eigen::VectorXd& mean, Eigen::MatrixXd& cov, double& m3,
                       Eigen::MatrixXd* raw2_out = nullptr);

// Track the first non-finite particle across blocks.
struct BadIndex {
  std::atomic<std::int64_t> value{-1};
  void note(std::int64_t i) {
    std::int64_t cur = value.load(std::memory_order_relaxed);
    while ((cur == -1 || i < cur) &&
           !value.compare_exchange_weak(cur, i, std::memory_order_relaxed)) {
    }
  }
};

template <int DD>
inline bool row_finite(int d_runtime, const double* z) {
  const int d = DD > 0 ? DD : d_runtime;
  for (int k = 0; k < d; ++k)
    if (!std::isfinite(z[k])) return false;
  return true;
}

}  // namespace triadda::detail

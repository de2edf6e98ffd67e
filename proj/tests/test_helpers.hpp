#pragma once

// Shared fixtures and independent oracles for the test suites.  Everything in
// here is hand-derived from the triad equations and kept free of the library
// assembly paths it is used to check.

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "triadda/config.hpp"
#include "triadda/model.hpp"
#include "triadda/rng.hpp"

namespace triadda::testing {

inline Eigen::VectorXd random_vector(Xoshiro256pp& rng, int d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int k = 0; k < d; ++k) v[k] = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline Eigen::MatrixXd random_spd(Xoshiro256pp& rng, int d, double scale = 1.0) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = scale * (2.0 * rng.uniform() - 1.0);
  return a * a.transpose() + 0.1 * scale * scale * Eigen::MatrixXd::Identity(d, d);
}

inline RowMatrixXd gaussian_ensemble(Xoshiro256pp& rng, std::int64_t n, int d,
                                     double sd = 1.0) {
  RowMatrixXd z(n, d);
  NormalStream stream;
  stream.engine = rng;
  for (std::int64_t i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) z(i, k) = sd * stream.normal();
  rng = stream.engine;
  return z;
}

// Raw empirical moments of a fluctuation ensemble used by the triad oracle.
struct TriadEnsembleMoments {
  double c1, c2, c3;        // <z2 z3>, <z1 z3>, <z1 z2>
  double m3;                // <z1 z2 z3>
  double z1z3sq, z1z2sq;    // <z1 z3^2>, <z1 z2^2>
  double z2z3sq, z1sq_z2;   // <z2 z3^2>, <z1^2 z2>
  double z2sq_z3, z1sq_z3;  // <z2^2 z3>, <z1^2 z3>
};

inline TriadEnsembleMoments triad_ensemble_moments(const RowMatrixXd& z) {
  TriadEnsembleMoments m{};
  const double n = static_cast<double>(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double a = z(i, 0), b = z(i, 1), c = z(i, 2);
    m.c1 += b * c;
    m.c2 += a * c;
    m.c3 += a * b;
    m.m3 += a * b * c;
    m.z1z3sq += a * c * c;
    m.z1z2sq += a * b * b;
    m.z2z3sq += b * c * c;
    m.z1sq_z2 += a * a * b;
    m.z2sq_z3 += b * b * c;
    m.z1sq_z3 += a * a * c;
  }
  m.c1 /= n;
  m.c2 /= n;
  m.c3 /= n;
  m.m3 /= n;
  m.z1z3sq /= n;
  m.z1z2sq /= n;
  m.z2z3sq /= n;
  m.z1sq_z2 /= n;
  m.z2sq_z3 /= n;
  m.z1sq_z3 /= n;
  return m;
}

// Hand-coded right-hand sides of the triad moment equations (mean, variances
// and cross-covariances), with ensemble averages standing in for the
// expectations.  Note the noise contribution sits outside the doubled
// bracket: at equilibrium with u_bar = c = M3 = 0 this reduces to
// r_k = sigma_k^2 / (2 d_k), the Gaussian equipartition measure.
struct TriadRhs {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

inline TriadRhs triad_moment_rhs(const TriadParams& p, const Eigen::Vector3d& u,
                                 const Eigen::Matrix3d& R,
                                 const TriadEnsembleMoments& e) {
  const double B1 = p.B[0], B2 = p.B[1], B3 = p.B[2];
  const double l1 = p.lambda[0], l2 = p.lambda[1], l3 = p.lambda[2];
  const double d1 = p.damp[0], d2 = p.damp[1], d3 = p.damp[2];
  const double s1 = p.sigma[0], s2 = p.sigma[1], s3 = p.sigma[2];
  const double r1 = R(0, 0), r2 = R(1, 1), r3 = R(2, 2);
  const double c1 = R(1, 2), c2 = R(0, 2), c3 = R(0, 1);

  TriadRhs rhs;
  rhs.mean[0] = (-d1 * u[0] - l3 * u[1] + l2 * u[2]) + B1 * u[1] * u[2] + B1 * e.c1;
  rhs.mean[1] = (l3 * u[0] - d2 * u[1] - l1 * u[2]) + B2 * u[0] * u[2] + B2 * e.c2;
  rhs.mean[2] = (-l2 * u[0] + l1 * u[1] - d3 * u[2]) + B3 * u[0] * u[1] + B3 * e.c3;

  const double dr1 =
      2.0 * ((-d1 * r1 + l2 * c2 - l3 * c3) + B1 * (u[1] * c2 + u[2] * c3) +
             B1 * e.m3) + s1 * s1;
  const double dr2 =
      2.0 * ((-l1 * c1 - d2 * r2 + l3 * c3) + B2 * (u[0] * c1 + u[2] * c3) +
             B2 * e.m3) + s2 * s2;
  const double dr3 =
      2.0 * ((l1 * c1 - l2 * c2 - d3 * r3) + B3 * (u[0] * c1 + u[1] * c2) +
             B3 * e.m3) + s3 * s3;
  const double dc1 = -(d2 + d3) * c1 + l3 * c2 - l2 * c3 + l1 * (r2 - r3) +
                     (B2 * u[0] * r3 + B3 * u[0] * r2) +
                     (B2 * u[2] * c2 + B3 * u[1] * c3) +
                     (B2 * e.z1z3sq + B3 * e.z1z2sq);
  const double dc2 = -l3 * c1 - (d1 + d3) * c2 + l1 * c3 + l2 * (r3 - r1) +
                     (B1 * u[1] * r3 + B3 * u[1] * r1) +
                     (B1 * u[2] * c1 + B3 * u[0] * c3) +
                     (B1 * e.z2z3sq + B3 * e.z1sq_z2);
  const double dc3 = l2 * c1 - l1 * c2 - (d1 + d2) * c3 + l3 * (r1 - r2) +
                     (B1 * u[2] * r2 + B2 * u[2] * r1) +
                     (B1 * u[1] * c1 + B2 * u[0] * c2) +
                     (B1 * e.z2sq_z3 + B2 * e.z1sq_z3);
  rhs.cov << dr1, dc3, dc2, dc3, dr2, dc1, dc2, dc1, dr3;
  return rhs;
}

// Sixth Gaussian moment E[z_{i1}...z_{i6}] for z ~ N(0, I): the number of
// perfect matchings whose pairs carry equal indices.
inline double isserlis6(const std::array<int, 6>& idx) {
  double total = 0.0;
  std::array<bool, 6> used{};
  auto rec = [&](auto&& self, int taken) -> void {
    if (taken == 6) {
      total += 1.0;
      return;
    }
    int first = 0;
    while (used[static_cast<std::size_t>(first)]) ++first;
    used[static_cast<std::size_t>(first)] = true;
    for (int second = first + 1; second < 6; ++second) {
      if (used[static_cast<std::size_t>(second)]) continue;
      if (idx[static_cast<std::size_t>(first)] != idx[static_cast<std::size_t>(second)]) continue;
      used[static_cast<std::size_t>(second)] = true;
      self(self, taken + 2);
      used[static_cast<std::size_t>(second)] = false;
    }
    used[static_cast<std::size_t>(first)] = false;
  };
  rec(rec, 0);
  return total;
}

// Analytic covariance of H^m under z ~ N(0, I):
// Cov(H_k, H_l) = 2 sum_{p,q} gamma_kpq gamma_lpq.
inline Eigen::MatrixXd analytic_cov_Hm(const ModelSpec& spec, int s) {
  Eigen::MatrixXd c(s, s);
  const int d = spec.d;
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l) {
      double acc = 0.0;
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q)
          acc += spec.gamma_at(k, p, q) * spec.gamma_at(l, p, q);
      c(k, l) = 2.0 * acc;
    }
  return c;
}

// Analytic covariance of the flattened H^v under z ~ N(0, I), via the
// sixth-moment pairing formula (E[H^v] = 0 there).
inline Eigen::MatrixXd analytic_cov_Hv(const ModelSpec& spec, int s) {
  const int d = spec.d;
  auto term = [&](int a, int b, int c, int e) {
    // E[H_a z_b H_c z_e]
    double acc = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) {
        const double gap = spec.gamma_at(a, p, q);
        if (gap == 0.0) continue;
        for (int r = 0; r < d; ++r)
          for (int t = 0; t < d; ++t) {
            const double gct = spec.gamma_at(c, r, t);
            if (gct == 0.0) continue;
            acc += gap * gct * isserlis6({p, q, b, r, t, e});
          }
      }
    return acc;
  };
  Eigen::MatrixXd out(s * s, s * s);
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l)
      for (int k2 = 0; k2 < s; ++k2)
        for (int l2 = 0; l2 < s; ++l2)
          out(k * s + l, k2 * s + l2) = term(k, l, k2, l2) + term(k, l, l2, k2) +
                                        term(l, k, k2, l2) + term(l, k, l2, k2);
  return out;
}

// RK4 integration of the linear-Gaussian covariance equation
// dR/dt = Lambda R + R Lambda^T + Q; independent oracle for gamma = 0 runs.
inline Eigen::MatrixXd integrate_lyapunov_rk4(const Eigen::MatrixXd& Lambda,
                                              const Eigen::MatrixXd& Q,
                                              Eigen::MatrixXd R, double dt,
                                              std::int64_t steps) {
  auto f = [&](const Eigen::MatrixXd& r) -> Eigen::MatrixXd {
    return Lambda * r + r * Lambda.transpose() + Q;
  };
  for (std::int64_t n = 0; n < steps; ++n) {
    const Eigen::MatrixXd k1 = f(R);
    const Eigen::MatrixXd k2 = f(R + 0.5 * dt * k1);
    const Eigen::MatrixXd k3 = f(R + 0.5 * dt * k2);
    const Eigen::MatrixXd k4 = f(R + dt * k3);
    R += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return R;
}

}  // namespace triadda::testing

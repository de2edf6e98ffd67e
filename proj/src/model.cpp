#include "triadda/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "triadda/errors.hpp"
#include "triadda/rng.hpp"

namespace triadda {

namespace {

void check_dim(const ModelSpec& spec, const Eigen::VectorXd& v, const char* name) {
  if (v.size() != spec.d) {
    std::ostringstream os;
    os << "dimension mismatch: " << name << " has size " << v.size()
       << ", spec.d = " << spec.d;
    throw ContractError(os.str());
  }
}

}  // namespace

double ModelSpec::energy_residual() const {
  // Deterministic probe vectors; enough to expose any non-conserving tensor
  // of this size in practice.
  Xoshiro256pp rng(0x7261642dULL, 0);
  double worst = 0.0;
  Eigen::VectorXd u(d);
  for (int trial = 0; trial < 64; ++trial) {
    for (int k = 0; k < d; ++k) u[k] = 2.0 * rng.uniform() - 1.0;
    Eigen::VectorXd b = bilinear_B(*this, u, u);
    const double norm = u.norm();
    worst = std::max(worst, std::abs(u.dot(b)) / (1.0 + norm * norm * norm));
  }
  return worst;
}

void ModelSpec::validate(double tol) const {
  if (d <= 0) throw ContractError("ModelSpec: d must be positive");
  if (Lambda.rows() != d || Lambda.cols() != d)
    throw ContractError("ModelSpec: Lambda must be d x d");
  if (static_cast<std::int64_t>(gamma.size()) !=
      static_cast<std::int64_t>(d) * d * d)
    throw ContractError("ModelSpec: gamma must hold d^3 entries");
  if (F.size() != d || sigma.size() != d)
    throw ContractError("ModelSpec: F and sigma must have size d");
  if (Q_sigma.rows() != d || Q_sigma.cols() != d)
    throw ContractError("ModelSpec: Q_sigma must be d x d");
  for (int k = 0; k < d; ++k)
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < m; ++n)
        if (gamma_at(k, m, n) != gamma_at(k, n, m))
          throw ContractError("ModelSpec: gamma not symmetrized in (m, n)");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double expect = (i == j) ? sigma[i] * sigma[i] : 0.0;
      if (Q_sigma(i, j) != expect)
        throw ContractError("ModelSpec: Q_sigma must equal diag(sigma)^2");
    }
  if (energy_residual() > tol)
    throw ContractError("ModelSpec: quadratic form violates energy conservation");
}

ModelSpec build_triad_spec(const TriadParams& p) {
  const double bsum = p.B[0] + p.B[1] + p.B[2];
  if (std::abs(bsum) > 1e-12)
    throw ContractError("TriadParams: B1 + B2 + B3 must vanish");
  for (int k = 0; k < 3; ++k)
    if (!(p.r0_var[k] > 0.0))
      throw ContractError("TriadParams: initial variances must be positive");

  ModelSpec spec;
  spec.d = 3;
  spec.Lambda.resize(3, 3);
  spec.Lambda << -p.damp[0], -p.lambda[2], p.lambda[1],
                  p.lambda[2], -p.damp[1], -p.lambda[0],
                 -p.lambda[1], p.lambda[0], -p.damp[2];
  spec.gamma.assign(27, 0.0);
  // B(u,u) = (B1 u2 u3, B2 u3 u1, B3 u1 u2), symmetrized over the last two
  // indices.
  spec.gamma_at(0, 1, 2) = spec.gamma_at(0, 2, 1) = 0.5 * p.B[0];
  spec.gamma_at(1, 0, 2) = spec.gamma_at(1, 2, 0) = 0.5 * p.B[1];
  spec.gamma_at(2, 0, 1) = spec.gamma_at(2, 1, 0) = 0.5 * p.B[2];
  spec.F = Eigen::VectorXd::Zero(3);
  spec.sigma.resize(3);
  spec.sigma << p.sigma[0], p.sigma[1], p.sigma[2];
  spec.Q_sigma = RowMatrixXd::Zero(3, 3);
  for (int k = 0; k < 3; ++k) spec.Q_sigma(k, k) = p.sigma[k] * p.sigma[k];
  return spec;
}

Eigen::VectorXd bilinear_B(const ModelSpec& spec, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v) {
  check_dim(spec, u, "u");
  check_dim(spec, v, "v");
  if (!u.allFinite() || !v.allFinite())
    throw ContractError("bilinear_B: inputs must be finite");
  const int d = spec.d;
  Eigen::VectorXd out(d);
  for (int k = 0; k < d; ++k) {
    double acc = 0.0;
    const double* g = &spec.gamma[static_cast<std::size_t>(k) * d * d];
    for (int m = 0; m < d; ++m) {
      const double um = u[m];
      for (int n = 0; n < d; ++n) acc += g[m * d + n] * um * v[n];
    }
    out[k] = acc;
  }
  return out;
}

RowMatrixXd mean_coupling_L(const ModelSpec& spec, const Eigen::VectorXd& u_bar) {
  check_dim(spec, u_bar, "u_bar");
  const int d = spec.d;
  RowMatrixXd L = spec.Lambda;
  for (int k = 0; k < d; ++k) {
    const double* g = &spec.gamma[static_cast<std::size_t>(k) * d * d];
    for (int l = 0; l < d; ++l) {
      double acc = 0.0;
      for (int m = 0; m < d; ++m) acc += (g[m * d + l] + g[l * d + m]) * u_bar[m];
      L(k, l) += acc;
    }
  }
  return L;
}

Eigen::VectorXd lyapunov_exponents(const ModelSpec& spec,
                                   const Eigen::VectorXd& u_bar) {
  if (!u_bar.allFinite())
    throw ContractError("lyapunov_exponents: u_bar must be finite");
  RowMatrixXd L = mean_coupling_L(spec, u_bar);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(L);
  if (solver.info() != Eigen::Success)
    throw NumericalError("lyapunov_exponents: eigen decomposition failed");
  Eigen::VectorXd re = solver.eigenvalues().real();
  std::sort(re.data(), re.data() + re.size(), std::greater<double>());
  return re;
}

}  // namespace triadda

#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace triadda {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Quadratic SDE system du = [Lambda u + B(u,u) + F] dt + sigma dW with an
// energy-conserving bilinear coupling B.  The interaction tensor is stored
// symmetrized in its last two indices, gamma_kmn == gamma_knm, which leaves
// every derived quantity (L(u_bar), H_m, H_v) unchanged and makes them
// unique functions of the spec.
struct ModelSpec {
  int d = 0;
  RowMatrixXd Lambda;          // d x d linear operator (skew part minus damping)
  std::vector<double> gamma;   // flattened d^3 tensor, index (k*d + m)*d + n
  Eigen::VectorXd F;           // deterministic forcing
  Eigen::VectorXd sigma;       // per-mode white noise amplitudes (diagonal)
  RowMatrixXd Q_sigma;         // sigma sigma^T

  double gamma_at(int k, int m, int n) const {
    return gamma[static_cast<std::size_t>((k * d + m) * d + n)];
  }
  double& gamma_at(int k, int m, int n) {
    return gamma[static_cast<std::size_t>((k * d + m) * d + n)];
  }

  // Largest |u . B(u,u)| normalized residual over a deterministic probe set;
  // ~0 for energy-conserving tensors.
  double energy_residual() const;

  // Throws ContractError when shapes are inconsistent, gamma is not
  // symmetrized, Q_sigma != diag(sigma)^2, or energy conservation fails.
  void validate(double tol = 1e-12) const;
};

// Parameters of the three-mode triad system.
struct TriadParams {
  std::array<double, 3> B{};        // interaction coefficients, B1+B2+B3 = 0
  std::array<double, 3> lambda{};   // skew coupling
  std::array<double, 3> damp{};     // damping d_k (sign as printed: du_k has -d_k u_k)
  std::array<double, 3> sigma{};    // noise amplitudes
  Eigen::Vector3d u0_mean{0, 0, 0};
  Eigen::Vector3d r0_var{1, 1, 1};  // diagonal initial variances, > 0
};

// Assemble the ModelSpec of the triad system.  Throws ContractError when
// B1+B2+B3 deviates from zero beyond 1e-12 or an initial variance is
// non-positive.
ModelSpec build_triad_spec(const TriadParams& p);

// Bilinear extension B(u,v)_k = sum_{m,n} gamma_kmn u_m v_n.
Eigen::VectorXd bilinear_B(const ModelSpec& spec, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v);

// Mean-linearized coupling operator L(u_bar)_{kl} = Lambda_{kl}
// + sum_m (gamma_kml + gamma_klm) u_bar_m.
RowMatrixXd mean_coupling_L(const ModelSpec& spec, const Eigen::VectorXd& u_bar);

// Real parts of the eigenvalues of L(u_bar), sorted descending.
Eigen::VectorXd lyapunov_exponents(const ModelSpec& spec,
                                   const Eigen::VectorXd& u_bar);

}  // namespace triadda
